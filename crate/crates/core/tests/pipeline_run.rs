//! End-to-end runs over the bundled fixture.

use std::fs;
use std::path::{Path, PathBuf};

use tmr_core::pipeline::{report_paths, run_pipeline, ProviderKind, RunConfig, Variant};
use tmr_core::RephraseScheme;

const C2F: Variant = Variant::Rephrased(RephraseScheme::ColloquialToFormal);
const GENERAL: Variant = Variant::Rephrased(RephraseScheme::General);

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pipeline")
}

/// Copies the fixture into a scratch directory so runs never touch it.
fn workspace() -> (tempfile::TempDir, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixture_dir()).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    let config = RunConfig::from_file(&dir.path().join("run.cfg")).unwrap();
    (dir, config)
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap()
}

#[test]
fn single_variant() {
    let (_dir, mut c) = workspace();
    c.variants = vec![Variant::Original];
    let report = run_pipeline(&c).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.variants, ["none"]);
    assert!(report.missing.is_empty());
    assert_eq!((report.k, report.n), (3, 5));
    assert_eq!(report.samples.len(), 3);
    for sub in ["cache", "processed", "models", "topics", "reports"] {
        assert!(c.output.join(sub).is_dir());
    }
    assert!(c.output.join("models/none.model.json").is_file());
    assert!(c.output.join("topics/none.topics.json").is_file());
}

#[test]
fn identity_rephrasing_changes_nothing() {
    let (_dir, mut c) = workspace();
    c.variants = vec![Variant::Original, GENERAL];
    c.provider = ProviderKind::Identity;
    let report = run_pipeline(&c).unwrap();
    assert_eq!(report.rows.len(), 2);
    let (a, b) = (&report.rows[0], &report.rows[1]);
    assert_eq!((a.variant.as_str(), b.variant.as_str()), ("none", "general"));
    assert_eq!(a.cv.to_bits(), b.cv.to_bits());
    assert_eq!((a.tu, a.tr, a.td), (b.tu, b.tr, b.td));
    assert_eq!(a.cv_per_topic, b.cv_per_topic);
    assert_eq!(report.topics[0].topics, report.topics[1].topics);
}

#[test]
fn formal_rewrite_improves_coherence_on_fixture() {
    let (_dir, c) = workspace();
    assert_eq!(c.variants, vec![Variant::Original, C2F]);
    let report = run_pipeline(&c).unwrap();
    assert!(report.missing.is_empty(), "{:?}", report.missing);
    let original = report.row("none").unwrap();
    let formal = report.row("colloquial_to_formal").unwrap();
    assert_ne!(original, formal);
    assert!(
        formal.cv >= original.cv,
        "rephrased C_v {} < original {}",
        formal.cv,
        original.cv
    );
    // all rows share K, N and the index
    for r in &report.rows {
        assert_eq!((r.k, r.n), (report.k, report.n));
        assert_eq!(r.index_config, report.index_config);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (dir, c) = workspace();
    run_pipeline(&c).unwrap();
    let mut again = c.clone();
    again.output = dir.path().join("second");
    run_pipeline(&again).unwrap();
    for (a, b) in report_paths(&c.output).iter().zip(report_paths(&again.output).iter()) {
        assert_eq!(read(a), read(b), "{} differs", a.display());
    }
    // frozen cache untouched by replay
    assert_eq!(
        read(&dir.path().join("cache.jsonl")),
        read(&fixture_dir().join("cache.jsonl"))
    );
}

#[test]
fn variants_are_isolated() {
    let (dir, c) = workspace();
    let both = run_pipeline(&c).unwrap();

    // drop the other variant's intermediates and rerun only this one
    for sub in ["processed", "models", "topics", "reports"] {
        for entry in fs::read_dir(c.output.join(sub)).unwrap() {
            let p = entry.unwrap().path();
            if p.file_name().unwrap().to_string_lossy().starts_with("none") {
                fs::remove_file(p).unwrap();
            }
        }
    }
    let mut only = c.clone();
    only.variants = vec![C2F];
    only.output = dir.path().join("only");
    let alone = run_pipeline(&only).unwrap();
    assert_eq!(alone.rows.len(), 1);
    assert_eq!(Some(&alone.rows[0]), both.row("colloquial_to_formal"));
    assert_eq!(alone.topics[0], both.topics[1]);
    assert_eq!(alone.index_config, both.index_config);
    assert_eq!(
        read(&c.output.join("reports/colloquial_to_formal.metrics.json")),
        read(&only.output.join("reports/colloquial_to_formal.metrics.json"))
    );
}

#[test]
fn failing_variant_is_reported_missing() {
    let (dir, mut c) = workspace();
    let empty = dir.path().join("empty_cache.jsonl");
    fs::write(&empty, "").unwrap();
    c.cache = Some(empty);
    let report = run_pipeline(&c).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.missing.len(), 1);
    assert_eq!(report.missing[0].variant, "colloquial_to_formal");
    assert_eq!(report.missing[0].stage, "rephrase");
    assert_eq!(report.variants, ["none", "colloquial_to_formal"]);
}

#[test]
fn fallback_keeps_failed_documents() {
    let (dir, mut c) = workspace();
    let partial = dir.path().join("partial.jsonl");
    let lines: Vec<String> = fs::read_to_string(dir.path().join("cache.jsonl"))
        .unwrap()
        .lines()
        .take(40)
        .map(str::to_owned)
        .collect();
    fs::write(&partial, lines.join("\n") + "\n").unwrap();
    c.cache = Some(partial);
    c.fallback_to_original = true;
    let report = run_pipeline(&c).unwrap();
    assert!(report.missing.is_empty());
    assert_eq!(report.topics[1].rephrase_failures.len(), 32);
    let processed = fs::read_to_string(c.output.join("processed/colloquial_to_formal.jsonl")).unwrap();
    assert_eq!(processed.lines().count(), 72);
}

#[test]
fn http_without_key_fails_only_rephrased_variants() {
    let (_dir, mut c) = workspace();
    c.provider = ProviderKind::Http;
    c.provider_config.api_key_env = "TMR_TEST_KEY_THAT_IS_NOT_SET".into();
    let report = run_pipeline(&c).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.missing[0].stage, "rephrase");
    assert!(report.missing[0].error.contains("TMR_TEST_KEY_THAT_IS_NOT_SET"));
}

#[test]
fn invalid_config_is_rejected_up_front() {
    let (_dir, mut c) = workspace();
    c.k = 1;
    assert!(run_pipeline(&c).is_err());
    assert!(!c.output.exists());
}
