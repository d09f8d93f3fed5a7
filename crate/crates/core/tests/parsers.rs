//! Parser entry points: replay the fuzz corpus and check that arbitrary
//! input never panics.

use std::fs;
use std::path::PathBuf;

use homolock::config::{parse_override, ConfigDocument, RunConfig};
use homolock::units::{parse_quantity, Dimension};
use proptest::prelude::*;

const DIMENSIONS: [Dimension; 6] = [
    Dimension::Rate,
    Dimension::Frequency,
    Dimension::Time,
    Dimension::Level,
    Dimension::Diffusion,
    Dimension::Dimensionless,
];

fn corpus(target: &str) -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| fs::read_to_string(p).unwrap())
        .collect()
}

fn exercise_run_config(text: &str) {
    if let Ok(config) = RunConfig::parse(text) {
        let _ = config.opo_params();
        let _ = config.efficiency();
        let _ = config.two_mode_field();
        let _ = config.detuning_grid();
    }
}

#[test]
fn config_corpus() {
    let seeds = corpus("config_parse");
    assert!(!seeds.is_empty());
    let parsed = seeds
        .iter()
        .filter(|s| ConfigDocument::parse(s).is_ok())
        .count();
    assert!(parsed >= 2, "bundled configs parse");
}

#[test]
fn run_config_corpus() {
    for text in corpus("run_config") {
        exercise_run_config(&text);
    }
    let fig2 = corpus("run_config")
        .into_iter()
        .find(|t| t.contains("lo_offset"))
        .unwrap();
    assert!(RunConfig::parse(&fig2).unwrap().opo_params().is_ok());
}

#[test]
fn quantity_corpus() {
    for text in corpus("quantity_parse") {
        for d in DIMENSIONS {
            if let Ok(q) = parse_quantity(&text, d) {
                assert!(q.value.is_finite());
            }
        }
    }
}

#[test]
fn override_corpus() {
    let ok = corpus("override_parse")
        .iter()
        .filter(|t| parse_override(t).is_ok())
        .count();
    assert_eq!(ok, 3);
}

proptest! {
    #[test]
    fn run_config_never_panics(text in "\\PC{0,200}") {
        exercise_run_config(&text);
    }

    #[test]
    fn structured_run_config_never_panics(
        lines in proptest::collection::vec(
            "(\\[(run|opo|detection|sweep|spectrum|lock|squeezer)\\]|[a-z_]{2,18} = -?[0-9]{1,4}(\\.[0-9]{1,3})?(e-?[0-9])? ?(MHz|kHz|Hz|dB|ns|s|rad/s)?)",
            0..16,
        )
    ) {
        exercise_run_config(&lines.join("\n"));
    }

    #[test]
    fn quantity_never_panics(text in "\\PC{0,40}") {
        for d in DIMENSIONS {
            if let Ok(q) = parse_quantity(&text, d) {
                prop_assert!(q.value.is_finite());
            }
        }
    }

    #[test]
    fn override_never_panics(text in "\\PC{0,40}") {
        if let Ok((section, key, value)) = parse_override(&text) {
            let mut doc = ConfigDocument::default();
            doc.set(&section, &key, &value);
            prop_assert_eq!(doc.get(&section, &key).map(|e| e.value.clone()), Some(value));
        }
    }
}
