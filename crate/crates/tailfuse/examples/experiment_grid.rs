//! The full result grid on the synthetic benchmark: cross-entropy vs
//! annealed focal loss, each evaluated per-modality and fused.
//!
//! Run with an optional seed: `cargo run --example experiment_grid -- 41`

use tailfuse::cli::{train_modality, ExperimentConfig, LossKind};
use tailfuse::data::{generate, Modality};
use tailfuse::evaluate::{evaluate_models, tail_slice, FusionMode};
use tailfuse::{class_counts, Result};

fn main() -> Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed must be an integer"))
        .unwrap_or(42);
    let mut cfg = ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    };

    println!("generating benchmark (seed {seed})...");
    let dataset = generate(&cfg.dataset_config())?;
    let counts = class_counts(&cfg.dataset_config());
    println!(
        "train {} / val {} / test {} samples, class counts {:?}",
        dataset.train.len(),
        dataset.val.len(),
        dataset.test.len(),
        counts
    );

    println!(
        "\n{:<10} {:<6} {:>8} {:>8} {:>10} {:>8} {:>8} {:>8}",
        "modality", "loss", "top1", "top5", "macro-F1", "head-F1", "tail-F1", ""
    );
    for loss in [LossKind::Ce, LossKind::Focal] {
        cfg.loss = loss;
        let model_a = train_modality(&cfg, &dataset.train, Modality::A)?.params;
        let model_b = train_modality(&cfg, &dataset.train, Modality::B)?.params;
        for (name, mode) in [
            ("a", FusionMode::AOnly),
            ("b", FusionMode::BOnly),
            ("a+b", FusionMode::Fused),
        ] {
            let report = evaluate_models(&model_a, &model_b, &dataset.test, cfg.clip_len, mode)?;
            let (head_f1, tail_f1) = tail_slice(&report, &counts)?;
            println!(
                "{:<10} {:<6} {:>8.4} {:>8.4} {:>10.4} {:>8.4} {:>8.4}",
                name,
                loss.tag(),
                report.top1,
                report.top5,
                report.macro_f1,
                head_f1,
                tail_f1
            );
        }
    }
    Ok(())
}
