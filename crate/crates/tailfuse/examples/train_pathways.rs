//! Train the two modality pathways independently with the annealed
//! focal loss and watch the per-epoch loss and gamma values.

use tailfuse::cli::{train_modality, ExperimentConfig};
use tailfuse::data::{generate, Modality};
use tailfuse::Result;

fn main() -> Result<()> {
    // a reduced benchmark so the example finishes in a couple of seconds
    let cfg = ExperimentConfig {
        n_head: 60,
        epochs: 10,
        ..ExperimentConfig::default()
    };
    let dataset = generate(&cfg.dataset_config())?;
    println!(
        "training on {} samples, {} classes",
        dataset.train.len(),
        cfg.k
    );

    for modality in [Modality::A, Modality::B] {
        println!("\npathway for modality {}:", modality.tag());
        let outcome = train_modality(&cfg, &dataset.train, modality)?;
        for log in &outcome.epoch_logs {
            println!(
                "  epoch {:>2}  gamma {:>7.4}  mean loss {:.5}",
                log.epoch,
                log.gamma.unwrap_or(f64::NAN),
                log.mean_loss
            );
        }
        println!(
            "  optimizer took {} steps; head shapes: w1 {}x{}, w2 {}x{}",
            outcome.optimizer.step_count(),
            outcome.params.w1.rows(),
            outcome.params.w1.cols(),
            outcome.params.w2.rows(),
            outcome.params.w2.cols()
        );
    }
    Ok(())
}
