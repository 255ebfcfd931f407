use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tailfuse::cli::{
    cmd_eval, cmd_gen, cmd_train, gradcheck, ExperimentConfig, PartialConfig, Split,
};
use tailfuse::data::Modality;
use tailfuse::error::Result;

/// Long-tailed multimodal classification experiments: annealed focal
/// loss, per-modality heads, and late fusion.
#[derive(Parser)]
#[command(name = "tailfuse", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic long-tailed paired-modality benchmark.
    Gen {
        /// Plain key-value config file; flags override its entries.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: PartialConfig,
    },
    /// Train one modality pathway on a dataset directory.
    Train {
        /// Directory holding train.jsonl (and val.jsonl for --merge-val-into-train).
        dataset: PathBuf,
        /// Which modality to train (`a` or `b`).
        #[arg(long)]
        modality: Modality,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: PartialConfig,
    },
    /// Evaluate checkpoints on a split; two checkpoints also produce the
    /// fused report, its confusion matrix, and the head/tail F1 slice.
    Eval {
        /// Directory holding the split files.
        dataset: PathBuf,
        #[arg(long)]
        checkpoint_a: Option<PathBuf>,
        #[arg(long)]
        checkpoint_b: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: PartialConfig,
    },
    /// Check analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Test hook: offset added to one analytic gradient coordinate,
        /// forcing the check to fail.
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { config, overrides } => {
            let cfg = ExperimentConfig::resolve(config.as_deref(), &overrides)?;
            let out = cmd_gen(&cfg)?;
            println!(
                "generated {} train / {} val / {} test samples (seed {})",
                out.n_train, out.n_val, out.n_test, cfg.seed
            );
            println!("class counts: {:?}", out.class_counts);
            for path in [&out.train, &out.val, &out.test, &out.manifest] {
                println!("wrote {}", path.display());
            }
        }
        Command::Train {
            dataset,
            modality,
            config,
            overrides,
        } => {
            let cfg = ExperimentConfig::resolve(config.as_deref(), &overrides)?;
            let out = cmd_train(&cfg, &dataset, modality)?;
            for log in &out.epoch_logs {
                match log.gamma {
                    Some(g) => println!(
                        "epoch {:>3}/{}  gamma {:.4}  loss {:.6}",
                        log.epoch + 1,
                        cfg.epochs,
                        g,
                        log.mean_loss
                    ),
                    None => println!(
                        "epoch {:>3}/{}  loss {:.6}",
                        log.epoch + 1,
                        cfg.epochs,
                        log.mean_loss
                    ),
                }
            }
            println!(
                "trained modality {} on {} samples",
                modality.tag(),
                out.n_train_samples
            );
            println!("wrote {}", out.checkpoint.display());
            println!("wrote {}", out.manifest.display());
        }
        Command::Eval {
            dataset,
            checkpoint_a,
            checkpoint_b,
            split,
            config,
            overrides,
        } => {
            let cfg = ExperimentConfig::resolve(config.as_deref(), &overrides)?;
            let out = cmd_eval(
                &cfg,
                &dataset,
                checkpoint_a.as_deref(),
                checkpoint_b.as_deref(),
                split,
            )?;
            println!(
                "{:<8} {:>8} {:>8} {:>10} {:>10} {:>8}",
                "mode", "top1", "top5", "macro-P", "macro-R", "macro-F1"
            );
            for r in &out.reports {
                println!(
                    "{:<8} {:>8.4} {:>8.4} {:>10.4} {:>10.4} {:>8.4}",
                    r.mode,
                    r.report.top1,
                    r.report.top5,
                    r.report.macro_precision,
                    r.report.macro_recall,
                    r.report.macro_f1
                );
                if let Some(ht) = r.head_tail {
                    println!(
                        "{:<8} head-F1 {:.4}  tail-F1 {:.4}",
                        "", ht.head_f1, ht.tail_f1
                    );
                }
            }
            for r in &out.reports {
                println!("wrote {}", r.path.display());
            }
            if let Some(csv) = &out.confusion_csv {
                println!("wrote {}", csv.display());
            }
        }
        Command::Gradcheck { seed, perturb } => {
            let report = gradcheck::run_gradcheck(seed, perturb);
            println!("loss-level suite (200 cases):");
            for (gamma, err) in &report.per_gamma {
                println!("  gamma {gamma:<4} max rel err {err:.3e}");
            }
            println!(
                "end-to-end head suite (20 cases): max rel err {:.3e}",
                report.max_head_err
            );
            println!("overall max rel err {:.3e}", report.max_rel_err());
            let report = report.into_result()?;
            println!("gradcheck PASS (tolerance {:.0e})", gradcheck::TOLERANCE);
            drop(report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
