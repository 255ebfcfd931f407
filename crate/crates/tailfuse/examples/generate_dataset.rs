//! Generate the synthetic long-tailed paired-modality benchmark and
//! write its splits to disk.
//!
//! `cargo run --example generate_dataset -- out/dataset`

use std::path::PathBuf;

use tailfuse::data::{class_counts, generate, write_dataset, DatasetConfig};
use tailfuse::Result;

fn main() -> Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "out/dataset".to_string()),
    );
    let cfg = DatasetConfig::default();
    let counts = class_counts(&cfg);
    println!("class counts (head -> tail): {counts:?}");
    println!(
        "imbalance ratio {} -> head {} / tail {} training samples",
        cfg.imbalance_ratio,
        counts[0],
        counts[cfg.k - 1]
    );

    let dataset = generate(&cfg)?;
    println!(
        "generated {} train / {} val / {} test samples",
        dataset.train.len(),
        dataset.val.len(),
        dataset.test.len()
    );

    std::fs::create_dir_all(&dir).expect("create output dir");
    for (name, split) in [
        ("train.jsonl", &dataset.train),
        ("val.jsonl", &dataset.val),
        ("test.jsonl", &dataset.test),
    ] {
        let path = dir.join(name);
        write_dataset(&path, split)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
