//! Clip sampling semantics: random 16-frame windows for training,
//! a deterministic center window for evaluation, and last-frame padding
//! for sequences shorter than one clip.

use tailfuse::data::{eval_clip, sample_clip};
use tailfuse::numkernel::{Matrix, Rng};
use tailfuse::Result;

fn ramp(frames: usize) -> Matrix {
    // one feature per frame: the frame index, so windows are readable
    Matrix::new(frames, 1, (0..frames).map(|t| t as f64).collect()).unwrap()
}

fn row_indices(clip: &Matrix) -> Vec<i64> {
    (0..clip.rows()).map(|i| clip.row(i)[0] as i64).collect()
}

fn main() -> Result<()> {
    let clip_len = 16;
    let mut rng = Rng::new(7);

    let long = ramp(40);
    println!("sequence of 40 frames, three random training clips:");
    for _ in 0..3 {
        let clip = sample_clip(&long, clip_len, &mut rng)?;
        println!(
            "  start {:>2}: frames {:?}",
            clip.source_start,
            row_indices(&clip.frames)
        );
    }
    let center = eval_clip(&long, clip_len)?;
    println!(
        "evaluation clip is centered: start {} -> {:?}",
        center.source_start,
        row_indices(&center.frames)
    );

    let short = ramp(10);
    let padded = sample_clip(&short, clip_len, &mut rng)?;
    println!(
        "\nsequence of 10 frames is padded with its last frame:\n  {:?}",
        row_indices(&padded.frames)
    );
    Ok(())
}
