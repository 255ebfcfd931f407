//! Print the exponential focusing-parameter decay over a training run:
//! gamma starts at 2, ends at 0.1, and falls by a constant factor per
//! epoch.

use tailfuse::loss::GammaSchedule;
use tailfuse::Result;

fn main() -> Result<()> {
    let schedule = GammaSchedule::default();
    println!(
        "geometric decay from {} to {} over {} epochs:",
        schedule.gamma_start(),
        schedule.gamma_end(),
        schedule.total_epochs()
    );
    for epoch in 0..schedule.total_epochs() {
        let gamma = schedule.gamma_at_epoch(epoch)?;
        let bar = "#".repeat((gamma * 30.0).round() as usize);
        println!("epoch {epoch:>2}  gamma {gamma:>8.5}  {bar}");
    }

    let per_epoch_factor = schedule.gamma_at_epoch(1)? / schedule.gamma_at_epoch(0)?;
    println!("\nper-epoch decay factor: {per_epoch_factor:.6}");
    Ok(())
}
