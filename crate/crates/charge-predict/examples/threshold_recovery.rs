//! Trains the count network on a task with known per-label thresholds and
//! checks that the learned gate biases recover them.
//!
//! The generator draws a hidden threshold tau_j per label; label j of a
//! sample is on iff its probability exceeds tau_j. After training, the gate's
//! learned thresholds (-b_j) should rank-correlate with the true tau.
//!
//! Run with: cargo run --example threshold_recovery

use charge_predict::data::{synthesize_threshold_task, ThresholdTaskConfig};
use charge_predict::eval::spearman;
use charge_predict::nln::{train_nln, NlnDataset, NlnTrainConfig};

fn main() -> charge_predict::Result<()> {
    let task_cfg = ThresholdTaskConfig::default(); // L=20, m=20000, tau in [0.3, 0.7]
    let task = synthesize_threshold_task(&task_cfg, 1234)?;
    let targets = task.count_targets()?;
    let data = NlnDataset::new(task.probs.iter().cloned().zip(targets).collect())?;

    let train_cfg = NlnTrainConfig::default();
    println!(
        "training count network: {} pairs, {} labels, {} epochs, lr {}",
        data.len(),
        data.num_labels(),
        train_cfg.epochs,
        train_cfg.lr
    );
    let start = std::time::Instant::now();
    let (model, log) = train_nln(&data, &train_cfg)?;
    println!(
        "done in {:.1?}; final epoch loss {:.4}",
        start.elapsed(),
        log.epoch_losses.last().unwrap()
    );
    println!(
        "count accuracy: train {:.3}, holdout {:.3}",
        log.train_accuracy,
        log.holdout_accuracy.unwrap_or(f64::NAN)
    );

    let learned = model.thresholds();
    let rho = spearman(&learned, &task.true_thresholds)?;
    println!("\n label   true tau   learned threshold");
    for (i, (t, l)) in task.true_thresholds.iter().zip(&learned).enumerate() {
        println!("{i:>6}   {t:>8.3}   {l:>17.3}");
    }
    println!("\nSpearman rank correlation (learned vs true): {rho:.3}");
    Ok(())
}
