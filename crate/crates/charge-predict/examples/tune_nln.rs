//! scratch sweep (deleted before release)

use charge_predict::data::{synthesize_threshold_task, ThresholdTaskConfig};
use charge_predict::eval::spearman;
use charge_predict::nln::{train_nln, NlnDataset, NlnTrainConfig};

fn main() -> charge_predict::Result<()> {
    let task = synthesize_threshold_task(&ThresholdTaskConfig::default(), 1234)?;
    let targets = task.count_targets()?;
    let data = NlnDataset::new(task.probs.iter().cloned().zip(targets).collect())?;

    for &(epochs, lr, batch, momentum) in &[
        (30usize, 0.3f64, 32usize, 0.9f64),
        (60, 0.3, 32, 0.9),
        (60, 0.5, 32, 0.9),
        (60, 1.0, 32, 0.9),
        (60, 0.5, 16, 0.9),
        (100, 0.5, 32, 0.9),
        (60, 0.2, 64, 0.9),
        (60, 1.0, 64, 0.9),
    ] {
        let cfg = NlnTrainConfig {
            epochs,
            lr,
            batch_size: batch,
            momentum,
            ..NlnTrainConfig::default()
        };
        let start = std::time::Instant::now();
        let (model, log) = train_nln(&data, &cfg)?;
        let rho = spearman(&model.thresholds(), &task.true_thresholds)?;
        println!(
            "epochs {epochs:>3} lr {lr:.2} batch {batch:>2} mom {momentum}: loss {:.4} train_acc {:.3} holdout_acc {:.3} rho {:.3} ({:.1?})",
            log.epoch_losses.last().unwrap(),
            log.train_accuracy,
            log.holdout_accuracy.unwrap(),
            rho,
            start.elapsed()
        );
    }
    Ok(())
}
