//! Deterministic mini-batch trainer with class balancing and
//! best-checkpoint selection on validation crossing error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{PeriodTag, SoftLabel};
use crate::spectral::MultiscaleSpectrogram;

use super::{backward, nadam_step, ModelConfig, ModelParams, NadamHyper};

/// One training example: precomputed features plus its label and period tag.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub features: MultiscaleSpectrogram,
    pub label: SoftLabel,
    pub tag: PeriodTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: NadamHyper,
    /// Subsample interictal examples each epoch down to the combined
    /// ictal + crossing count.
    pub balance: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            seed: 0,
            optimizer: NadamHyper::default(),
            balance: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_error: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best epoch (lowest validation crossing error).
    pub params: ModelParams,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

/// Mean absolute deviation between predicted and labeled ictal probability
/// over the crossing samples of `set` (all samples if it has no crossing
/// ones).
fn crossing_error(cfg: &ModelConfig, params: &ModelParams, set: &[TrainSample]) -> Result<f64> {
    let crossing: Vec<&TrainSample> = set
        .iter()
        .filter(|s| matches!(s.tag, PeriodTag::Crossing { .. }))
        .collect();
    let pool: Vec<&TrainSample> = if crossing.is_empty() {
        set.iter().collect()
    } else {
        crossing
    };
    let mut sum = 0.0;
    for s in &pool {
        let pred = super::forward(&s.features, params, cfg)?;
        sum += (pred.p_hat_ictal - s.label.p_ictal).abs();
    }
    Ok(sum / pool.len() as f64)
}

/// Trains for `cfg.epochs` epochs and returns the parameters of the epoch
/// with the lowest validation crossing error (mean |label - prediction| on
/// crossing samples). Identical seeds yield bit-identical parameters.
///
/// The training set must contain interictal, ictal, and crossing samples;
/// validation defaults to the training set when empty.
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    train_set: &[TrainSample],
    val_set: &[TrainSample],
) -> Result<TrainOutcome> {
    let val: &[TrainSample] = if val_set.is_empty() { train_set } else { val_set };
    train_with_metric(model_cfg, train_cfg, train_set, |params| {
        crossing_error(model_cfg, params, val)
    })
}

/// Trains with a caller-supplied validation metric; the checkpoint with the
/// lowest metric value wins. This is how a cross-validation harness selects
/// on the rectified (streamed) crossing error of the held-out seizure
/// instead of the raw per-sample error.
pub fn train_with_metric<F>(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    train_set: &[TrainSample],
    mut val_metric: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&ModelParams) -> Result<f64>,
{
    if train_set.is_empty() {
        return Err(Error::InvalidData("training set is empty".into()));
    }
    for (name, want) in [
        ("interictal", PeriodTag::Interictal),
        ("ictal", PeriodTag::Ictal),
    ] {
        if !train_set.iter().any(|s| s.tag == want) {
            return Err(Error::InvalidData(format!("training set has no {name} samples")));
        }
    }
    if !train_set.iter().any(|s| matches!(s.tag, PeriodTag::Crossing { .. })) {
        return Err(Error::InvalidData("training set has no crossing samples".into()));
    }
    if train_cfg.epochs == 0 || train_cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("epochs and batch size must be positive".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(train_cfg.seed);
    let mut params = ModelParams::init(model_cfg, train_cfg.seed)?;

    let interictal_idx: Vec<usize> = (0..train_set.len())
        .filter(|&i| train_set[i].tag == PeriodTag::Interictal)
        .collect();
    let seizure_idx: Vec<usize> = (0..train_set.len())
        .filter(|&i| train_set[i].tag != PeriodTag::Interictal)
        .collect();

    let mut history = Vec::with_capacity(train_cfg.epochs);
    let mut best: Option<(usize, f64, ModelParams)> = None;

    for epoch in 0..train_cfg.epochs {
        let mut order: Vec<usize> = if train_cfg.balance && interictal_idx.len() > seizure_idx.len()
        {
            let mut pool = interictal_idx.clone();
            pool.shuffle(&mut rng);
            pool.truncate(seizure_idx.len().max(1));
            pool.extend_from_slice(&seizure_idx);
            pool
        } else {
            (0..train_set.len()).collect()
        };
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(train_cfg.batch_size) {
            let mut grad_sum: Option<Vec<f64>> = None;
            for &i in batch {
                let s = &train_set[i];
                let (l, g) = backward(&s.features, &params, &s.label, model_cfg)?;
                epoch_loss += l;
                match &mut grad_sum {
                    None => grad_sum = Some(g),
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                }
            }
            let mut grads = grad_sum.unwrap();
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            nadam_step(&mut params, &grads, &train_cfg.optimizer)?;
        }
        let train_loss = epoch_loss / order.len() as f64;
        let val_error = val_metric(&params)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_error,
        });
        let improved = best.as_ref().map(|(_, e, _)| val_error < *e).unwrap_or(true);
        if improved {
            best = Some((epoch, val_error, params.clone()));
        }
    }

    let (best_epoch, _, best_params) = best.unwrap();
    Ok(TrainOutcome {
        params: best_params,
        best_epoch,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::label_segment;
    use crate::signal_io::Segment;
    use crate::spectral::{freq_norm, multiscale_stft, SpectralConfig, WindowFn};
    use rand::Rng;

    fn tiny_model() -> (ModelConfig, SpectralConfig) {
        let model = ModelConfig::tiny(2, 8, vec![1, 2], 8);
        let spectral = SpectralConfig {
            scales: vec![1, 2],
            nfft: 16,
            window: WindowFn::Hann,
        };
        (model, spectral)
    }

    /// Small synthetic corpus: low-frequency noise for interictal, a strong
    /// oscillation for ictal, and blends for crossing fractions.
    fn mini_dataset(spectral: &SpectralConfig, seed: u64, n_per_class: usize) -> Vec<TrainSample> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let rate = 32.0;
        let len = 64usize;
        let mut out = Vec::new();
        let make = |tag: PeriodTag, rng: &mut ChaCha12Rng| {
            let frac = match tag {
                PeriodTag::Ictal => 1.0,
                PeriodTag::Crossing { ictal_fraction } => ictal_fraction,
                _ => 0.0,
            };
            let f_osc = rng.gen_range(4.0..6.0);
            let channels: Vec<Vec<f64>> = (0..2)
                .map(|_| {
                    (0..len)
                        .map(|k| {
                            let t = k as f64 / rate;
                            let noise = rng.gen_range(-0.3..0.3);
                            let osc_on = k as f64 >= (1.0 - frac) * len as f64;
                            noise
                                + if osc_on {
                                    (2.0 * std::f64::consts::PI * f_osc * t).sin() * 1.5
                                } else {
                                    0.0
                                }
                        })
                        .collect()
                })
                .collect();
            let seg = Segment::from_channels(rate, 0.0, channels).unwrap();
            TrainSample {
                features: freq_norm(&multiscale_stft(&seg, spectral).unwrap()),
                label: label_segment(tag).unwrap(),
                tag,
            }
        };
        for i in 0..n_per_class {
            out.push(make(PeriodTag::Interictal, &mut rng));
            out.push(make(PeriodTag::Ictal, &mut rng));
            out.push(make(PeriodTag::crossing((i % 5) as f64 / 5.0 + 0.1), &mut rng));
        }
        out
    }

    #[test]
    fn rejects_single_tag_dataset() {
        let (model, spectral) = tiny_model();
        let all = mini_dataset(&spectral, 1, 4);
        let only_inter: Vec<TrainSample> = all
            .iter()
            .filter(|s| s.tag == PeriodTag::Interictal)
            .cloned()
            .collect();
        assert!(train(&model, &TrainConfig::default(), &only_inter, &[]).is_err());
        assert!(train(&model, &TrainConfig::default(), &[], &[]).is_err());
    }

    #[test]
    fn loss_decreases_over_first_epochs() {
        let (model, spectral) = tiny_model();
        let data = mini_dataset(&spectral, 2, 8);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            seed: 5,
            optimizer: NadamHyper { lr: 3e-3, ..NadamHyper::default() },
            balance: true,
        };
        let outcome = train(&model, &cfg, &data, &[]).unwrap();
        assert_eq!(outcome.history.len(), 3);
        assert!(
            outcome.history[1].train_loss < outcome.history[0].train_loss,
            "epoch 1 loss {} not below epoch 0 loss {}",
            outcome.history[1].train_loss,
            outcome.history[0].train_loss
        );
        assert!(
            outcome.history[2].train_loss < outcome.history[1].train_loss,
            "epoch 2 loss {} not below epoch 1 loss {}",
            outcome.history[2].train_loss,
            outcome.history[1].train_loss
        );
    }

    #[test]
    fn identical_seeds_give_bitwise_identical_params() {
        let (model, spectral) = tiny_model();
        let data = mini_dataset(&spectral, 3, 4);
        let cfg = TrainConfig { epochs: 2, batch_size: 4, seed: 9, ..TrainConfig::default() };
        let a = train(&model, &cfg, &data, &[]).unwrap();
        let b = train(&model, &cfg, &data, &[]).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.best_epoch, b.best_epoch);
        for (x, y) in a.params.values().iter().zip(b.params.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn interictal_only_labels_drive_predictions_down() {
        // All-[1,0] labels: after a few epochs the ictal output drops on the
        // training inputs. Balancing is off so the check uses the raw set;
        // tag variety is satisfied by relabeling everything interictal-like.
        let (model, spectral) = tiny_model();
        let mut data = mini_dataset(&spectral, 4, 6);
        for s in &mut data {
            s.label = SoftLabel::interictal();
        }
        let cfg = TrainConfig {
            epochs: 12,
            batch_size: 6,
            seed: 2,
            optimizer: NadamHyper { lr: 1e-2, ..NadamHyper::default() },
            balance: false,
        };
        let outcome = train(&model, &cfg, &data, &[]).unwrap();
        let mut worst: f64 = 0.0;
        for s in &data {
            let pred = super::super::forward(&s.features, &outcome.params, &model).unwrap();
            worst = worst.max(pred.p_hat_ictal);
        }
        assert!(worst < 0.1, "ictal output should collapse, worst {worst}");
    }
}
