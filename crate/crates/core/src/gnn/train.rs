use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss_and_grad, network, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::scene::{DaySequence, SceneGraph, STEP_MINUTES};
use crate::timecode::encode;

/// One supervised transition `G_t -> G_{t+1}`.
#[derive(Clone, Debug)]
pub struct TrainingPair<'a> {
    pub input: &'a SceneGraph,
    pub target: &'a SceneGraph,
}

/// Mean training loss of every epoch, in order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
}

pub(crate) fn pairs(dataset: &[DaySequence]) -> Vec<TrainingPair<'_>> {
    dataset
        .iter()
        .flat_map(|day| day.graphs.windows(2))
        .filter(|w| w[1].minute() == w[0].minute() + STEP_MINUTES)
        .map(|w| TrainingPair {
            input: &w[0],
            target: &w[1],
        })
        .collect()
}

pub fn train(config: &ModelConfig, dataset: &[DaySequence]) -> Result<ModelParams> {
    train_with_log(config, dataset).map(|(p, _)| p)
}

pub fn train_with_log(config: &ModelConfig, dataset: &[DaySequence]) -> Result<(ModelParams, TrainingLog)> {
    config.check()?;
    let examples = pairs(dataset);
    let first = examples.first().ok_or(Error::EmptyDataset)?;
    let catalog = first.input.catalog().clone();
    for ex in &examples {
        if ex.input.len() != catalog.len() || ex.target.len() != catalog.len() {
            return Err(Error::CatalogMismatch);
        }
        ex.input.ensure_valid()?;
    }

    let mut params = ModelParams::init(config, catalog.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_5a3b1e);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = TrainingLog::default();
    let times: Vec<Vec<f64>> = examples
        .iter()
        .map(|ex| encode(ex.target.minute() as f64, &config.time_encoding))
        .collect::<Result<_>>()?;

    let mut tape = network::Tape::new(catalog.len(), config);
    let mut scratch = network::Scratch::new(catalog.len(), config);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &idx in &order {
            let ex = &examples[idx];
            network::forward_into(&mut tape, &params, &ex.input.adjacency(), &times[idx], None);
            let (value, dlogits) = loss_and_grad(&tape.logits, ex.target);
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, example: idx });
            }
            total += value;
            network::backward_into(&params, &tape, &dlogits, &mut scratch);
            params.adam_update(&scratch.grads);
        }
        log.epoch_losses.push(total / examples.len() as f64);
    }
    Ok((params, log))
}
