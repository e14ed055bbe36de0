use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LabelError;
use crate::domain::{Instance, StockId};

/// Indices into the candidate slice chosen as negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSample {
    /// Ascending indices into `candidates`.
    pub selected: Vec<usize>,
    pub eligible: usize,
    pub requested: usize,
    pub warning: Option<String>,
}

/// Draws `floor(ratio * |positives|)` negatives uniformly from candidates
/// whose stock also appears among the positives.
pub fn sample_negatives(
    positives: &[Instance],
    candidates: &[Instance],
    ratio: f64,
    seed: u64,
) -> Result<NegativeSample, LabelError> {
    if !(ratio.is_finite() && ratio >= 0.0) {
        return Err(LabelError::InvalidSamplingRatio(ratio));
    }
    if positives.is_empty() {
        return Err(LabelError::EmptyPositives);
    }
    let pool: BTreeSet<&StockId> = positives.iter().map(|p| &p.stock).collect();
    let eligible: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| pool.contains(&c.stock))
        .map(|(i, _)| i)
        .collect();
    let requested = (ratio * positives.len() as f64).floor() as usize;

    if eligible.len() <= requested {
        let warning = (eligible.len() < requested).then(|| {
            format!(
                "only {} eligible negatives for {} requested; taking all",
                eligible.len(),
                requested
            )
        });
        return Ok(NegativeSample {
            eligible: eligible.len(),
            selected: eligible,
            requested,
            warning,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), requested)
        .into_iter()
        .map(|k| eligible[k])
        .collect();
    selected.sort_unstable();
    Ok(NegativeSample {
        selected,
        eligible: eligible.len(),
        requested,
        warning: None,
    })
}
