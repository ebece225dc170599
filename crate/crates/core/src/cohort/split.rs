use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SurvivalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StratumRole {
    Group,
    Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Train, validation and test fractions.
    pub fractions: [f64; 3],
    pub seed: u64,
    #[serde(default = "default_strata")]
    pub strata: Vec<StratumRole>,
}

fn default_strata() -> Vec<StratumRole> {
    vec![StratumRole::Group, StratumRole::Event]
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            fractions: [0.7, 0.1, 0.2],
            seed: 0,
            strata: default_strata(),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config(format!(
                "split fractions must lie in [0, 1], got {:?}",
                self.fractions
            )));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Row indices of each split, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Largest-remainder apportionment of `n` items; equal remainders go to the
/// earlier split.
pub(crate) fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let exact = fractions.map(|f| f * n as f64);
    let floors = exact.map(|x| (x + 1e-9).floor().max(0.0) as usize);
    let mut counts = floors;
    let assigned: usize = floors.iter().sum();
    let mut order = [0usize, 1, 2];
    // Quantize remainders so near-equal values tie deterministically.
    let key = |k: usize| ((exact[k] - floors[k] as f64).max(0.0) * 1e9).round() as i64;
    order.sort_by(|&a, &b| key(b).cmp(&key(a)).then(a.cmp(&b)));
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

pub fn stratified_split_indices(
    dataset: &SurvivalDataset,
    spec: &SplitSpec,
) -> Result<SplitIndices> {
    spec.validate()?;
    let by_group = spec.strata.contains(&StratumRole::Group);
    let by_event = spec.strata.contains(&StratumRole::Event);
    let gids = dataset.group_ids();

    let mut strata: BTreeMap<(usize, bool), Vec<usize>> = BTreeMap::new();
    let group_keys: Vec<usize> = if by_group {
        (0..dataset.group_levels().len()).collect()
    } else {
        vec![0]
    };
    let event_keys: &[bool] = if by_event { &[false, true] } else { &[false] };
    for &g in &group_keys {
        for &e in event_keys {
            strata.insert((g, e), Vec::new());
        }
    }
    for (i, s) in dataset.subjects().iter().enumerate() {
        let key = (if by_group { gids[i] } else { 0 }, by_event && s.event);
        strata.get_mut(&key).expect("stratum exists").push(i);
    }

    let all_positive = spec.fractions.iter().all(|&f| f > 0.0);
    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (s_idx, ((g, e), mut members)) in strata.into_iter().enumerate() {
        if all_positive && members.len() < 3 {
            let mut label = Vec::new();
            if by_group {
                label.push(format!("group={}", dataset.group_levels()[g]));
            }
            if by_event {
                label.push(format!("event={}", u8::from(e)));
            }
            return Err(Error::Split {
                stratum: label.join(","),
                size: members.len(),
            });
        }
        let [n_train, n_val, _] = apportion(members.len(), &spec.fractions);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(s_idx as u64);
        members.shuffle(&mut rng);
        out.train.extend_from_slice(&members[..n_train]);
        out.val
            .extend_from_slice(&members[n_train..n_train + n_val]);
        out.test.extend_from_slice(&members[n_train + n_val..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Stratified train/validation/test split; each split keeps file order.
pub fn stratified_split(
    dataset: &SurvivalDataset,
    spec: &SplitSpec,
) -> Result<(SurvivalDataset, SurvivalDataset, SurvivalDataset)> {
    let idx = stratified_split_indices(dataset, spec)?;
    Ok((
        dataset.subset(&idx.train),
        dataset.subset(&idx.val),
        dataset.subset(&idx.test),
    ))
}
