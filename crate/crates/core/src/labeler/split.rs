use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LabelError, SplitName};
use crate::domain::{Instance, Task};

/// Train/dev/test fractions, held as exact rationals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRatios {
    parts: [Ratio<u64>; 3],
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            parts: [Ratio::new(8, 10), Ratio::new(1, 10), Ratio::new(1, 10)],
        }
    }
}

fn parse_fraction(text: &str) -> Result<Ratio<u64>, LabelError> {
    let bad = || LabelError::InvalidRatios(format!("{text:?} is not a decimal fraction"));
    let t = text.trim();
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 12 {
        return Err(bad());
    }
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let denom = 10u64.pow(frac.len() as u32);
    let num: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    Ok(Ratio::new(int * denom + num, denom))
}

impl SplitRatios {
    pub fn new(train: Ratio<u64>, dev: Ratio<u64>, test: Ratio<u64>) -> Result<Self, LabelError> {
        let zero = Ratio::from_integer(0);
        let one = Ratio::from_integer(1);
        for (name, r) in [("train", train), ("dev", dev), ("test", test)] {
            if r <= zero || r >= one {
                return Err(LabelError::InvalidRatios(format!("{name} fraction {r} not in (0,1)")));
            }
        }
        if train + dev + test != one {
            return Err(LabelError::InvalidRatios(format!(
                "fractions sum to {} instead of 1",
                train + dev + test
            )));
        }
        Ok(SplitRatios {
            parts: [train, dev, test],
        })
    }

    pub fn parts(&self) -> [Ratio<u64>; 3] {
        self.parts
    }

    /// Sizes for `n` items by largest remainder: each size is within one
    /// item of its exact share, and the sizes sum to `n`.
    pub fn allocate(&self, n: usize) -> [usize; 3] {
        let n = n as u64;
        let mut sizes = [0u64; 3];
        let mut remainders = [Ratio::from_integer(0u64); 3];
        for (k, r) in self.parts.iter().enumerate() {
            let exact = *r * n;
            sizes[k] = exact.to_integer();
            remainders[k] = exact - Ratio::from_integer(sizes[k]);
        }
        let leftover = n - sizes.iter().sum::<u64>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
        for &k in order.iter().take(leftover as usize) {
            sizes[k] += 1;
        }
        sizes.map(|s| s as usize)
    }
}

impl FromStr for SplitRatios {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(LabelError::InvalidRatios(format!(
                "{s:?}: expected three comma-separated fractions"
            )));
        }
        SplitRatios::new(
            parse_fraction(parts[0])?,
            parse_fraction(parts[1])?,
            parse_fraction(parts[2])?,
        )
    }
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.parts;
        write!(f, "{a},{b},{c}")
    }
}

/// Indices of one task's instances per split, each list ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSplit {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

impl TaskSplit {
    pub fn get(&self, name: SplitName) -> &[usize] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::Test => &self.test,
        }
    }

    fn get_mut(&mut self, name: SplitName) -> &mut Vec<usize> {
        match name {
            SplitName::Train => &mut self.train,
            SplitName::Dev => &mut self.dev,
            SplitName::Test => &mut self.test,
        }
    }

    /// Split tag of each instance index.
    pub fn assignment(&self) -> BTreeMap<usize, SplitName> {
        SplitName::ALL
            .iter()
            .flat_map(|&name| self.get(name).iter().map(move |&i| (i, name)))
            .collect()
    }
}

/// Stratified, seeded split of the instances labeled for `task`.
///
/// Each class is shuffled independently (classes visited in name order, one
/// RNG stream) and cut by [`SplitRatios::allocate`].
pub fn split_dataset(
    instances: &[Instance],
    ratios: &SplitRatios,
    seed: u64,
    task: Task,
) -> Result<TaskSplit, LabelError> {
    let mut by_class: BTreeMap<&'static str, Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        if let Some(class) = inst.class_name(task) {
            by_class.entry(class).or_default().push(i);
        }
    }
    if let Some((class, members)) = by_class.iter().find(|(_, m)| m.len() < 3) {
        return Err(LabelError::TooFewInstances {
            task,
            class: class.to_string(),
            count: members.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = TaskSplit::default();
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let sizes = ratios.allocate(members.len());
        let mut offset = 0;
        for (name, size) in SplitName::ALL.iter().zip(sizes) {
            split
                .get_mut(*name)
                .extend_from_slice(&members[offset..offset + size]);
            offset += size;
        }
    }
    for name in SplitName::ALL {
        split.get_mut(name).sort_unstable();
    }
    Ok(split)
}
