//! Scenario-disjoint train/test splitting.

use std::collections::{BTreeMap, BTreeSet};

use super::ClassifyError;
use crate::cloud::WeatherLabel;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

/// Above this many scenarios the exhaustive subset search is replaced by a
/// greedy pick.
const EXHAUSTIVE_LIMIT: usize = 20;

/// Which scenario ids go to each side of a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl SplitPlan {
    pub fn is_train(&self, scenario: &str) -> bool {
        self.train.contains(scenario)
    }
}

struct ScenarioStats {
    count: usize,
    classes: BTreeSet<WeatherLabel>,
}

/// Plans a split of samples described by `(scenario_id, label)` pairs.
///
/// Every class must occur in at least two scenarios. Among all test sets that
/// leave every class on both sides, the one whose sample count is closest to
/// `(1 - train_fraction)` of the data wins; ties prefer scenarios that sort
/// last, so ids `A, B, C` split into `{A, B}` / `{C}`.
pub fn plan_split<'a, I>(samples: I, train_fraction: f64) -> Result<SplitPlan, ClassifyError>
where
    I: IntoIterator<Item = (&'a str, WeatherLabel)>,
{
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ClassifyError::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut stats: BTreeMap<&str, ScenarioStats> = BTreeMap::new();
    let mut total = 0usize;
    for (scenario, label) in samples {
        let s = stats.entry(scenario).or_insert_with(|| ScenarioStats { count: 0, classes: BTreeSet::new() });
        s.count += 1;
        s.classes.insert(label);
        total += 1;
    }
    if stats.len() < 2 {
        return Err(ClassifyError::InfeasibleSplit(format!(
            "need at least two scenarios, found {}",
            stats.len()
        )));
    }
    let all_classes: BTreeSet<WeatherLabel> = stats.values().flat_map(|s| s.classes.iter().copied()).collect();
    for class in &all_classes {
        let n = stats.values().filter(|s| s.classes.contains(class)).count();
        if n < 2 {
            return Err(ClassifyError::InfeasibleSplit(format!("class {class} occurs in only one scenario")));
        }
    }

    let ids: Vec<&str> = stats.keys().copied().collect();
    let entries: Vec<&ScenarioStats> = stats.values().collect();
    let target = (1.0 - train_fraction) * total as f64;
    let covers = |test: &dyn Fn(usize) -> bool| {
        let mut train_classes = BTreeSet::new();
        let mut test_classes = BTreeSet::new();
        for (i, s) in entries.iter().enumerate() {
            if test(i) {
                test_classes.extend(s.classes.iter().copied());
            } else {
                train_classes.extend(s.classes.iter().copied());
            }
        }
        train_classes == all_classes && test_classes == all_classes
    };

    let test_mask: Vec<bool> = if ids.len() <= EXHAUSTIVE_LIMIT {
        let n = ids.len();
        let mut best: Option<(f64, u32)> = None;
        for mask in 1u32..(1u32 << n) - 1 {
            let in_test = |i: usize| mask & (1 << i) != 0;
            if !covers(&in_test) {
                continue;
            }
            let count: usize = (0..n).filter(|&i| in_test(i)).map(|i| entries[i].count).sum();
            let dev = (count as f64 - target).abs();
            // higher mask value = later scenarios; prefer it on equal deviation
            let better = match best {
                None => true,
                Some((d, m)) => dev < d || (dev == d && mask > m),
            };
            if better {
                best = Some((dev, mask));
            }
        }
        let (_, mask) = best.ok_or_else(|| {
            ClassifyError::InfeasibleSplit("no scenario assignment places every class on both sides".into())
        })?;
        (0..n).map(|i| mask & (1 << i) != 0).collect()
    } else {
        let mut mask = vec![false; ids.len()];
        let mut count = 0usize;
        for i in (1..ids.len()).rev() {
            if count as f64 >= target {
                break;
            }
            mask[i] = true;
            count += entries[i].count;
        }
        if !covers(&|i| mask[i]) {
            return Err(ClassifyError::InfeasibleSplit("greedy scenario assignment misses a class".into()));
        }
        mask
    };

    let mut plan = SplitPlan { train: BTreeSet::new(), test: BTreeSet::new() };
    for (id, in_test) in ids.iter().zip(test_mask) {
        if in_test {
            plan.test.insert(id.to_string());
        } else {
            plan.train.insert(id.to_string());
        }
    }
    Ok(plan)
}
