use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DatasetBundle, Label, Split};
use crate::error::{Error, Result};
use crate::metrics::krippendorff_alpha;
use crate::seed;

/// Lowest and highest raw ConvAbuse severity codes.
pub const CONVABUSE_RAW_RANGE: (i32, i32) = (-3, 1);

/// Map a raw ConvAbuse severity code to a binary label: 1 (abusive) iff
/// `raw < threshold`.
pub fn binarize_convabuse(raw: i32, threshold: i32) -> Result<Label> {
    let (lo, hi) = CONVABUSE_RAW_RANGE;
    if !(lo..=hi).contains(&raw) {
        return Err(Error::Range(format!("raw ConvAbuse label {raw} outside [{lo}, {hi}]")));
    }
    Ok(u8::from(raw < threshold))
}

pub fn binarize_convabuse_default(raw: i32) -> Result<Label> {
    binarize_convabuse(raw, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_annotators: usize,
    pub num_instances: usize,
    pub n_mean: f64,
    pub n_std: f64,
    pub ai_mean: f64,
    pub ai_std: f64,
    pub alpha: f64,
}

fn mean_std(counts: &[usize]) -> (f64, f64) {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Descriptive statistics of a bundle. Standard deviations are population
/// (divide by n) over all declared annotators / instances.
pub fn compute_stats(bundle: &DatasetBundle) -> Result<DatasetStats> {
    let m = bundle.matrix();
    if m.num_annotators() < 2 {
        return Err(Error::DegenerateData(format!("{} annotator(s); need at least 2", m.num_annotators())));
    }
    if m.num_instances() == 0 {
        return Err(Error::DegenerateData("no instances".into()));
    }
    let (n_mean, n_std) = mean_std(&m.annotations_per_annotator());
    let (ai_mean, ai_std) = mean_std(&m.annotations_per_instance());
    let alpha = krippendorff_alpha(m)?;
    Ok(DatasetStats {
        num_annotators: m.num_annotators(),
        num_instances: m.num_instances(),
        n_mean,
        n_std,
        ai_mean,
        ai_std,
        alpha,
    })
}

/// Rows of `dataset,num_annotators,num_instances,n_mean,n_std,ai_mean,ai_std,alpha`.
/// An undefined alpha is written as an empty cell.
pub fn write_stats_csv<W: Write>(rows: &[(String, Option<DatasetStats>)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["dataset", "num_annotators", "num_instances", "n_mean", "n_std", "ai_mean", "ai_std", "alpha"])?;
    for (name, stats) in rows {
        match stats {
            Some(s) => w.write_record([
                name.clone(),
                s.num_annotators.to_string(),
                s.num_instances.to_string(),
                format!("{:.2}", s.n_mean),
                format!("{:.2}", s.n_std),
                format!("{:.2}", s.ai_mean),
                format!("{:.2}", s.ai_std),
                if s.alpha.is_finite() { format!("{:.6}", s.alpha) } else { String::new() },
            ])?,
            None => w.write_record([name.as_str(), "", "", "", "", "", "", ""])?,
        }
    }
    w.flush().map_err(|e| Error::io("<stats>", e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let r = Self { train, dev, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.dev, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Ratio(format!("ratios must be non-negative, got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Ratio(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Per-split counts for `n` items by the largest-remainder rule; ties
    /// go to the earlier split.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train * n as f64, self.dev * n as f64, self.test * n as f64];
        let mut counts = quotas.map(|q| q.floor() as usize);
        let assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for &k in order.iter().take(n.saturating_sub(assigned)) {
            counts[k] += 1;
        }
        counts
    }
}

/// Tag every instance with a split. Deterministic for a fixed seed.
pub fn assign_splits(bundle: &DatasetBundle, ratios: SplitRatios, seed_value: u64) -> Result<DatasetBundle> {
    ratios.validate()?;
    let n = bundle.instances().len();
    let [n_train, n_dev, _] = ratios.counts(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::substream(seed_value, &["assign_splits"])));
    let mut splits = BTreeMap::new();
    for (rank, &idx) in order.iter().enumerate() {
        let split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_dev {
            Split::Dev
        } else {
            Split::Test
        };
        splits.insert(bundle.instances()[idx].instance_id.clone(), split);
    }
    bundle.with_splits(splits)
}
