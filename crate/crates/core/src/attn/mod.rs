//! Entity-attention analysis over standardized attention dumps, and the
//! token-overlap similarity between task contexts.
//!
//! The entity score of one layer is the attention mass on the name span
//! (summed over span positions), so a span covering a whole normalized row
//! scores 1. Window scores average the per-layer scores.

mod dump;
mod similarity;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, Scalar};

pub use dump::{AttentionDump, DumpInstance, DumpMeta, BLOB_FILE, DUMP_FORMAT_VERSION, META_FILE, ROW_SUM_TOLERANCE};
pub use similarity::{
    context_similarity, corpus_similarity, group_similarity, tokenize, SimilarityReport, SIMILARITY_GROUPS,
};

/// Inclusive, 0-based layer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerWindow {
    pub lo: usize,
    pub hi: usize,
}

impl Default for LayerWindow {
    fn default() -> Self {
        Self { lo: 12, hi: 24 }
    }
}

impl LayerWindow {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo > hi {
            return Err(Error::Range(format!("layer window {lo}:{hi} is empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, n_layers: usize) -> Result<()> {
        if self.lo > self.hi || self.hi >= n_layers {
            return Err(Error::Range(format!(
                "layer window {self} outside a {n_layers}-layer dump"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for LayerWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for LayerWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Range(format!("layer window `{s}` is not LO:HI"));
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        Self::new(lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?)
    }
}

fn layer_scores<T: Scalar>(dump: &AttentionDump, inst: &DumpInstance) -> Vec<T> {
    let (start, end) = inst.name_span;
    (0..dump.n_layers())
        .map(|l| dump.row(inst, l)[start..end].iter().map(|&v| T::from_f32_value(v)).sum())
        .collect()
}

/// Mean over the window of the per-layer attention mass on the name span.
pub fn entity_attention<T: Scalar>(dump: &AttentionDump, sample_id: &str, window: LayerWindow) -> Result<T> {
    window.check(dump.n_layers())?;
    let inst = dump.instance(sample_id)?;
    let scores = layer_scores::<T>(dump, inst);
    Ok(mean(&scores[window.lo..=window.hi]).expect("window is non-empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerStats<T> {
    pub layer: usize,
    pub mean: T,
    /// Population standard deviation over instances.
    pub std: T,
}

/// Per-layer mean and standard deviation of the entity score across all
/// instances.
pub fn layer_profile<T: Scalar>(dump: &AttentionDump) -> Result<Vec<LayerStats<T>>> {
    let n = dump.meta.instances.len();
    if n == 0 {
        return Err(Error::Empty("attention dump has no instances".into()));
    }
    let per_inst: Vec<Vec<T>> = dump.meta.instances.iter().map(|i| layer_scores(dump, i)).collect();
    Ok((0..dump.n_layers())
        .map(|layer| {
            let xs: Vec<T> = per_inst.iter().map(|s| s[layer]).collect();
            let m = mean(&xs).expect("non-empty");
            let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::count(n);
            LayerStats {
                layer,
                mean: m,
                std: var.sqrt(),
            }
        })
        .collect())
}

/// Longest contiguous run of layers whose mean reaches
/// `threshold_fraction × max`; among equally long runs the latest wins.
pub fn select_window<T: Scalar>(profile: &[T], threshold_fraction: T) -> Result<LayerWindow> {
    let max = profile
        .iter()
        .copied()
        .reduce(T::max)
        .ok_or_else(|| Error::Empty("empty layer profile".into()))?;
    let cut = threshold_fraction * max;
    let mut best: Option<LayerWindow> = None;
    let mut start = None;
    for (i, &v) in profile.iter().enumerate() {
        if v >= cut {
            let lo = *start.get_or_insert(i);
            let run = LayerWindow { lo, hi: i };
            if best.is_none_or(|b| run.len() >= b.len()) {
                best = Some(run);
            }
        } else {
            start = None;
        }
    }
    // With threshold > 1 and a positive max no layer qualifies; fall back
    // to the (latest) argmax layer.
    Ok(best.unwrap_or_else(|| {
        let i = profile.iter().rposition(|&v| v == max).unwrap_or(0);
        LayerWindow { lo: i, hi: i }
    }))
}

/// `100 · (mean_variant − mean_baseline) / mean_baseline` over the shared
/// instances; both dumps must hold the same sample ids.
pub fn relative_attention_change<T: Scalar>(
    variant: &AttentionDump,
    baseline: &AttentionDump,
    window: LayerWindow,
) -> Result<T> {
    let ids = |d: &AttentionDump| -> BTreeSet<String> { d.meta.instances.iter().map(|i| i.sample_id.clone()).collect() };
    let (v_ids, b_ids) = (ids(variant), ids(baseline));
    if v_ids != b_ids {
        let diff: Vec<&String> = v_ids.symmetric_difference(&b_ids).take(5).collect();
        return Err(Error::IdMismatch(format!(
            "dumps cover different samples (e.g. {diff:?})"
        )));
    }
    if b_ids.is_empty() {
        return Err(Error::Empty("attention dumps have no instances".into()));
    }
    let avg = |d: &AttentionDump| -> Result<T> {
        let xs = b_ids
            .iter()
            .map(|id| entity_attention::<T>(d, id, window))
            .collect::<Result<Vec<T>>>()?;
        Ok(mean(&xs).expect("non-empty"))
    };
    let (mv, mb) = (avg(variant)?, avg(baseline)?);
    if mb == T::zero() {
        return Err(Error::Domain("baseline entity attention is zero".into()));
    }
    Ok(T::lit(100.0) * (mv - mb) / mb)
}
