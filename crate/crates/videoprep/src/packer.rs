//! Sequence packing: aggregate variable-length samples into composite
//! training instances under a token budget.
//!
//! First-fit decreasing keeps the plan deterministic and near-optimal
//! without padding every sequence to a common length. Samples are never
//! split across composites; segments inside a composite are isolated by a
//! block-diagonal causal attention mask, emitted as interval descriptors
//! rather than dense matrices.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One packed sample inside a composite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedSample {
    pub sample_id: String,
    pub length: u64,
}

/// An ordered group of samples sharing one training sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composite {
    pub entries: Vec<PackedSample>,
}

impl Composite {
    pub fn total_len(&self) -> u64 {
        self.entries.iter().map(|e| e.length).sum()
    }
}

/// Assignment of every input sample to exactly one composite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackingPlan {
    pub composites: Vec<Composite>,
    pub budget: u64,
}

/// Packs samples first-fit over descending length; equal lengths tie-break
/// by sample id so the plan is deterministic.
pub fn pack_sequences(lengths: &[(String, u64)], budget: u64) -> Result<PackingPlan> {
    for (sample_id, length) in lengths {
        if *length == 0 {
            return Err(Error::InvalidArgument(format!(
                "sample {sample_id:?} has zero length"
            )));
        }
        if *length > budget {
            return Err(Error::OversizedSample {
                sample_id: sample_id.clone(),
                length: *length,
                budget,
            });
        }
    }
    let mut order: Vec<&(String, u64)> = lengths.iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut composites: Vec<Composite> = Vec::new();
    let mut remaining: Vec<u64> = Vec::new();
    for (sample_id, length) in order {
        let entry = PackedSample {
            sample_id: sample_id.clone(),
            length: *length,
        };
        match remaining.iter().position(|&room| room >= *length) {
            Some(i) => {
                composites[i].entries.push(entry);
                remaining[i] -= *length;
            }
            None => {
                composites.push(Composite {
                    entries: vec![entry],
                });
                remaining.push(budget - *length);
            }
        }
    }
    Ok(PackingPlan { composites, budget })
}

/// Block-diagonal causal mask in interval form: position `i` may attend to
/// `j` iff both lie in the same segment and `j <= i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskDescriptor {
    pub total_len: u64,
    /// Half-open, disjoint, ordered, covering `[0, total_len)`.
    pub segment_bounds: Vec<(u64, u64)>,
}

impl MaskDescriptor {
    pub fn allows(&self, i: u64, j: u64) -> bool {
        if j > i || i >= self.total_len {
            return false;
        }
        self.segment_bounds
            .iter()
            .any(|&(start, end)| start <= j && i < end)
    }

    /// Number of allowed (query, key) pairs: one lower triangle per segment.
    pub fn allowed_pairs(&self) -> u64 {
        self.segment_bounds
            .iter()
            .map(|&(start, end)| {
                let len = end - start;
                len * (len + 1) / 2
            })
            .sum()
    }
}

/// Mask descriptor for one composite's segment layout.
pub fn build_mask(composite: &Composite) -> MaskDescriptor {
    let mut segment_bounds = Vec::with_capacity(composite.entries.len());
    let mut cursor = 0u64;
    for entry in &composite.entries {
        segment_bounds.push((cursor, cursor + entry.length));
        cursor += entry.length;
    }
    MaskDescriptor {
        total_len: cursor,
        segment_bounds,
    }
}

/// Fraction of reserved context actually used: summed lengths over
/// composites times budget. An empty plan is vacuously fully used.
pub fn utilization(plan: &PackingPlan) -> f64 {
    if plan.composites.is_empty() {
        return 1.0;
    }
    let used: u64 = plan.composites.iter().map(Composite::total_len).sum();
    used as f64 / (plan.composites.len() as u64 * plan.budget) as f64
}

/// One plan line in the manifest format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanLine {
    pub composite_id: u64,
    pub sample_ids: Vec<String>,
    pub lengths: Vec<u64>,
    pub segment_bounds: Vec<(u64, u64)>,
}

/// Writes the plan as manifest lines: composite id, ordered sample ids,
/// lengths, segment bounds.
pub fn write_plan(path: &Path, plan: &PackingPlan) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for (composite_id, composite) in plan.composites.iter().enumerate() {
        let mask = build_mask(composite);
        let line = PlanLine {
            composite_id: composite_id as u64,
            sample_ids: composite
                .entries
                .iter()
                .map(|e| e.sample_id.clone())
                .collect(),
            lengths: composite.entries.iter().map(|e| e.length).collect(),
            segment_bounds: mask.segment_bounds,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
