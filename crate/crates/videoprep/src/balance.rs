//! Category-distribution rebalancing and corpus statistics.
//!
//! Categories holding more than a cap fraction of the corpus are downsampled
//! until each holds strictly less than the cap of the FINAL total. Because
//! removing records shrinks that total, the per-category targets are solved
//! jointly by fixpoint iteration: start from the original total, recompute
//! every exceeding category's largest admissible count, and repeat until the
//! total stops moving (it decreases monotonically, so this converges in a
//! few steps).

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::VideoRecord;

/// Category used when a record carries no category label.
pub const UNKNOWN_CATEGORY: &str = "__unknown__";

/// Exact per-category record counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CategoryHistogram {
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
}

impl CategoryHistogram {
    pub fn share(&self, category: &str) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.counts.get(category).unwrap_or(&0) as f64 / self.total as f64
    }
}

fn category_of(record: &VideoRecord) -> &str {
    if record.category.is_empty() {
        UNKNOWN_CATEGORY
    } else {
        &record.category
    }
}

/// Counts records per category; unlabeled records land in `__unknown__`.
pub fn category_histogram(records: &[VideoRecord]) -> CategoryHistogram {
    let mut histogram = CategoryHistogram::default();
    for record in records {
        *histogram
            .counts
            .entry(category_of(record).to_string())
            .or_insert(0) += 1;
    }
    histogram.total = records.len();
    histogram
}

/// What the balancer did to one over-represented category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryReduction {
    pub category: String,
    pub before: usize,
    pub after: usize,
}

/// Summary of one balancing run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BalanceSummary {
    pub original_total: usize,
    pub final_total: usize,
    pub cap_fraction: f64,
    pub reductions: Vec<CategoryReduction>,
    /// Categories the cap forced all the way to zero.
    pub emptied: Vec<String>,
}

/// Largest count strictly below `cap * total`, never above `available`.
fn cap_target(available: usize, cap: f64, total: usize) -> usize {
    let bound = cap * total as f64;
    let below = (bound.ceil() - 1.0).max(0.0) as usize;
    below.min(available)
}

/// Downsamples categories whose original share exceeds `cap_fraction` so
/// that each ends strictly below the cap of the final total.
///
/// Sampling is uniform without replacement and deterministic under `seed`;
/// the relative order of kept records is preserved, and categories at or
/// below the cap are untouched.
pub fn balance_categories(
    records: Vec<VideoRecord>,
    cap_fraction: f64,
    seed: u64,
) -> (Vec<VideoRecord>, BalanceSummary) {
    assert!(
        cap_fraction > 0.0 && cap_fraction < 1.0,
        "cap fraction must lie in (0, 1)"
    );
    let histogram = category_histogram(&records);
    let original_total = histogram.total;
    let cap_original = cap_fraction * original_total as f64;
    let exceeding: BTreeMap<&str, usize> = histogram
        .counts
        .iter()
        .filter(|(_, &count)| count as f64 > cap_original)
        .map(|(name, &count)| (name.as_str(), count))
        .collect();

    if exceeding.is_empty() {
        let summary = BalanceSummary {
            original_total,
            final_total: original_total,
            cap_fraction,
            reductions: Vec::new(),
            emptied: Vec::new(),
        };
        return (records, summary);
    }

    let untouched_total: usize = histogram
        .counts
        .iter()
        .filter(|(name, _)| !exceeding.contains_key(name.as_str()))
        .map(|(_, &count)| count)
        .sum();

    // Joint fixpoint over the shared final total.
    let mut total = original_total;
    let targets: BTreeMap<&str, usize> = loop {
        let targets: BTreeMap<&str, usize> = exceeding
            .iter()
            .map(|(&name, &count)| (name, cap_target(count, cap_fraction, total)))
            .collect();
        let next = untouched_total + targets.values().sum::<usize>();
        if next == total {
            break targets;
        }
        total = next;
    };

    // Choose which records of each exceeding category survive.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep_indices: BTreeSet<usize> = BTreeSet::new();
    for (index, record) in records.iter().enumerate() {
        if !exceeding.contains_key(category_of(record)) {
            keep_indices.insert(index);
        }
    }
    let mut reductions = Vec::new();
    let mut emptied = Vec::new();
    for (&name, &target) in &targets {
        let positions: Vec<usize> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| category_of(r) == name)
            .map(|(i, _)| i)
            .collect();
        let chosen = rand::seq::index::sample(&mut rng, positions.len(), target);
        for pick in chosen.iter() {
            keep_indices.insert(positions[pick]);
        }
        reductions.push(CategoryReduction {
            category: name.to_string(),
            before: positions.len(),
            after: target,
        });
        if target == 0 {
            emptied.push(name.to_string());
        }
    }

    let kept: Vec<VideoRecord> = records
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep_indices.contains(i))
        .map(|(_, r)| r)
        .collect();
    let summary = BalanceSummary {
        original_total,
        final_total: kept.len(),
        cap_fraction,
        reductions,
        emptied,
    };
    (kept, summary)
}

/// Ready-to-render corpus statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StatsReport {
    pub total_records: usize,
    pub categories: CategoryHistogram,
    /// (upper bound in seconds, count); the last bucket is unbounded.
    pub duration_buckets: Vec<(f64, usize)>,
    pub language_counts: BTreeMap<String, usize>,
    /// Per filter: records whose status says dropped.
    pub filter_drop_counts: BTreeMap<String, usize>,
    /// Highest-share categories, (category, count, share), descending.
    pub top_categories: Vec<(String, usize, f64)>,
}

const DURATION_EDGES_S: [f64; 8] = [5.0, 10.0, 30.0, 60.0, 120.0, 300.0, 600.0, 1800.0];

/// Aggregates category shares, duration histogram, language split, and
/// per-filter drop counts; `top_k` limits the headline category list.
pub fn dataset_report(records: &[VideoRecord], top_k: usize) -> StatsReport {
    let categories = category_histogram(records);
    let mut duration_buckets: Vec<(f64, usize)> =
        DURATION_EDGES_S.iter().map(|&e| (e, 0)).collect();
    duration_buckets.push((f64::INFINITY, 0));
    let mut language_counts = BTreeMap::new();
    let mut filter_drop_counts = BTreeMap::new();
    for record in records {
        let slot = DURATION_EDGES_S
            .iter()
            .position(|&edge| record.duration_s < edge)
            .unwrap_or(DURATION_EDGES_S.len());
        duration_buckets[slot].1 += 1;
        *language_counts
            .entry(record.language.to_string())
            .or_insert(0) += 1;
        for (filter, decision) in &record.filter_status {
            if decision.is_dropped() {
                *filter_drop_counts.entry(filter.clone()).or_insert(0) += 1;
            }
        }
    }
    let mut top_categories: Vec<(String, usize, f64)> = categories
        .counts
        .iter()
        .map(|(name, &count)| (name.clone(), count, categories.share(name)))
        .collect();
    top_categories.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top_categories.truncate(top_k);
    StatsReport {
        total_records: records.len(),
        categories,
        duration_buckets,
        language_counts,
        filter_drop_counts,
        top_categories,
    }
}

impl StatsReport {
    /// Human-readable report body.
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "records: {}", self.total_records).unwrap();
        writeln!(out, "categories: {}", self.categories.counts.len()).unwrap();
        writeln!(out, "top categories:").unwrap();
        for (name, count, share) in &self.top_categories {
            writeln!(out, "  {name}: {count} ({:.2}%)", share * 100.0).unwrap();
        }
        writeln!(out, "languages:").unwrap();
        for (language, count) in &self.language_counts {
            writeln!(out, "  {language}: {count}").unwrap();
        }
        writeln!(out, "durations:").unwrap();
        let mut lower = 0.0;
        for &(upper, count) in &self.duration_buckets {
            if upper.is_finite() {
                writeln!(out, "  [{lower}, {upper}) s: {count}").unwrap();
            } else {
                writeln!(out, "  [{lower}, inf) s: {count}").unwrap();
            }
            lower = upper;
        }
        writeln!(out, "filter drops:").unwrap();
        for (filter, count) in &self.filter_drop_counts {
            writeln!(out, "  {filter}: {count}").unwrap();
        }
        out
    }

    /// Flat tab-separated (category, count, share) table for plotting.
    pub fn category_table(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("category\tcount\tshare\n");
        for (name, &count) in &self.categories.counts {
            writeln!(out, "{name}\t{count}\t{}", self.categories.share(name)).unwrap();
        }
        out
    }
}
