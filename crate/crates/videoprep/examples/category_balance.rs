//! Category rebalancing: cap over-represented categories below a share of
//! the final corpus.

use videoprep::balance::{balance_categories, category_histogram, dataset_report};
use videoprep::corpus::{Caption, Language, VideoRecord};

fn record(id: String, category: &str) -> VideoRecord {
    VideoRecord {
        id,
        media_path: String::new(),
        duration_s: 15.0,
        fps: 25.0,
        width: 640,
        height: 360,
        category: category.to_string(),
        language: Language::En,
        source: "example".to_string(),
        captions: vec![Caption::new(Language::En, "A clip.")],
        filter_status: Default::default(),
    }
}

fn main() {
    // One category holds half the corpus; one hundred others hold five
    // records each.
    let mut records = Vec::new();
    for i in 0..500 {
        records.push(record(format!("big-{i:03}"), "gaming"));
    }
    for c in 0..100 {
        for i in 0..5 {
            records.push(record(format!("tail-{c:02}-{i}"), &format!("niche-{c:02}")));
        }
    }
    let before = category_histogram(&records);
    println!(
        "before: {} records, gaming share {:.1}%",
        before.total,
        before.share("gaming") * 100.0
    );

    // Cap every category below 1% of the final corpus. The target count is
    // solved against the shrunken total, so gaming lands at 5 of 505.
    let (kept, summary) = balance_categories(records, 0.01, 7);
    let after = category_histogram(&kept);
    println!(
        "after : {} records, gaming share {:.3}% ({} kept)",
        after.total,
        after.share("gaming") * 100.0,
        after.counts["gaming"]
    );
    for reduction in &summary.reductions {
        println!("reduced {}: {} -> {}", reduction.category, reduction.before, reduction.after);
    }

    let report = dataset_report(&kept, 5);
    print!("{}", report.render_text());
}
