//! Exact union area of overlapping boxes, the core of the coverage filters.

use videoprep::corpus::Rect;
use videoprep::coverage::union_area;

fn main() {
    let boxes = vec![
        Rect::new(0.0, 0.0, 10.0, 10.0).unwrap(),
        Rect::new(5.0, 5.0, 15.0, 15.0).unwrap(),
        Rect::new(20.0, 0.0, 30.0, 5.0).unwrap(),
    ];
    for b in &boxes {
        println!("box ({:>4}, {:>4}) -> ({:>4}, {:>4})  area {}", b.x0, b.y0, b.x1, b.y1, b.area());
    }

    let union = union_area(&boxes);
    let sum: f64 = boxes.iter().map(Rect::area).sum();
    println!("sum of areas : {sum}");
    println!("union area   : {union} (overlap removed exactly)");

    // The first two boxes overlap in a 5x5 square; the third is disjoint.
    assert_eq!(union, 100.0 + 100.0 - 25.0 + 50.0);

    // Order and duplicates never matter.
    let mut shuffled = boxes.clone();
    shuffled.reverse();
    shuffled.push(boxes[0]);
    assert_eq!(union_area(&shuffled), union);
    println!("order/duplicate invariance holds");
}
