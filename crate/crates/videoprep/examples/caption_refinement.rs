//! Sentence-pair IoU and redundancy-based caption refinement.

use videoprep::captions::{
    caption_redundancy, refine_captions, sentence_pair_iou, SentenceSet,
};
use videoprep::corpus::{Caption, Language, VideoRecord};

fn main() {
    // Word-set IoU between two sentences.
    let a = SentenceSet::new("the cat sits on the mat", Language::En);
    let b = SentenceSet::new("the dog sits on the rug", Language::En);
    println!("IoU(en pair) = {:.3}", sentence_pair_iou(&a, &b));

    // Chinese sentences compare through overlapping character bigrams.
    let c = SentenceSet::new("狗在院子里跑", Language::Zh);
    let d = SentenceSet::new("狗在院子里睡觉", Language::Zh);
    println!("IoU(zh pair) = {:.3}", sentence_pair_iou(&c, &d));

    // Caption redundancy is the worst pair among its sentences.
    let mut caption = Caption::new(
        Language::En,
        "A chef dices onions on a wooden board. The pan sizzles on the stove. \
         A chef dices onions on a wooden board.",
    );
    let score = caption_redundancy(&mut caption, Language::En);
    println!("redundancy = {score:.3} over {} sentences", caption.sentences.len());

    // Refinement drops records whose redundancy exceeds the threshold.
    let make = |id: &str, text: &str| VideoRecord {
        id: id.to_string(),
        media_path: String::new(),
        duration_s: 12.0,
        fps: 25.0,
        width: 640,
        height: 360,
        category: "cooking".to_string(),
        language: Language::En,
        source: "example".to_string(),
        captions: vec![Caption::new(Language::En, text)],
        filter_status: Default::default(),
    };
    let records = vec![
        make("varied", "A chef dices onions. Steam rises from the pan. Plates wait nearby."),
        make("loopy", "The mixer spins the batter. The mixer spins the batter."),
    ];
    let split = refine_captions(records, 0.5);
    for r in &split.kept {
        println!("kept    {} (score {:.2})", r.id, r.filter_status["caption_redundancy"].score);
    }
    for r in &split.dropped {
        println!("dropped {} (score {:.2})", r.id, r.filter_status["caption_redundancy"].score);
    }
}
