//! Turning captions and QA data into instruction samples.

use videoprep::captions::{caption_to_qa, mc_template, TaskType, TemplateSet};
use videoprep::corpus::{Caption, Language};

fn main() {
    let templates = TemplateSet::builtin();

    // A caption becomes a prompt/response pair; the prompt template is a
    // seeded random choice, so the same seed always yields the same sample.
    let caption = Caption::new(
        Language::En,
        "A cyclist rides along a coastal road at sunset, passing fishing boats.",
    );
    for seed in [0, 1, 2] {
        let sample =
            caption_to_qa("vid-42", &caption, TaskType::DetailedDescription, &templates, seed)
                .unwrap();
        println!("seed {seed}: {}", sample.prompt);
    }

    // Multi-choice questions get lettered options and a single-letter answer.
    let options = vec![
        "riding a bicycle".to_string(),
        "rowing a boat".to_string(),
        "driving a car".to_string(),
        "walking a dog".to_string(),
    ];
    let sample = mc_template("vid-42", Language::En, "What is the person doing?", &options, 0)
        .unwrap();
    println!("--- multi-choice prompt ---");
    println!("{}", sample.prompt);
    println!("answer: {}", sample.response);
}
