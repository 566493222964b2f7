//! Caption redundancy refinement and instruction-sample templating.
//!
//! Captions synthesized sentence-by-sentence often repeat themselves; the
//! redundancy score of a caption is the maximum word-set IoU over all
//! sentence pairs, and records whose score exceeds a threshold are dropped.
//! English sentences tokenize into lowercased words; Chinese sentences use
//! overlapping character bigrams so no lexicon is needed. The segmenter is
//! a single function boundary, so a dictionary-based one can be swapped in.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Caption, FilterDecision, Language, VideoRecord};
use crate::error::{Error, Result};

/// Sentence terminators for both languages.
const TERMINALS: [char; 6] = ['.', '!', '?', '。', '！', '？'];

/// Splits text on terminal punctuation, trimming whitespace and dropping
/// empty pieces. Both languages share the same terminal set.
pub fn split_sentences(text: &str, _language: Language) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut buf = String::new();
    for ch in text.chars() {
        if TERMINALS.contains(&ch) {
            let s = buf.trim();
            if !s.is_empty() {
                sentences.push(s.to_string());
            }
            buf.clear();
        } else {
            buf.push(ch);
        }
    }
    let s = buf.trim();
    if !s.is_empty() {
        sentences.push(s.to_string());
    }
    sentences
}

/// Deduplicated token set of one sentence.
///
/// English: lowercased runs of alphanumeric characters. Chinese: overlapping
/// character bigrams over the cleaned text (a single character when only one
/// remains), which keeps repeated sentences at IoU 1.0 without a dictionary.
pub fn word_set(sentence: &str, language: Language) -> BTreeSet<String> {
    match language {
        Language::En => sentence
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect(),
        Language::Zh => {
            let chars: Vec<char> = sentence
                .chars()
                .filter(|c| c.is_alphanumeric())
                .collect();
            match chars.len() {
                0 => BTreeSet::new(),
                1 => std::iter::once(chars[0].to_string()).collect(),
                _ => chars
                    .windows(2)
                    .map(|pair| pair.iter().collect::<String>())
                    .collect(),
            }
        }
    }
}

/// One sentence with its derived word set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSet {
    pub sentence_text: String,
    pub words: BTreeSet<String>,
}

impl SentenceSet {
    pub fn new(sentence: impl Into<String>, language: Language) -> Self {
        let sentence_text = sentence.into();
        let words = word_set(&sentence_text, language);
        SentenceSet {
            sentence_text,
            words,
        }
    }
}

/// Word-set intersection over union; symmetric, 0 when both sets are empty.
pub fn sentence_pair_iou(a: &SentenceSet, b: &SentenceSet) -> f64 {
    let union = a.words.union(&b.words).count();
    if union == 0 {
        return 0.0;
    }
    let inter = a.words.intersection(&b.words).count();
    inter as f64 / union as f64
}

/// Maximum pairwise sentence IoU of a caption; single-sentence captions
/// score 0. Also fills the caption's derived `sentences`.
pub fn caption_redundancy(caption: &mut Caption, language: Language) -> f64 {
    caption.sentences = split_sentences(&caption.text, language);
    let sets: Vec<SentenceSet> = caption
        .sentences
        .iter()
        .map(|s| SentenceSet::new(s.clone(), language))
        .collect();
    let mut max = 0.0f64;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            max = max.max(sentence_pair_iou(&sets[i], &sets[j]));
        }
    }
    max
}

/// Redundancy of a whole record: worst caption wins.
pub fn record_redundancy(record: &mut VideoRecord) -> f64 {
    let mut max = 0.0f64;
    for caption in &mut record.captions {
        let language = caption.language;
        max = max.max(caption_redundancy(caption, language));
    }
    max
}

/// Kept and dropped halves of a filter stage.
#[derive(Debug, Clone, Default)]
pub struct FilterSplit {
    pub kept: Vec<VideoRecord>,
    pub dropped: Vec<VideoRecord>,
}

/// Drops records whose caption redundancy strictly exceeds `threshold` and
/// stamps `caption_redundancy` into every record's filter status.
pub fn refine_captions(records: Vec<VideoRecord>, threshold: f64) -> FilterSplit {
    let mut split = FilterSplit::default();
    for mut record in records {
        let score = record_redundancy(&mut record);
        if score > threshold {
            record.set_filter("caption_redundancy", FilterDecision::dropped(score));
            split.dropped.push(record);
        } else {
            record.set_filter("caption_redundancy", FilterDecision::kept(score));
            split.kept.push(record);
        }
    }
    split
}

/// Instruction-tuning task types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    ShortCaption,
    DetailedDescription,
    McVqa,
    OeVqa,
    SingleRound,
    MultiRound,
}

impl TaskType {
    pub const ALL: [TaskType; 6] = [
        TaskType::ShortCaption,
        TaskType::DetailedDescription,
        TaskType::McVqa,
        TaskType::OeVqa,
        TaskType::SingleRound,
        TaskType::MultiRound,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskType::ShortCaption => "short_caption",
            TaskType::DetailedDescription => "detailed_description",
            TaskType::McVqa => "mc_vqa",
            TaskType::OeVqa => "oe_vqa",
            TaskType::SingleRound => "single_round",
            TaskType::MultiRound => "multi_round",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One training sample: a prompt/response pair bound to a video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionSample {
    pub task_type: TaskType,
    pub prompt: String,
    pub response: String,
    pub video_id: String,
    pub language: Language,
}

/// Prompt templates per task type, loadable from a JSON file mapping
/// task type to a list of template strings. VQA templates carry a
/// `{question}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub templates: BTreeMap<TaskType, Vec<String>>,
}

impl TemplateSet {
    /// Built-in prompts used when no template file is configured.
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        templates.insert(
            TaskType::ShortCaption,
            vec![
                "Describe the video briefly.".to_string(),
                "Give a short caption for this video.".to_string(),
                "Summarize the video in one sentence.".to_string(),
            ],
        );
        templates.insert(
            TaskType::DetailedDescription,
            vec![
                "Describe the video in detail.".to_string(),
                "Provide a thorough description of everything happening in the video.".to_string(),
                "Walk through the contents of this video step by step.".to_string(),
            ],
        );
        templates.insert(
            TaskType::OeVqa,
            vec![
                "Watch the video and answer: {question}".to_string(),
                "{question} Answer based on the video.".to_string(),
            ],
        );
        templates.insert(
            TaskType::McVqa,
            vec!["{question}\nAnswer with the letter of the correct option.".to_string()],
        );
        TemplateSet { templates }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let templates: BTreeMap<TaskType, Vec<String>> = serde_json::from_str(&body)?;
        Ok(TemplateSet { templates })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(&self.templates)?;
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    fn pick(&self, task_type: TaskType, seed: u64) -> Result<&str> {
        let list = self
            .templates
            .get(&task_type)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Error::MissingTemplates(task_type.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(&list[rng.random_range(0..list.len())])
    }
}

/// Converts a caption into a prompt/response sample, choosing the prompt
/// template deterministically from `seed`.
pub fn caption_to_qa(
    video_id: &str,
    caption: &Caption,
    task_type: TaskType,
    templates: &TemplateSet,
    seed: u64,
) -> Result<InstructionSample> {
    let prompt = templates.pick(task_type, seed)?.to_string();
    Ok(InstructionSample {
        task_type,
        prompt,
        response: caption.text.clone(),
        video_id: video_id.to_string(),
        language: caption.language,
    })
}

/// Substitutes the question into a VQA template.
pub fn apply_question_template(template: &str, question: &str) -> String {
    template.replace("{question}", question)
}

/// Builds a multi-choice sample: options are labeled (A), (B), ... in order
/// and the response is exactly the correct option's letter.
pub fn mc_template(
    video_id: &str,
    language: Language,
    question: &str,
    options: &[String],
    answer_index: usize,
) -> Result<InstructionSample> {
    if options.len() < 2 || options.len() > 26 {
        return Err(Error::InvalidArgument(format!(
            "multi-choice needs 2..=26 options, got {}",
            options.len()
        )));
    }
    if answer_index >= options.len() {
        return Err(Error::InvalidArgument(format!(
            "answer index {answer_index} out of range for {} options",
            options.len()
        )));
    }
    let mut prompt = String::from(question);
    for (i, option) in options.iter().enumerate() {
        let letter = (b'A' + i as u8) as char;
        prompt.push_str(&format!("\n({letter}) {option}"));
    }
    prompt.push_str("\nAnswer with the letter of the correct option.");
    let response = ((b'A' + answer_index as u8) as char).to_string();
    Ok(InstructionSample {
        task_type: TaskType::McVqa,
        prompt,
        response,
        video_id: video_id.to_string(),
        language,
    })
}

/// Writes instruction samples in the manifest line format.
pub fn write_samples(path: &Path, samples: &[InstructionSample]) -> Result<()> {
    use std::io::Write;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for sample in samples {
        serde_json::to_writer(&mut w, sample)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Reads an instruction-sample manifest.
pub fn load_samples(path: &Path) -> Result<Vec<InstructionSample>> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    body.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
