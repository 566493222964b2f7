//! Per-stage token budgets and the interleaved sequence layout.

use videoprep::sampler::{concat_layout, token_budget, StageConfig, StageName};

fn main() {
    println!(
        "{:<12} {:>7} {:>7} {:>8} {:>8} {:>8} {:>8}",
        "stage", "frames", "sep", "visual", "text", "total", "budget"
    );
    for name in StageName::ALL {
        let cfg = StageConfig::builtin(name);
        let frames = cfg.max_frames;
        let text = 128;
        match token_budget(&cfg, frames, text) {
            Ok(account) => println!(
                "{:<12} {:>7} {:>7} {:>8} {:>8} {:>8} {:>8}",
                name.to_string(),
                frames,
                account.separator_tokens,
                account.visual_tokens,
                account.text_tokens,
                account.total,
                cfg.llm_budget_tokens
            ),
            Err(rejection) => println!("{:<12} rejected: {rejection}", name.to_string()),
        }
    }

    // Rejections name the violating term.
    let instruct = StageConfig::builtin(StageName::Instruct);
    match token_budget(&instruct, 64, 4000) {
        Err(rejection) => println!("\n64 frames + 4000 text tokens -> {rejection}"),
        Ok(_) => unreachable!(),
    }

    // Each frame block is preceded by its separator tokens in the final
    // sequence, frames in timestamp order.
    let layout = concat_layout(3, 4, 1);
    println!(
        "\nlayout for 3 frames x 4 tokens + 1 separator each: len {}, separators at {:?}",
        layout.total_len, layout.separator_positions
    );
}
