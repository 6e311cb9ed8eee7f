//! Builds an instruction-tuning sequence around encoded ECG tokens and
//! prints its layout and loss mask.
//!
//! cargo run --example assemble

use ecg_byte::sequence::{assemble, loss_mask, SpecialTokens, TrainingRecord, VocabInfo};

fn main() -> ecg_byte::Result<()> {
    let (text, ecg) = (32_000, 3756);
    let vocab = VocabInfo::new(text, ecg, SpecialTokens::after(text, ecg))?;
    println!("special tokens: {:?}", vocab.special.as_array());

    let ecg_ids = [97, 256, 1800, 99];
    let question = [101, 2054, 2003];
    let answer = [3671, 102];
    let layout = assemble(&ecg_ids, &question, &answer, &vocab)?;
    println!("ids: {:?}", layout.ids);
    println!("L = {}, loss_start = {}", layout.total_len, layout.loss_start);
    let mask: String = loss_mask(&layout).iter().map(|&m| if m { '1' } else { '0' }).collect();
    println!("mask: {mask}");

    let rec = TrainingRecord { ids: layout.ids.clone(), loss_start: layout.loss_start, total_len: layout.total_len };
    println!("{}", serde_json::to_string(&rec).expect("serializable"));
    Ok(())
}
