pub mod ablate;
pub mod bench;
pub mod encode;
pub mod eval;
pub mod grid;
pub mod split;
pub mod synth;
pub mod train;

use std::path::Path;

use anyhow::{Context, Result};
use spdkit::dataio::{read_dataset, read_text_dataset, LabeledSpdDataset};
use spdkit::iddl::{read_model, IddlModel};

/// Reads a binary dataset, or a text dataset when the path ends in `.txt`
/// or `.csv`.
pub fn load_dataset(path: &Path) -> Result<LabeledSpdDataset> {
    let text = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("txt") | Some("csv")
    );
    let data = if text { read_text_dataset(path) } else { read_dataset(path) };
    data.with_context(|| format!("reading dataset {}", path.display()))
}

pub fn load_model(path: &Path) -> Result<IddlModel> {
    read_model(path).with_context(|| format!("reading model {}", path.display()))
}
