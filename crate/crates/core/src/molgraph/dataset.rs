//! Molecule list files: one `[name<TAB>]SMILES` record per line, `#` comments.

use thiserror::Error;

use super::{parse_smiles, MolError, MolGraph};

#[derive(Debug, Error)]
#[error("line {line}: {source}")]
pub struct DatasetError {
    pub line: usize,
    #[source]
    pub source: MolError,
}

#[derive(Debug, Clone)]
pub struct Record {
    pub name: Option<String>,
    pub smiles: String,
    pub mol: MolGraph,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn molecules(&self) -> Vec<MolGraph> {
        self.records.iter().map(|r| r.mol.clone()).collect()
    }
}

/// Ids accepted by [`builtin_dataset`].
pub const BUILTIN_DATASETS: [&str; 3] = ["isocyanates", "acrylates", "chain_extenders"];

/// Raw text of a bundled dataset.
pub fn builtin_text(id: &str) -> Option<&'static str> {
    match id {
        "isocyanates" => Some(include_str!("../../data/isocyanates.smi")),
        "acrylates" => Some(include_str!("../../data/acrylates.smi")),
        "chain_extenders" => Some(include_str!("../../data/chain_extenders.smi")),
        _ => None,
    }
}

/// One of the bundled monomer datasets.
pub fn builtin_dataset(id: &str) -> Option<Dataset> {
    let text = builtin_text(id)?;
    Some(parse_dataset(id, text).expect("bundled datasets parse"))
}

pub fn parse_dataset(name: &str, text: &str) -> Result<Dataset, DatasetError> {
    let mut records = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, smiles) = match line.rsplit_once('\t') {
            Some((n, s)) => (Some(n.trim().to_string()).filter(|n| !n.is_empty()), s.trim()),
            None => (None, line.trim()),
        };
        let mol = parse_smiles(smiles).map_err(|source| DatasetError { line: k + 1, source })?;
        records.push(Record {
            name,
            smiles: smiles.to_string(),
            mol,
        });
    }
    Ok(Dataset {
        name: name.to_string(),
        records,
    })
}
