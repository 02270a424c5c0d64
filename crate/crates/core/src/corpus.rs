//! Provider corpora: ingestion validation and on-disk layouts.
//!
//! Two layouts are supported: a directory tree `root/<provider>/*.txt` and a
//! JSONL file of `{"provider", "doc_id", "text"}` objects. Directory loading
//! orders providers and documents lexicographically; JSONL loading preserves
//! first-seen provider order and file order of documents.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{codepoint_label, ProviderId, WatermarkAlphabet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderCorpus {
    pub provider: ProviderId,
    pub documents: Vec<Document>,
}

impl ProviderCorpus {
    /// Rejects documents that already contain watermark alphabet codepoints.
    pub fn validate(&self, alphabet: &WatermarkAlphabet) -> Result<()> {
        for doc in &self.documents {
            if let Some(c) = doc.text.chars().find(|&c| alphabet.contains(c)) {
                return Err(Error::AlphabetInInput {
                    provider: self.provider.0.clone(),
                    doc_id: doc.doc_id.clone(),
                    code: codepoint_label(c),
                });
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct JsonlDoc {
    provider: String,
    doc_id: String,
    text: String,
}

/// Loads `root/<provider>/*.txt`, providers and files in lexicographic order.
pub fn load_corpus_dir(root: &Path) -> Result<Vec<ProviderCorpus>> {
    let mut providers: Vec<String> = Vec::new();
    for entry in fs::read_dir(root).map_err(Error::io(root))? {
        let entry = entry.map_err(Error::io(root))?;
        if entry.path().is_dir() {
            providers.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    providers.sort();
    if providers.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut corpora = Vec::with_capacity(providers.len());
    for name in providers {
        let dir = root.join(&name);
        let mut files: Vec<_> = fs::read_dir(&dir)
            .map_err(Error::io(&dir))?
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(Error::io(&dir))?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        files.sort();
        let mut documents = Vec::with_capacity(files.len());
        for path in files {
            let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
            let doc_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            documents.push(Document { doc_id, text });
        }
        corpora.push(ProviderCorpus {
            provider: ProviderId(name),
            documents,
        });
    }
    Ok(corpora)
}

/// Loads a JSONL corpus; provider order is first-seen.
pub fn load_corpus_jsonl(path: &Path) -> Result<Vec<ProviderCorpus>> {
    let file = fs::File::open(path).map_err(Error::io(path))?;
    let mut corpora: Vec<ProviderCorpus> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: JsonlDoc = serde_json::from_str(&line)
            .map_err(|e| Error::format("corpus jsonl", format!("line {}: {e}", lineno + 1)))?;
        let provider = ProviderId(doc.provider);
        let document = Document {
            doc_id: doc.doc_id,
            text: doc.text,
        };
        match corpora.iter_mut().find(|c| c.provider == provider) {
            Some(c) => c.documents.push(document),
            None => corpora.push(ProviderCorpus {
                provider,
                documents: vec![document],
            }),
        }
    }
    if corpora.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(corpora)
}

/// Dispatches on path kind: directory layout or JSONL file.
pub fn load_corpus(path: &Path) -> Result<Vec<ProviderCorpus>> {
    if path.is_dir() {
        load_corpus_dir(path)
    } else {
        load_corpus_jsonl(path)
    }
}

/// Writes the directory layout `root/<provider>/<doc_id>.txt`.
pub fn save_corpus_dir(corpora: &[ProviderCorpus], root: &Path) -> Result<()> {
    for corpus in corpora {
        let dir = root.join(corpus.provider.as_str());
        fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        for doc in &corpus.documents {
            let path = dir.join(format!("{}.txt", doc.doc_id));
            let mut f = fs::File::create(&path).map_err(Error::io(&path))?;
            f.write_all(doc.text.as_bytes()).map_err(Error::io(&path))?;
        }
    }
    Ok(())
}
