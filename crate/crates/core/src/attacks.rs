//! Adversarial edits of watermarked text, plus the regeneration defense.
//!
//! Watermark-family attacks touch only the invisible codepoints; word- and
//! character-family attacks touch only the visible text, with every
//! watermark run preserved in content and order. All attacks are
//! deterministic per seed.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::enforce_watermark;
use crate::marking::strip_watermarks;
use crate::model::WasaModel;
use crate::registry::{Watermark, WatermarkAlphabet};
use crate::seed::rng_for;
use crate::tokenizer::Vocab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackTarget {
    GeneratedText,
    Prompt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    WatermarkRemove,
    WatermarkModify,
    WordInsertLocalized,
    WordInsertDispersed,
    WordDelete,
    WordSynonym,
    CharInsert,
    CharDelete,
    CharSwap,
}

impl AttackKind {
    pub fn family(&self) -> &'static str {
        match self {
            Self::WatermarkRemove | Self::WatermarkModify => "watermark",
            Self::WordInsertLocalized | Self::WordInsertDispersed | Self::WordDelete | Self::WordSynonym => "word",
            Self::CharInsert | Self::CharDelete | Self::CharSwap => "char",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::WatermarkRemove => "watermark-remove",
            Self::WatermarkModify => "watermark-modify",
            Self::WordInsertLocalized => "word-insert-localized",
            Self::WordInsertDispersed => "word-insert-dispersed",
            Self::WordDelete => "word-delete",
            Self::WordSynonym => "word-synonym",
            Self::CharInsert => "char-insert",
            Self::CharDelete => "char-delete",
            Self::CharSwap => "char-swap",
        }
    }
}

/// Attack description as accepted on the command line and in JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackSpec {
    pub target: AttackTarget,
    pub family: String,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submode: Option<String>,
    #[serde(default)]
    pub strength: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
}

impl AttackSpec {
    pub fn kind(&self) -> Result<AttackKind> {
        let bad = || {
            Error::InvalidConfig(format!(
                "unknown attack family/mode `{}`/`{}`",
                self.family, self.mode
            ))
        };
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(Error::InvalidConfig(format!(
                "attack strength {} outside [0, 1]",
                self.strength
            )));
        }
        match (self.family.as_str(), self.mode.as_str()) {
            ("watermark", "remove") => Ok(AttackKind::WatermarkRemove),
            ("watermark", "modify") => Ok(AttackKind::WatermarkModify),
            ("word", "insert") => match self.submode.as_deref() {
                Some("localized") => Ok(AttackKind::WordInsertLocalized),
                Some("dispersed") | None => Ok(AttackKind::WordInsertDispersed),
                Some(_) => Err(bad()),
            },
            ("word", "delete") => Ok(AttackKind::WordDelete),
            ("word", "synonym") => Ok(AttackKind::WordSynonym),
            ("char", "insert") => Ok(AttackKind::CharInsert),
            ("char", "delete") => Ok(AttackKind::CharDelete),
            ("char", "swap") => Ok(AttackKind::CharSwap),
            _ => Err(bad()),
        }
    }
}

/// Synonym table plus a fill list for insertion attacks. File format: one
/// `word<TAB>synonym[,synonym...]` entry per line.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    synonyms: HashMap<String, Vec<String>>,
    fill: Vec<String>,
}

impl Lexicon {
    pub fn load(path: &Path) -> Result<Lexicon> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let mut synonyms = HashMap::new();
        let mut fill = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (word, rest) = line.split_once('\t').ok_or_else(|| {
                Error::format("lexicon", format!("line {}: expected word<TAB>synonyms", lineno + 1))
            })?;
            let entry: Vec<String> = rest
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            if entry.is_empty() {
                return Err(Error::format("lexicon", format!("line {}: no synonyms", lineno + 1)));
            }
            fill.push(word.to_string());
            synonyms.insert(word.to_lowercase(), entry);
        }
        Ok(Lexicon { synonyms, fill })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for word in &self.fill {
            if let Some(entry) = self.synonyms.get(&word.to_lowercase()) {
                out.push_str(word);
                out.push('\t');
                out.push_str(&entry.join(","));
                out.push('\n');
            }
        }
        fs::write(path, out).map_err(Error::io(path))
    }

    /// Word source only (for insertion attacks), typically the corpus
    /// vocabulary; no synonym entries.
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Lexicon {
        Lexicon {
            synonyms: HashMap::new(),
            fill: words.into_iter().collect(),
        }
    }

    pub fn insert_entry(&mut self, word: &str, synonyms: Vec<String>) {
        if !self.fill.contains(&word.to_string()) {
            self.fill.push(word.to_string());
        }
        self.synonyms.insert(word.to_lowercase(), synonyms);
    }

    pub fn synonyms_of(&self, word: &str) -> Option<&[String]> {
        self.synonyms.get(&word.to_lowercase()).map(|v| v.as_slice())
    }

    pub fn fill_words(&self) -> &[String] {
        &self.fill
    }

    pub fn has_synonyms(&self) -> bool {
        !self.synonyms.is_empty()
    }
}

/// Deletes or corrupts the invisible codepoints themselves. `remove` drops
/// every alphabet codepoint; `modify` replaces each one with a uniformly
/// different alphabet codepoint with probability `rate`. Visible text is
/// untouched either way.
pub fn attack_watermark(
    text: &str,
    remove: bool,
    rate: f64,
    seed: u64,
    alphabet: &WatermarkAlphabet,
) -> String {
    if remove {
        return strip_watermarks(text, alphabet).0;
    }
    let mut rng = rng_for(seed, &["attack-watermark"]);
    text.chars()
        .map(|c| match alphabet.index_of(c) {
            Some(i) if rng.gen::<f64>() < rate => {
                let shift = rng.gen_range(1..alphabet.len());
                alphabet.char_at((i + shift) % alphabet.len())
            }
            _ => c,
        })
        .collect()
}

/// One visible word with the watermark runs it carries. Run offsets are
/// char positions inside the visible word; a unit with an empty word is a
/// bare run carrier left behind by a deletion.
struct WordUnit {
    visible: String,
    runs: Vec<(usize, Vec<char>)>,
}

impl WordUnit {
    fn is_word(&self) -> bool {
        !self.visible.is_empty()
    }
}

fn split_units(text: &str, alphabet: &WatermarkAlphabet) -> Vec<WordUnit> {
    let mut units: Vec<WordUnit> = Vec::new();
    let mut current: Option<WordUnit> = None;
    let mut run: Vec<char> = Vec::new();

    let mut leading: Vec<Vec<char>> = Vec::new();
    for c in text.chars() {
        if alphabet.contains(c) {
            run.push(c);
            continue;
        }
        if c.is_whitespace() {
            if !run.is_empty() {
                let chars = std::mem::take(&mut run);
                match (&mut current, units.last_mut()) {
                    (Some(u), _) => {
                        let offset = u.visible.chars().count();
                        u.runs.push((offset, chars));
                    }
                    (None, Some(prev)) => {
                        let offset = prev.visible.chars().count();
                        prev.runs.push((offset, chars));
                    }
                    (None, None) => leading.push(chars),
                }
            }
            if let Some(u) = current.take() {
                units.push(u);
            }
        } else {
            let u = current.get_or_insert_with(|| WordUnit {
                visible: String::new(),
                runs: leading.drain(..).map(|r| (0, r)).collect(),
            });
            if !run.is_empty() {
                let offset = u.visible.chars().count();
                u.runs.push((offset, std::mem::take(&mut run)));
            }
            u.visible.push(c);
        }
    }
    if !run.is_empty() {
        let chars = std::mem::take(&mut run);
        match (&mut current, units.last_mut()) {
            (Some(u), _) => {
                let offset = u.visible.chars().count();
                u.runs.push((offset, chars));
            }
            (None, Some(prev)) => {
                let offset = prev.visible.chars().count();
                prev.runs.push((offset, chars));
            }
            (None, None) => leading.push(chars),
        }
    }
    if let Some(u) = current.take() {
        units.push(u);
    }
    if !leading.is_empty() {
        units.push(WordUnit {
            visible: String::new(),
            runs: leading.into_iter().map(|r| (0, r)).collect(),
        });
    }
    units
}

/// Units joined by single spaces; runs spliced back at their offsets.
fn join_units(units: &[WordUnit]) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(units.len());
    for u in units {
        let chars: Vec<char> = u.visible.chars().collect();
        let mut runs = u.runs.clone();
        runs.sort_by_key(|(o, _)| *o);
        let mut out = String::new();
        let mut next_run = runs.into_iter().peekable();
        for (i, &c) in chars.iter().enumerate() {
            while next_run.peek().is_some_and(|(o, _)| *o <= i) {
                out.extend(next_run.next().unwrap().1);
            }
            out.push(c);
        }
        for (_, r) in next_run {
            out.extend(r);
        }
        parts.push(out);
    }
    parts.join(" ")
}

/// Deleting a word keeps any runs it carried as a bare carrier unit, so
/// run contents, order, and separation survive every word operation.
fn remove_word(units: &mut Vec<WordUnit>, index: usize) {
    if units[index].runs.is_empty() {
        units.remove(index);
    } else {
        units[index].visible.clear();
        for (offset, _) in units[index].runs.iter_mut() {
            *offset = 0;
        }
    }
}

/// Word-level insertion, deletion, or synonym substitution on the visible
/// words. Watermark runs are attached to their carrier word and are never
/// altered; visible words are rejoined with single spaces.
pub fn attack_words(
    text: &str,
    kind: AttackKind,
    strength: f64,
    lexicon: &Lexicon,
    seed: u64,
    alphabet: &WatermarkAlphabet,
) -> Result<String> {
    let mut units = split_units(text, alphabet);
    let n_words = units.iter().filter(|u| u.is_word()).count();
    if n_words == 0 {
        return Ok(text.to_string());
    }
    let mut rng = rng_for(seed, &["attack-words"]);
    match kind {
        AttackKind::WordInsertLocalized | AttackKind::WordInsertDispersed => {
            if lexicon.fill_words().is_empty() {
                return Err(Error::MissingLexicon);
            }
            let count = if kind == AttackKind::WordInsertLocalized {
                1
            } else {
                (strength * n_words as f64).ceil() as usize
            };
            for _ in 0..count {
                let gap = rng.gen_range(0..=units.len());
                let word = lexicon.fill_words()[rng.gen_range(0..lexicon.fill_words().len())].clone();
                units.insert(
                    gap,
                    WordUnit {
                        visible: word,
                        runs: Vec::new(),
                    },
                );
            }
        }
        AttackKind::WordDelete => {
            let count = ((strength * n_words as f64).ceil() as usize).min(n_words);
            let word_indices: Vec<usize> = units
                .iter()
                .enumerate()
                .filter(|(_, u)| u.is_word())
                .map(|(i, _)| i)
                .collect();
            let victims = rand::seq::index::sample(&mut rng, word_indices.len(), count);
            let mut order: Vec<usize> = victims.iter().map(|i| word_indices[i]).collect();
            order.sort_unstable_by(|a, b| b.cmp(a));
            for i in order {
                remove_word(&mut units, i);
            }
        }
        AttackKind::WordSynonym => {
            if !lexicon.has_synonyms() {
                return Err(Error::MissingLexicon);
            }
            let quota = ((strength * n_words as f64).ceil() as usize).min(n_words);
            let mut eligible: Vec<usize> = units
                .iter()
                .enumerate()
                .filter(|(_, u)| u.is_word() && lexicon.synonyms_of(&u.visible).is_some())
                .map(|(i, _)| i)
                .collect();
            eligible.shuffle(&mut rng);
            eligible.truncate(quota);
            for i in eligible {
                let entry = lexicon.synonyms_of(&units[i].visible).unwrap();
                units[i].visible = entry[rng.gen_range(0..entry.len())].clone();
                let len = units[i].visible.chars().count();
                for (offset, _) in units[i].runs.iter_mut() {
                    *offset = (*offset).min(len);
                }
            }
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "{} is not a word attack",
                other.label()
            )))
        }
    }
    Ok(join_units(&units))
}

/// Character-level insertion, deletion, or adjacent swap over visible
/// characters only; alphabet codepoints are excluded from both selection and
/// position counting, and runs stay anchored after the visible character
/// that preceded them.
pub fn attack_chars(
    text: &str,
    kind: AttackKind,
    strength: f64,
    seed: u64,
    alphabet: &WatermarkAlphabet,
) -> Result<String> {
    // visible chars plus run anchors expressed in visible-char counts
    let mut visible: Vec<char> = Vec::new();
    let mut runs: Vec<(usize, Vec<char>)> = Vec::new();
    for c in text.chars() {
        if alphabet.contains(c) {
            match runs.last_mut() {
                Some((anchor, chars)) if *anchor == visible.len() => chars.push(c),
                _ => runs.push((visible.len(), vec![c])),
            }
        } else {
            visible.push(c);
        }
    }
    let n = visible.len();
    let mut rng = rng_for(seed, &["attack-chars"]);
    match kind {
        AttackKind::CharInsert => {
            let count = (strength * n as f64).ceil() as usize;
            for _ in 0..count {
                let pos = rng.gen_range(0..=visible.len());
                let letter = (b'a' + rng.gen_range(0..26u8)) as char;
                visible.insert(pos, letter);
                for (anchor, _) in runs.iter_mut() {
                    if *anchor > pos {
                        *anchor += 1;
                    }
                }
            }
        }
        AttackKind::CharDelete => {
            let count = ((strength * n as f64).ceil() as usize).min(n);
            let victims = rand::seq::index::sample(&mut rng, n, count);
            let mut order: Vec<usize> = victims.iter().collect();
            order.sort_unstable_by(|a, b| b.cmp(a));
            for p in order {
                visible.remove(p);
                for (anchor, _) in runs.iter_mut() {
                    if *anchor > p {
                        *anchor -= 1;
                    }
                }
            }
        }
        AttackKind::CharSwap => {
            if n < 2 {
                return Err(Error::InvalidConfig("swap needs at least 2 visible chars".into()));
            }
            let count = (strength * n as f64).ceil() as usize;
            for _ in 0..count {
                let p = rng.gen_range(0..visible.len() - 1);
                visible.swap(p, p + 1);
            }
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "{} is not a char attack",
                other.label()
            )))
        }
    }

    let mut out = String::with_capacity(text.len());
    let mut run_iter = runs.iter().peekable();
    for (i, &c) in visible.iter().enumerate() {
        while let Some((anchor, chars)) = run_iter.peek() {
            if *anchor <= i {
                out.extend(chars.iter());
                run_iter.next();
            } else {
                break;
            }
        }
        out.push(c);
    }
    for (_, chars) in run_iter {
        out.extend(chars.iter());
    }
    Ok(out)
}

/// Applies any attack kind to a text.
pub fn apply_attack(
    text: &str,
    kind: AttackKind,
    strength: f64,
    lexicon: &Lexicon,
    seed: u64,
    alphabet: &WatermarkAlphabet,
) -> Result<String> {
    match kind {
        AttackKind::WatermarkRemove => Ok(attack_watermark(text, true, 1.0, seed, alphabet)),
        AttackKind::WatermarkModify => Ok(attack_watermark(text, false, strength, seed, alphabet)),
        AttackKind::WordInsertLocalized
        | AttackKind::WordInsertDispersed
        | AttackKind::WordDelete
        | AttackKind::WordSynonym => attack_words(text, kind, strength, lexicon, seed, alphabet),
        AttackKind::CharInsert | AttackKind::CharDelete | AttackKind::CharSwap => {
            attack_chars(text, kind, strength, seed, alphabet)
        }
    }
}

/// Regeneration defense: strip whatever runs remain after an attack and
/// force one watermark from the cleaned text.
pub fn regenerate_defense(
    model: &WasaModel<f32>,
    vocab: &Vocab,
    attacked_text: &str,
    m: usize,
    beam_size: usize,
) -> Result<Watermark> {
    enforce_watermark(model, vocab, attacked_text, m, beam_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphabet() -> WatermarkAlphabet {
        WatermarkAlphabet::default_six()
    }

    fn run_text(len: usize, offset: usize) -> String {
        let a = alphabet();
        (0..len).map(|i| a.char_at((i + offset) % a.len())).collect()
    }

    fn runs_of(text: &str) -> Vec<Vec<char>> {
        strip_watermarks(text, &alphabet())
            .1
            .into_iter()
            .map(|r| r.chars)
            .collect()
    }

    #[test]
    fn remove_deletes_every_run() {
        let text = format!("alpha{} beta {}gamma", run_text(10, 0), run_text(3, 2));
        let out = attack_watermark(&text, true, 1.0, 0, &alphabet());
        assert_eq!(out, "alpha beta gamma");
        assert!(runs_of(&out).is_empty());
    }

    #[test]
    fn modify_rate_zero_is_identity_and_rate_one_hits_every_char() {
        let text = format!("alpha{} beta", run_text(10, 0));
        assert_eq!(attack_watermark(&text, false, 0.0, 7, &alphabet()), text);

        let out = attack_watermark(&text, false, 1.0, 7, &alphabet());
        let before = runs_of(&text);
        let after = runs_of(&out);
        assert_eq!(after[0].len(), 10);
        let hamming = before[0].iter().zip(&after[0]).filter(|(a, b)| a != b).count();
        assert_eq!(hamming, 10, "rate 1 forces a different char everywhere");
        // visible text unchanged
        assert_eq!(strip_watermarks(&out, &alphabet()).0, strip_watermarks(&text, &alphabet()).0);
    }

    #[test]
    fn delete_strength_zero_is_identity() {
        let lex = Lexicon::from_words(["pad".to_string()]);
        let text = "one two three";
        let out = attack_words(text, AttackKind::WordDelete, 0.0, &lex, 3, &alphabet()).unwrap();
        assert_eq!(out, text);
    }

    #[test]
    fn dispersed_insert_adds_ceil_words() {
        let lex = Lexicon::from_words(["pad".to_string()]);
        let text = "w1 w2 w3 w4 w5 w6 w7 w8 w9 w10";
        let out = attack_words(text, AttackKind::WordInsertDispersed, 0.2, &lex, 3, &alphabet()).unwrap();
        assert_eq!(out.split_whitespace().count(), 12);

        let localized = attack_words(text, AttackKind::WordInsertLocalized, 0.9, &lex, 3, &alphabet()).unwrap();
        assert_eq!(localized.split_whitespace().count(), 11, "localized inserts exactly one");
    }

    #[test]
    fn delete_removes_ceil_words_but_keeps_runs() {
        let lex = Lexicon::default();
        let text = format!("w1{} w2 w3 w4 w5 w6 w7 w8 w9 w10{}", run_text(10, 0), run_text(4, 3));
        let before = runs_of(&text);
        let out = attack_words(&text, AttackKind::WordDelete, 0.3, &lex, 9, &alphabet()).unwrap();
        let visible_words = strip_watermarks(&out, &alphabet()).0.split_whitespace().count();
        assert_eq!(visible_words, 7);
        assert_eq!(runs_of(&out), before, "runs survive word deletion in order");
    }

    #[test]
    fn synonym_replaces_only_eligible_words() {
        let mut lex = Lexicon::default();
        lex.insert_entry("big", vec!["large".to_string()]);
        let out = attack_words("a big cat", AttackKind::WordSynonym, 1.0, &lex, 1, &alphabet()).unwrap();
        assert_eq!(out, "a large cat");

        let none = Lexicon::from_words(["x".into()]);
        assert!(matches!(
            attack_words("a big cat", AttackKind::WordSynonym, 1.0, &none, 1, &alphabet()),
            Err(Error::MissingLexicon)
        ));
    }

    #[test]
    fn char_attacks_affect_only_visible_chars() {
        let text = format!("abcdefghij{} klmnopqrst", run_text(10, 0)); // 21 visible chars
        let before = runs_of(&text);

        let out = attack_chars(&text, AttackKind::CharDelete, 0.1, 5, &alphabet()).unwrap();
        let visible: usize = strip_watermarks(&out, &alphabet()).0.chars().count();
        assert_eq!(visible, 18, "ceil(0.1*21)=3 visible chars removed");
        assert_eq!(runs_of(&out), before);

        let out = attack_chars(&text, AttackKind::CharInsert, 0.2, 5, &alphabet()).unwrap();
        let visible: usize = strip_watermarks(&out, &alphabet()).0.chars().count();
        assert_eq!(visible, 26, "ceil(0.2*21)=5 chars inserted");
        assert_eq!(runs_of(&out), before);

        let out = attack_chars(&text, AttackKind::CharSwap, 0.15, 5, &alphabet()).unwrap();
        assert_eq!(runs_of(&out), before, "swap never moves a run char");
        let sorted_before = {
            let mut v: Vec<char> = strip_watermarks(&text, &alphabet()).0.chars().collect();
            v.sort_unstable();
            v
        };
        let sorted_after = {
            let mut v: Vec<char> = strip_watermarks(&out, &alphabet()).0.chars().collect();
            v.sort_unstable();
            v
        };
        assert_eq!(sorted_before, sorted_after, "swap permutes, never changes, visible chars");
    }

    #[test]
    fn char_strength_zero_is_identity() {
        let text = format!("abc def{}", run_text(3, 1));
        for kind in [AttackKind::CharInsert, AttackKind::CharDelete, AttackKind::CharSwap] {
            let out = attack_chars(&text, kind, 0.0, 2, &alphabet()).unwrap();
            assert_eq!(out, text, "{}", kind.label());
        }
    }

    #[test]
    fn attacks_are_seed_deterministic() {
        let lex = Lexicon::from_words(["pad".to_string(), "mat".to_string()]);
        let text = format!("w1 w2{} w3 w4 w5", run_text(10, 0));
        for kind in [
            AttackKind::WordInsertDispersed,
            AttackKind::WordDelete,
            AttackKind::CharInsert,
            AttackKind::CharDelete,
            AttackKind::CharSwap,
        ] {
            let a = apply_attack(&text, kind, 0.4, &lex, 11, &alphabet()).unwrap();
            let b = apply_attack(&text, kind, 0.4, &lex, 11, &alphabet()).unwrap();
            assert_eq!(a, b, "{}", kind.label());
        }
    }

    #[test]
    fn word_attacks_never_change_run_contents() {
        let lex = Lexicon::from_words(["pad".to_string()]);
        let text = format!("{}start w2 w3{} w4 end{}", run_text(2, 0), run_text(10, 1), run_text(3, 4));
        let before = runs_of(&text);
        for (kind, strength) in [
            (AttackKind::WordInsertDispersed, 0.5),
            (AttackKind::WordDelete, 0.5),
            (AttackKind::WordDelete, 1.0),
        ] {
            let out = attack_words(&text, kind, strength, &lex, 13, &alphabet()).unwrap();
            assert_eq!(runs_of(&out), before, "{} at {strength}", kind.label());
        }
    }

    #[test]
    fn lexicon_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.tsv");
        std::fs::write(&path, "big\tlarge,huge\nsmall\ttiny\n").unwrap();
        let lex = Lexicon::load(&path).unwrap();
        assert_eq!(lex.synonyms_of("big").unwrap(), &["large".to_string(), "huge".to_string()]);
        assert_eq!(lex.fill_words(), &["big".to_string(), "small".to_string()]);
        lex.save(&dir.path().join("copy.tsv")).unwrap();
        let copy = Lexicon::load(&dir.path().join("copy.tsv")).unwrap();
        assert_eq!(copy.fill_words(), lex.fill_words());
    }

    #[test]
    fn attack_spec_parses_kinds() {
        let spec: AttackSpec = serde_json::from_str(
            r#"{"target":"generated_text","family":"word","mode":"insert","submode":"dispersed","strength":0.2,"seed":1}"#,
        )
        .unwrap();
        assert_eq!(spec.kind().unwrap(), AttackKind::WordInsertDispersed);
        assert_eq!(spec.target, AttackTarget::GeneratedText);

        let bad: AttackSpec = serde_json::from_str(
            r#"{"target":"prompt","family":"word","mode":"explode","strength":0.2}"#,
        )
        .unwrap();
        assert!(bad.kind().is_err());
    }
}
