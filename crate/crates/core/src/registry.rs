//! Watermark alphabet, per-provider watermark assignment, and decoding of
//! generated watermarks back to providers.
//!
//! A watermark is a fixed-length string over a small alphabet of invisible
//! Unicode codepoints. The registry binds one watermark to each data
//! provider, enforcing a minimum pairwise Hamming distance so that soft
//! matching can absorb small corruptions.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Default invisible codepoints, in vocabulary order: zero-width space,
/// zero-width non-joiner, zero-width joiner, invisible times, invisible
/// separator, invisible plus.
pub const DEFAULT_ALPHABET: [char; 6] = [
    '\u{200B}', '\u{200C}', '\u{200D}', '\u{2062}', '\u{2063}', '\u{2064}',
];

pub const DEFAULT_WATERMARK_LEN: usize = 10;
pub const DEFAULT_MIN_HAMMING: usize = 3;

/// Rejection sampling gives up after this many draws per provider.
const DRAW_BUDGET_PER_PROVIDER: usize = 10_000;

/// Renders a codepoint as `U+XXXX`. All human-facing and on-disk
/// serialization uses this form; raw invisible characters never appear in
/// registry files or reports.
pub fn codepoint_label(c: char) -> String {
    format!("U+{:04X}", c as u32)
}

/// Parses a `U+XXXX` codepoint label.
pub fn parse_codepoint_label(s: &str) -> Result<char> {
    let hex = s
        .strip_prefix("U+")
        .ok_or_else(|| Error::format("codepoint", format!("`{s}` does not start with U+")))?;
    let v = u32::from_str_radix(hex, 16)
        .map_err(|_| Error::format("codepoint", format!("`{s}` is not hexadecimal")))?;
    char::from_u32(v).ok_or_else(|| Error::format("codepoint", format!("`{s}` is not a scalar value")))
}

/// Ordered alphabet of invisible watermark codepoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatermarkAlphabet {
    codepoints: Vec<char>,
}

impl WatermarkAlphabet {
    pub fn new(codepoints: Vec<char>) -> Result<Self> {
        if codepoints.is_empty() {
            return Err(Error::InvalidConfig("alphabet must not be empty".into()));
        }
        for (i, c) in codepoints.iter().enumerate() {
            if codepoints[..i].contains(c) {
                return Err(Error::InvalidConfig(format!(
                    "alphabet codepoint {} is duplicated",
                    codepoint_label(*c)
                )));
            }
        }
        Ok(Self { codepoints })
    }

    /// The default six-codepoint alphabet.
    pub fn default_six() -> Self {
        Self {
            codepoints: DEFAULT_ALPHABET.to_vec(),
        }
    }

    /// The reduced two-codepoint alphabet (first two defaults).
    pub fn pair() -> Self {
        Self {
            codepoints: DEFAULT_ALPHABET[..2].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.codepoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codepoints.is_empty()
    }

    pub fn codepoints(&self) -> &[char] {
        &self.codepoints
    }

    pub fn contains(&self, c: char) -> bool {
        self.codepoints.contains(&c)
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.codepoints.iter().position(|&x| x == c)
    }

    pub fn char_at(&self, i: usize) -> char {
        self.codepoints[i]
    }
}

impl Default for WatermarkAlphabet {
    fn default() -> Self {
        Self::default_six()
    }
}

/// A fixed-length watermark string over an alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Watermark {
    chars: Vec<char>,
}

impl Watermark {
    pub fn new(chars: Vec<char>) -> Self {
        Self { chars }
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// The raw invisible string, for embedding into text.
    pub fn as_text(&self) -> String {
        self.chars.iter().collect()
    }

    /// Space-separated `U+XXXX` rendering.
    pub fn to_codes(&self) -> String {
        self.chars
            .iter()
            .map(|&c| codepoint_label(c))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn from_codes(s: &str) -> Result<Self> {
        let chars = s
            .split_whitespace()
            .map(parse_codepoint_label)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { chars })
    }

    /// Hamming distance; `None` when lengths differ.
    pub fn hamming(&self, other: &Watermark) -> Option<usize> {
        if self.len() != other.len() {
            return None;
        }
        Some(
            self.chars
                .iter()
                .zip(&other.chars)
                .filter(|(a, b)| a != b)
                .count(),
        )
    }

    /// Levenshtein edit distance.
    pub fn levenshtein(&self, other: &Watermark) -> usize {
        levenshtein(&self.chars, &other.chars)
    }
}

impl fmt::Display for Watermark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_codes())
    }
}

impl Serialize for Watermark {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_codes())
    }
}

impl<'de> Deserialize<'de> for Watermark {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Watermark::from_codes(&s).map_err(serde::de::Error::custom)
    }
}

fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Name of a data provider.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProviderId(pub String);

impl ProviderId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProviderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ProviderId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for ProviderId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// How decoded watermarks are mapped back to providers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// String equality against a bound watermark. The default.
    Exact,
    /// Smallest Levenshtein distance, ties broken by registry ordinal.
    Soft,
}

/// Result of matching a set of decoded watermarks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub provider: Option<ProviderId>,
    /// All decoded watermarks agreed on one candidate.
    pub unanimous: bool,
}

impl MatchResult {
    fn none() -> Self {
        Self {
            provider: None,
            unanimous: false,
        }
    }
}

/// Immutable bijection between providers and watermarks.
#[derive(Debug, Clone)]
pub struct Registry {
    alphabet: WatermarkAlphabet,
    length: usize,
    min_hamming: usize,
    seed: u64,
    providers: Vec<ProviderId>,
    watermarks: Vec<Watermark>,
    by_provider: HashMap<ProviderId, usize>,
    by_watermark: HashMap<Watermark, usize>,
}

impl Registry {
    /// Binds a fresh watermark to every provider by seeded uniform sampling,
    /// rejecting candidates closer than `min_hamming` to any earlier binding.
    /// Identical inputs always produce an identical registry.
    pub fn new(
        providers: Vec<ProviderId>,
        length: usize,
        alphabet: WatermarkAlphabet,
        seed: u64,
        min_hamming: usize,
    ) -> Result<Self> {
        if providers.is_empty() {
            return Err(Error::InvalidConfig("provider list must not be empty".into()));
        }
        for (i, p) in providers.iter().enumerate() {
            if providers[..i].contains(p) {
                return Err(Error::InvalidConfig(format!("provider `{p}` is duplicated")));
            }
        }
        if length == 0 {
            return Err(Error::InvalidConfig("watermark length must be positive".into()));
        }
        if min_hamming > length {
            return Err(Error::InvalidConfig(format!(
                "min hamming {min_hamming} exceeds watermark length {length}"
            )));
        }
        // |alphabet|^length >= |providers|, computed with saturation.
        let mut capacity = 1usize;
        for _ in 0..length {
            capacity = capacity.saturating_mul(alphabet.len());
        }
        if capacity < providers.len() {
            return Err(Error::InvalidConfig(format!(
                "alphabet of {} and length {} admit only {} watermarks for {} providers",
                alphabet.len(),
                length,
                capacity,
                providers.len()
            )));
        }

        let mut rng = rng_for(seed, &["registry"]);
        let budget = DRAW_BUDGET_PER_PROVIDER.saturating_mul(providers.len());
        let mut draws = 0usize;
        let mut watermarks: Vec<Watermark> = Vec::with_capacity(providers.len());
        while watermarks.len() < providers.len() {
            if draws >= budget {
                return Err(Error::CapacityExceeded {
                    providers: providers.len(),
                    length,
                    alphabet: alphabet.len(),
                    min_hamming,
                    draws,
                });
            }
            draws += 1;
            let candidate = Watermark::new(
                (0..length)
                    .map(|_| alphabet.char_at(rng.gen_range(0..alphabet.len())))
                    .collect(),
            );
            let ok = watermarks.iter().all(|w| {
                let d = w.hamming(&candidate).expect("equal lengths");
                d >= min_hamming.max(1)
            });
            if ok {
                watermarks.push(candidate);
            }
        }

        let by_provider = providers
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let by_watermark = watermarks
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok(Self {
            alphabet,
            length,
            min_hamming,
            seed,
            providers,
            watermarks,
            by_provider,
            by_watermark,
        })
    }

    pub fn alphabet(&self) -> &WatermarkAlphabet {
        &self.alphabet
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn min_hamming(&self) -> usize {
        self.min_hamming
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Providers in their original registration order.
    pub fn providers(&self) -> &[ProviderId] {
        &self.providers
    }

    pub fn len(&self) -> usize {
        self.providers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.providers.is_empty()
    }

    pub fn contains(&self, provider: &ProviderId) -> bool {
        self.by_provider.contains_key(provider)
    }

    pub fn watermark_of(&self, provider: &ProviderId) -> Result<&Watermark> {
        self.by_provider
            .get(provider)
            .map(|&i| &self.watermarks[i])
            .ok_or_else(|| Error::UnknownProvider(provider.0.clone()))
    }

    /// Maps a decoded watermark to a provider. Exact mode returns the
    /// provider bound to exactly this string, or `None`. Soft mode returns
    /// the provider with the smallest Levenshtein distance, ties broken by
    /// the smallest registry ordinal, and always succeeds on a non-empty
    /// registry.
    pub fn provider_of(&self, w: &Watermark, mode: MatchMode) -> Option<&ProviderId> {
        match mode {
            MatchMode::Exact => self.by_watermark.get(w).map(|&i| &self.providers[i]),
            MatchMode::Soft => {
                let mut best: Option<(usize, usize)> = None; // (distance, ordinal)
                for (i, bound) in self.watermarks.iter().enumerate() {
                    let d = bound.levenshtein(w);
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, i));
                    }
                }
                best.map(|(_, i)| &self.providers[i])
            }
        }
    }

    /// Attribution over all watermarks decoded from one text: the provider
    /// is returned only if every decoded watermark identifies it.
    pub fn match_generated(&self, decoded: &[Watermark], mode: MatchMode) -> MatchResult {
        let Some(first) = decoded.first() else {
            return MatchResult::none();
        };
        match mode {
            MatchMode::Exact => {
                if decoded[1..].iter().any(|w| w != first) {
                    return MatchResult::none();
                }
                match self.provider_of(first, MatchMode::Exact) {
                    Some(p) => MatchResult {
                        provider: Some(p.clone()),
                        unanimous: true,
                    },
                    None => MatchResult::none(),
                }
            }
            MatchMode::Soft => {
                let first_p = self.provider_of(first, MatchMode::Soft).cloned();
                for w in &decoded[1..] {
                    if self.provider_of(w, MatchMode::Soft).cloned() != first_p {
                        return MatchResult::none();
                    }
                }
                MatchResult {
                    provider: first_p,
                    unanimous: true,
                }
            }
        }
    }

    /// Serializes to the registry file format. Watermarks are written as
    /// `U+XXXX` code sequences, never as raw invisible characters.
    pub fn to_json(&self) -> String {
        let mut providers = serde_json::Map::new();
        for (p, w) in self.providers.iter().zip(&self.watermarks) {
            providers.insert(p.0.clone(), serde_json::Value::String(w.to_codes()));
        }
        let file = serde_json::json!({
            "version": 1,
            "length": self.length,
            "min_hamming": self.min_hamming,
            "seed": self.seed,
            "alphabet": self
                .alphabet
                .codepoints()
                .iter()
                .map(|&c| codepoint_label(c))
                .collect::<Vec<_>>(),
            "providers": providers,
        });
        let mut out = serde_json::to_string_pretty(&file).expect("registry serialization");
        out.push('\n');
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(Error::io(path))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct RegistryFile {
            version: u32,
            length: usize,
            min_hamming: usize,
            seed: u64,
            alphabet: Vec<String>,
            providers: serde_json::Map<String, serde_json::Value>,
        }
        let file: RegistryFile = serde_json::from_str(text)
            .map_err(|e| Error::format("registry file", e.to_string()))?;
        if file.version != 1 {
            return Err(Error::FormatVersionMismatch {
                found: file.version,
                expected: 1,
            });
        }
        let alphabet = WatermarkAlphabet::new(
            file.alphabet
                .iter()
                .map(|s| parse_codepoint_label(s))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let mut providers = Vec::new();
        let mut watermarks = Vec::new();
        for (name, value) in &file.providers {
            let codes = value
                .as_str()
                .ok_or_else(|| Error::format("registry file", format!("watermark of `{name}` is not a string")))?;
            let w = Watermark::from_codes(codes)?;
            if w.len() != file.length {
                return Err(Error::format(
                    "registry file",
                    format!("watermark of `{name}` has length {} instead of {}", w.len(), file.length),
                ));
            }
            for c in w.chars() {
                if !alphabet.contains(*c) {
                    return Err(Error::format(
                        "registry file",
                        format!("watermark of `{name}` uses {} outside the alphabet", codepoint_label(*c)),
                    ));
                }
            }
            providers.push(ProviderId(name.clone()));
            watermarks.push(w);
        }
        if providers.is_empty() {
            return Err(Error::format("registry file", "no providers".to_string()));
        }
        let by_provider = providers
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let by_watermark: HashMap<Watermark, usize> = watermarks
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        if by_watermark.len() != watermarks.len() {
            return Err(Error::format("registry file", "watermarks are not unique".to_string()));
        }
        Ok(Self {
            alphabet,
            length: file.length,
            min_hamming: file.min_hamming,
            seed: file.seed,
            providers,
            watermarks,
            by_provider,
            by_watermark,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_json(&text)
    }
}
