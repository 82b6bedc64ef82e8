//! Sentence sectioning: splits document text into sentences and classifies
//! each one into one of four section classes with a small dense head over
//! 768-dimensional sentence embeddings.
//!
//! Embeddings come from an [`EmbeddingProvider`]. Two providers ship with the
//! stack: the deterministic [`KeywordProvider`] here (keyword hits mapped to
//! basis-dominant vectors) and a file-backed replay provider in the `cvparse`
//! crate.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const EMBEDDING_DIM: usize = 768;
pub const HIDDEN_DIM: usize = 200;
pub const N_CLASSES: usize = 4;

/// The four sentence categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionClass {
    PersonalInformation,
    Education,
    WorkExperience,
    Others,
}

impl SectionClass {
    pub const ALL: [SectionClass; N_CLASSES] = [
        SectionClass::PersonalInformation,
        SectionClass::Education,
        SectionClass::WorkExperience,
        SectionClass::Others,
    ];

    pub fn index(self) -> usize {
        match self {
            SectionClass::PersonalInformation => 0,
            SectionClass::Education => 1,
            SectionClass::WorkExperience => 2,
            SectionClass::Others => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "personal_information" => Some(SectionClass::PersonalInformation),
            "education" => Some(SectionClass::Education),
            "work_experience" => Some(SectionClass::WorkExperience),
            "others" => Some(SectionClass::Others),
            _ => None,
        }
    }
}

/// One classified sentence: the text, the winning class and the full softmax
/// score vector (non-negative, sums to 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub label: SectionClass,
    pub scores: [f64; N_CLASSES],
}

/// Ordered classified sentences of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionedDocument {
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbedError {
    /// Provider returned a vector that is not 768 long.
    WrongLength { got: usize },
    /// A replay provider has no embedding recorded for this sentence.
    UnknownSentence(String),
    /// Provider-specific failure (transport, file corruption, ...).
    Provider(String),
}

impl core::fmt::Display for EmbedError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EmbedError::WrongLength { got } => {
                write!(
                    f,
                    "embedding has {got} components, expected {EMBEDDING_DIM}"
                )
            }
            EmbedError::UnknownSentence(s) => write!(f, "no embedding recorded for {s:?}"),
            EmbedError::Provider(msg) => write!(f, "embedding provider failed: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EmbedError {}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmenterError {
    /// Input text contains no sentences.
    EmptyText,
    DimensionMismatch {
        expected: usize,
        got: usize,
    },
    Embed(EmbedError),
}

impl From<EmbedError> for SegmenterError {
    fn from(e: EmbedError) -> Self {
        SegmenterError::Embed(e)
    }
}

impl core::fmt::Display for SegmenterError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SegmenterError::EmptyText => write!(f, "input text contains no sentences"),
            SegmenterError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            SegmenterError::Embed(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SegmenterError {}

/// Maps a sentence to a 768-component embedding.
pub trait EmbeddingProvider {
    fn embed(&self, sentence: &str) -> Result<Vec<f64>, EmbedError>;
}

/// The 768 -> 200 -> 4 dense classification head: relu hidden layer, softmax
/// output. 153,800 + 804 = 154,604 parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseClassifier {
    /// Row-major [EMBEDDING_DIM x HIDDEN_DIM].
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// Row-major [HIDDEN_DIM x N_CLASSES].
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl DenseClassifier {
    pub fn from_parts(
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self, SegmenterError> {
        let checks = [
            (w1.len(), EMBEDDING_DIM * HIDDEN_DIM),
            (b1.len(), HIDDEN_DIM),
            (w2.len(), HIDDEN_DIM * N_CLASSES),
            (b2.len(), N_CLASSES),
        ];
        for (got, expected) in checks {
            if got != expected {
                return Err(SegmenterError::DimensionMismatch { expected, got });
            }
        }
        Ok(Self { w1, b1, w2, b2 })
    }

    /// All-zero weights; forward output is uniform.
    pub fn zeroed() -> Self {
        Self {
            w1: vec![0.0; EMBEDDING_DIM * HIDDEN_DIM],
            b1: vec![0.0; HIDDEN_DIM],
            w2: vec![0.0; HIDDEN_DIM * N_CLASSES],
            b2: vec![0.0; N_CLASSES],
        }
    }

    /// A handcrafted head matched to [`KeywordProvider`] embeddings: input
    /// component k (k < 4) is routed straight through hidden unit k to class
    /// k, and a small bias on the last class makes keyword-free sentences
    /// fall back to `Others`.
    pub fn keyword_router() -> Self {
        let mut c = Self::zeroed();
        for k in 0..N_CLASSES {
            c.w1[k * HIDDEN_DIM + k] = 1.0;
            c.w2[k * N_CLASSES + k] = 10.0;
        }
        c.b2[SectionClass::Others.index()] = 0.25;
        c
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameter counts of the two dense layers (weights + biases).
    pub fn layer_parameter_counts(&self) -> (usize, usize) {
        (self.w1.len() + self.b1.len(), self.w2.len() + self.b2.len())
    }

    pub fn weights(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        (&self.w1, &self.b1, &self.w2, &self.b2)
    }

    /// softmax(w2' * relu(w1' * x + b1) + b2). The output is non-negative
    /// and sums to 1.
    pub fn forward(&self, embedding: &[f64]) -> Result<[f64; N_CLASSES], SegmenterError> {
        if embedding.len() != EMBEDDING_DIM {
            return Err(SegmenterError::DimensionMismatch {
                expected: EMBEDDING_DIM,
                got: embedding.len(),
            });
        }
        let mut hidden = [0.0f64; HIDDEN_DIM];
        for (i, &x) in embedding.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.w1[i * HIDDEN_DIM..(i + 1) * HIDDEN_DIM];
            for (j, &w) in row.iter().enumerate() {
                hidden[j] += x * w;
            }
        }
        for (j, h) in hidden.iter_mut().enumerate() {
            *h = (*h + self.b1[j]).max(0.0);
        }

        let mut logits = [0.0f64; N_CLASSES];
        logits.copy_from_slice(&self.b2);
        for (j, &h) in hidden.iter().enumerate() {
            if h == 0.0 {
                continue;
            }
            let row = &self.w2[j * N_CLASSES..(j + 1) * N_CLASSES];
            for (k, &w) in row.iter().enumerate() {
                logits[k] += h * w;
            }
        }

        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out = [0.0f64; N_CLASSES];
        let mut sum = 0.0;
        for (k, &z) in logits.iter().enumerate() {
            let e = libm::exp(z - max);
            out[k] = e;
            sum += e;
        }
        for v in &mut out {
            *v /= sum;
        }
        Ok(out)
    }
}

/// Deterministic keyword-hash embedding provider. Each keyword hit adds 1 to
/// the basis component of its class; every whitespace token also adds a
/// small hashed component above the class band so distinct sentences get
/// distinct vectors.
#[derive(Debug, Clone)]
pub struct KeywordProvider {
    /// (lowercased keyword, class), in lexicon order.
    entries: Vec<(String, SectionClass)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconError {
    pub line: usize,
    pub message: String,
}

impl core::fmt::Display for LexiconError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "lexicon line {}: {}", self.line, self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LexiconError {}

impl KeywordProvider {
    pub fn new(entries: Vec<(String, SectionClass)>) -> Self {
        let entries = entries
            .into_iter()
            .map(|(k, c)| (k.to_lowercase(), c))
            .collect();
        Self { entries }
    }

    /// Parses `keyword<TAB>class` lines; `#` starts a comment.
    pub fn from_lexicon(text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (keyword, class_name) = line.split_once('\t').ok_or_else(|| LexiconError {
                line: idx + 1,
                message: "expected keyword<TAB>class".to_string(),
            })?;
            let class = SectionClass::parse(class_name.trim()).ok_or_else(|| LexiconError {
                line: idx + 1,
                message: "unknown section class".to_string(),
            })?;
            let keyword = keyword.trim();
            if keyword.is_empty() {
                return Err(LexiconError {
                    line: idx + 1,
                    message: "empty keyword".to_string(),
                });
            }
            entries.push((keyword.to_string(), class));
        }
        Ok(Self::new(entries))
    }

    /// The bundled resume-domain lexicon.
    pub fn builtin() -> Self {
        Self::from_lexicon(include_str!("../assets/lexicon.tsv"))
            .expect("bundled lexicon is well-formed")
    }

    pub fn entries(&self) -> &[(String, SectionClass)] {
        &self.entries
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

impl EmbeddingProvider for KeywordProvider {
    fn embed(&self, sentence: &str) -> Result<Vec<f64>, EmbedError> {
        let lower = sentence.to_lowercase();
        let mut v = vec![0.0; EMBEDDING_DIM];
        for (keyword, class) in &self.entries {
            if lower.contains(keyword.as_str()) {
                v[class.index()] += 1.0;
            }
        }
        for token in lower.split_whitespace() {
            let slot =
                N_CLASSES + (fnv1a(token.as_bytes()) % (EMBEDDING_DIM - N_CLASSES) as u64) as usize;
            v[slot] += 0.01;
        }
        Ok(v)
    }
}

/// Splits text into sentences: a newline always ends a sentence; '.', '!'
/// and '?' end one when followed by whitespace. Surrounding whitespace is
/// trimmed and empty pieces are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\n' {
            push_sentence(&mut out, &mut current);
            continue;
        }
        current.push(c);
        if matches!(c, '.' | '!' | '?') {
            if let Some(&next) = chars.peek() {
                if next.is_whitespace() {
                    push_sentence(&mut out, &mut current);
                }
            }
        }
    }
    push_sentence(&mut out, &mut current);
    out
}

fn push_sentence(out: &mut Vec<String>, current: &mut String) {
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    current.clear();
}

/// Classifies pre-embedded sentences, preserving order. `sentences` and
/// `embeddings` must have equal length and every embedding must be 768 long.
pub fn classify_sentences(
    sentences: &[String],
    embeddings: &[Vec<f64>],
    classifier: &DenseClassifier,
) -> Result<SectionedDocument, SegmenterError> {
    if sentences.len() != embeddings.len() {
        return Err(SegmenterError::DimensionMismatch {
            expected: sentences.len(),
            got: embeddings.len(),
        });
    }
    let mut out = Vec::with_capacity(sentences.len());
    for (text, embedding) in sentences.iter().zip(embeddings) {
        if embedding.len() != EMBEDDING_DIM {
            return Err(EmbedError::WrongLength {
                got: embedding.len(),
            }
            .into());
        }
        let scores = classifier.forward(embedding)?;
        let label = argmax(&scores);
        out.push(Sentence {
            text: text.clone(),
            label,
            scores,
        });
    }
    Ok(SectionedDocument { sentences: out })
}

fn argmax(scores: &[f64; N_CLASSES]) -> SectionClass {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    SectionClass::from_index(best).unwrap_or(SectionClass::Others)
}

/// Splits, embeds and classifies a document. Errors with `EmptyText` when
/// the text contains no sentences.
pub fn segment(
    text: &str,
    provider: &dyn EmbeddingProvider,
    classifier: &DenseClassifier,
) -> Result<SectionedDocument, SegmenterError> {
    let sentences = split_sentences(text);
    if sentences.is_empty() {
        return Err(SegmenterError::EmptyText);
    }
    let mut embeddings = Vec::with_capacity(sentences.len());
    for sentence in &sentences {
        let e = provider.embed(sentence)?;
        if e.len() != EMBEDDING_DIM {
            return Err(EmbedError::WrongLength { got: e.len() }.into());
        }
        embeddings.push(e);
    }
    classify_sentences(&sentences, &embeddings, classifier)
}
