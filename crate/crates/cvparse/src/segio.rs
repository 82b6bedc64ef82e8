//! File formats for the segmenter: the binary classifier weight file, the
//! keyword lexicon, and a replay provider that serves precomputed sentence
//! embeddings from disk.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use cvparse_core::segmenter::{
    DenseClassifier, EmbedError, EmbeddingProvider, KeywordProvider, EMBEDDING_DIM, HIDDEN_DIM,
    N_CLASSES,
};
use rand::{Rng, SeedableRng};

/// Weight file magic bytes.
pub const WEIGHTS_MAGIC: &[u8; 4] = b"DCLS";

#[derive(Debug, thiserror::Error)]
pub enum WeightFileError {
    #[error("not a classifier weight file (bad magic)")]
    BadMagic,
    #[error("weight file declares dims {0:?}, expected [768, 200, 200, 4]")]
    BadDims([u32; 4]),
    #[error("weight file is truncated")]
    Truncated,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Writes `DCLS`, four little-endian u32 dims, then w1, b1, w2, b2 as
/// little-endian f64.
pub fn save_weights(path: &Path, classifier: &DenseClassifier) -> io::Result<()> {
    let (w1, b1, w2, b2) = classifier.weights();
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(WEIGHTS_MAGIC)?;
    for dim in [
        EMBEDDING_DIM as u32,
        HIDDEN_DIM as u32,
        HIDDEN_DIM as u32,
        N_CLASSES as u32,
    ] {
        f.write_all(&dim.to_le_bytes())?;
    }
    for block in [w1, b1, w2, b2] {
        for v in block {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    f.flush()
}

pub fn load_weights(path: &Path) -> Result<DenseClassifier, WeightFileError> {
    let mut f = io::BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 4];
    read_fully(&mut f, &mut magic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(WeightFileError::BadMagic);
    }
    let mut dims = [0u32; 4];
    for d in &mut dims {
        let mut raw = [0u8; 4];
        read_fully(&mut f, &mut raw)?;
        *d = u32::from_le_bytes(raw);
    }
    if dims
        != [
            EMBEDDING_DIM as u32,
            HIDDEN_DIM as u32,
            HIDDEN_DIM as u32,
            N_CLASSES as u32,
        ]
    {
        return Err(WeightFileError::BadDims(dims));
    }
    let mut read_block = |n: usize| -> Result<Vec<f64>, WeightFileError> {
        let mut out = Vec::with_capacity(n);
        let mut raw = [0u8; 8];
        for _ in 0..n {
            read_fully(&mut f, &mut raw)?;
            out.push(f64::from_le_bytes(raw));
        }
        Ok(out)
    };
    let w1 = read_block(EMBEDDING_DIM * HIDDEN_DIM)?;
    let b1 = read_block(HIDDEN_DIM)?;
    let w2 = read_block(HIDDEN_DIM * N_CLASSES)?;
    let b2 = read_block(N_CLASSES)?;
    DenseClassifier::from_parts(w1, b1, w2, b2).map_err(|_| WeightFileError::BadDims([0; 4]))
}

fn read_fully<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<(), WeightFileError> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            WeightFileError::Truncated
        } else {
            WeightFileError::Io(e)
        }
    })
}

/// Fresh classifier with weights drawn uniformly from [-0.05, 0.05].
pub fn seeded_classifier(seed: u64) -> DenseClassifier {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut block =
        |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.05..0.05)).collect() };
    DenseClassifier::from_parts(
        block(EMBEDDING_DIM * HIDDEN_DIM),
        block(HIDDEN_DIM),
        block(HIDDEN_DIM * N_CLASSES),
        block(N_CLASSES),
    )
    .expect("generated blocks have the right shapes")
}

/// Loads a `keyword<TAB>class` lexicon file into a keyword provider.
pub fn load_lexicon(path: &Path) -> anyhow::Result<KeywordProvider> {
    let text = fs::read_to_string(path)?;
    KeywordProvider::from_lexicon(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Serves embeddings recorded as JSON lines `{"text": ..., "embedding":
/// [...]}`; unknown sentences are an error.
pub struct ReplayProvider {
    embeddings: HashMap<String, Vec<f64>>,
}

#[derive(serde::Deserialize)]
struct ReplayLine {
    text: String,
    embedding: Vec<f64>,
}

impl ReplayProvider {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut embeddings = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ReplayLine = serde_json::from_str(line)
                .map_err(|e| anyhow::anyhow!("{} line {}: {e}", path.display(), idx + 1))?;
            if parsed.embedding.len() != EMBEDDING_DIM {
                anyhow::bail!(
                    "{} line {}: embedding has {} components, expected {EMBEDDING_DIM}",
                    path.display(),
                    idx + 1,
                    parsed.embedding.len()
                );
            }
            embeddings.insert(parsed.text, parsed.embedding);
        }
        Ok(Self { embeddings })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }
}

impl EmbeddingProvider for ReplayProvider {
    fn embed(&self, sentence: &str) -> Result<Vec<f64>, EmbedError> {
        self.embeddings
            .get(sentence)
            .cloned()
            .ok_or_else(|| EmbedError::UnknownSentence(sentence.to_string()))
    }
}
