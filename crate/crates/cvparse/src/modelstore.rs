//! Chunked binary artifact storage. Files are split into fixed-size chunks
//! with a SHA-256 digest over the whole content; a file becomes visible only
//! when its metadata is committed, so readers never observe partial uploads.
//! The persistence layer is pluggable; the bundled backend keeps each file
//! as a directory of chunk files plus a `meta.json` committed by atomic
//! rename.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// 255 KiB, the conventional chunk size of the document store this layout
/// mirrors.
pub const DEFAULT_CHUNK_SIZE: u64 = 255 * 1024;

/// Metadata of one committed file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredFile {
    pub file_id: String,
    pub filename: String,
    pub length: u64,
    pub chunk_size: u64,
    pub n_chunks: u64,
    /// Hex SHA-256 of the full content.
    pub sha256: String,
    /// Unix seconds.
    pub upload_time_s: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("chunk size must be at least 1")]
    InvalidChunkSize,
    #[error("file {0} not found")]
    FileNotFound(String),
    #[error("file {file_id}: stored content fails checksum verification")]
    ChecksumMismatch { file_id: String },
    #[error("file {file_id}: chunk {index} is missing")]
    MissingChunk { file_id: String, index: u64 },
    #[error("storage is full")]
    StorageFull,
    #[error("storage backend error: {0}")]
    Io(#[from] io::Error),
}

fn map_io(e: io::Error) -> StoreError {
    if e.raw_os_error() == Some(libc::ENOSPC) {
        StoreError::StorageFull
    } else {
        StoreError::Io(e)
    }
}

/// Persistence operations a backend must provide. Chunks written before
/// `commit_meta` must stay invisible to `read_meta`/`list_meta`.
pub trait StorageBackend: Send + Sync {
    fn write_chunk(&self, file_id: &str, index: u64, data: &[u8]) -> io::Result<()>;
    fn read_chunk(&self, file_id: &str, index: u64) -> io::Result<Option<Vec<u8>>>;
    /// Atomically publishes the file metadata; the file is committed once
    /// this returns.
    fn commit_meta(&self, meta: &StoredFile) -> io::Result<()>;
    fn read_meta(&self, file_id: &str) -> io::Result<Option<StoredFile>>;
    fn list_meta(&self) -> io::Result<Vec<StoredFile>>;
    /// Removes metadata and chunks. Returns whether a committed file existed.
    fn delete(&self, file_id: &str) -> io::Result<bool>;
}

/// Directory-per-file filesystem backend.
pub struct FsBackend {
    root: PathBuf,
}

impl FsBackend {
    pub fn new(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    fn file_dir(&self, file_id: &str) -> PathBuf {
        self.root.join(file_id)
    }

    fn chunk_path(&self, file_id: &str, index: u64) -> PathBuf {
        self.file_dir(file_id).join(format!("{index}.chunk"))
    }

    fn meta_path(&self, file_id: &str) -> PathBuf {
        self.file_dir(file_id).join("meta.json")
    }
}

impl StorageBackend for FsBackend {
    fn write_chunk(&self, file_id: &str, index: u64, data: &[u8]) -> io::Result<()> {
        fs::create_dir_all(self.file_dir(file_id))?;
        fs::write(self.chunk_path(file_id, index), data)
    }

    fn read_chunk(&self, file_id: &str, index: u64) -> io::Result<Option<Vec<u8>>> {
        match fs::read(self.chunk_path(file_id, index)) {
            Ok(data) => Ok(Some(data)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn commit_meta(&self, meta: &StoredFile) -> io::Result<()> {
        let dir = self.file_dir(&meta.file_id);
        fs::create_dir_all(&dir)?;
        let tmp = dir.join("meta.json.tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(serde_json::to_string_pretty(meta)?.as_bytes())?;
        f.sync_all()?;
        drop(f);
        // The rename is the commit point.
        fs::rename(tmp, self.meta_path(&meta.file_id))
    }

    fn read_meta(&self, file_id: &str) -> io::Result<Option<StoredFile>> {
        match fs::read(self.meta_path(file_id)) {
            Ok(data) => Ok(serde_json::from_slice(&data).ok()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn list_meta(&self) -> io::Result<Vec<StoredFile>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            if let Some(name) = entry.file_name().to_str() {
                if let Some(meta) = self.read_meta(name)? {
                    out.push(meta);
                }
            }
        }
        Ok(out)
    }

    fn delete(&self, file_id: &str) -> io::Result<bool> {
        let meta = self.meta_path(file_id);
        match fs::remove_file(&meta) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(false),
            Err(e) => return Err(e),
        }
        // Metadata gone: the file is unlistable, chunks are now garbage.
        fs::remove_dir_all(self.file_dir(file_id))?;
        Ok(true)
    }
}

/// The store facade used by services and the CLI.
#[derive(Clone)]
pub struct ModelStore {
    backend: Arc<dyn StorageBackend>,
}

impl ModelStore {
    pub fn new(backend: Arc<dyn StorageBackend>) -> Self {
        Self { backend }
    }

    /// Opens the filesystem-backed store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        Ok(Self::new(Arc::new(FsBackend::new(root)?)))
    }

    pub fn put_file(
        &self,
        filename: &str,
        data: &[u8],
        chunk_size: u64,
    ) -> Result<StoredFile, StoreError> {
        self.put_file_with_id(
            &uuid::Uuid::new_v4().to_string(),
            filename,
            data,
            chunk_size,
        )
    }

    /// Stores under a caller-chosen id. Ids are never reused; storing over
    /// an existing id is an error.
    pub fn put_file_with_id(
        &self,
        file_id: &str,
        filename: &str,
        data: &[u8],
        chunk_size: u64,
    ) -> Result<StoredFile, StoreError> {
        if chunk_size < 1 {
            return Err(StoreError::InvalidChunkSize);
        }
        if self.backend.read_meta(file_id).map_err(map_io)?.is_some() {
            return Err(StoreError::Io(io::Error::new(
                io::ErrorKind::AlreadyExists,
                format!("file id {file_id} already exists"),
            )));
        }
        let mut n_chunks = 0u64;
        for (index, chunk) in data.chunks(chunk_size as usize).enumerate() {
            self.backend
                .write_chunk(file_id, index as u64, chunk)
                .map_err(map_io)?;
            n_chunks = index as u64 + 1;
        }
        let meta = StoredFile {
            file_id: file_id.to_string(),
            filename: filename.to_string(),
            length: data.len() as u64,
            chunk_size,
            n_chunks,
            sha256: hex::encode(Sha256::digest(data)),
            upload_time_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        };
        self.backend.commit_meta(&meta).map_err(map_io)?;
        Ok(meta)
    }

    pub fn stat(&self, file_id: &str) -> Result<StoredFile, StoreError> {
        self.backend
            .read_meta(file_id)
            .map_err(map_io)?
            .ok_or_else(|| StoreError::FileNotFound(file_id.to_string()))
    }

    /// Reassembles and verifies a file. The digest is checked before any
    /// bytes are returned.
    pub fn get_file(&self, file_id: &str) -> Result<Vec<u8>, StoreError> {
        let meta = self.stat(file_id)?;
        let mut data = Vec::with_capacity(meta.length as usize);
        for index in 0..meta.n_chunks {
            let chunk = self
                .backend
                .read_chunk(file_id, index)
                .map_err(map_io)?
                .ok_or_else(|| StoreError::MissingChunk {
                    file_id: file_id.to_string(),
                    index,
                })?;
            data.extend_from_slice(&chunk);
        }
        if data.len() as u64 != meta.length || hex::encode(Sha256::digest(&data)) != meta.sha256 {
            return Err(StoreError::ChecksumMismatch {
                file_id: file_id.to_string(),
            });
        }
        Ok(data)
    }

    /// Committed files only, newest first.
    pub fn list_files(&self) -> Result<Vec<StoredFile>, StoreError> {
        let mut files = self.backend.list_meta().map_err(map_io)?;
        files.sort_by(|a, b| {
            b.upload_time_s
                .partial_cmp(&a.upload_time_s)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.file_id.cmp(&b.file_id))
        });
        Ok(files)
    }

    pub fn delete_file(&self, file_id: &str) -> Result<(), StoreError> {
        if self.backend.delete(file_id).map_err(map_io)? {
            Ok(())
        } else {
            Err(StoreError::FileNotFound(file_id.to_string()))
        }
    }
}
