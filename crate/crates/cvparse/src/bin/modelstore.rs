//! Operator CLI for the chunked model store.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use cvparse::modelstore::{ModelStore, DEFAULT_CHUNK_SIZE};

#[derive(Parser)]
#[command(name = "modelstore", about = "Chunked binary artifact storage")]
struct Cli {
    /// Store root directory.
    #[arg(long, default_value = "modelstore-data")]
    store: PathBuf,
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Store a file; prints the assigned file id.
    Put {
        path: PathBuf,
        /// Explicit file id (must be unused).
        #[arg(long)]
        id: Option<String>,
        #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
        chunk_size: u64,
    },
    /// Retrieve a file by id.
    Get {
        id: String,
        /// Output path (stdout when omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// List committed files.
    Ls,
    /// Delete a file by id.
    Rm { id: String },
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    let store = ModelStore::open(&cli.store)?;
    match cli.command {
        Commands::Put {
            path,
            id,
            chunk_size,
        } => {
            let data = std::fs::read(&path)?;
            let filename = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into());
            let meta = match id {
                Some(id) => store.put_file_with_id(&id, &filename, &data, chunk_size)?,
                None => store.put_file(&filename, &data, chunk_size)?,
            };
            println!("{}", meta.file_id);
        }
        Commands::Get { id, out } => {
            let data = store.get_file(&id)?;
            match out {
                Some(path) => std::fs::write(path, data)?,
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&data)?;
                }
            }
        }
        Commands::Ls => {
            for meta in store.list_files()? {
                println!(
                    "{}  {:>10}  chunks={:<4} {}",
                    meta.file_id, meta.length, meta.n_chunks, meta.filename
                );
            }
        }
        Commands::Rm { id } => store.delete_file(&id)?,
    }
    Ok(())
}
