//! Service, storage and CLI layer over [`cvparse_core`]: the HTTP load
//! benchmark, the parse gateway and its section predictor services, the
//! upstream balancer, the priority-ordered process supervisor, the chunked
//! model store and the timing report tools.

pub use cvparse_core as core;

pub mod ahpio;
pub mod balancer;
pub mod bench;
pub mod embedder;
pub mod extractor;
pub mod gateway;
pub mod httpc;
pub mod latency;
pub mod modelstore;
pub mod predictor;
pub mod reportio;
pub mod segio;
pub mod supervisor;
pub mod svc;
