//! Shared helpers for integration tests: free ports, synthetic documents,
//! and booting the full service constellation through the supervisor binary.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use cvparse::modelstore::ModelStore;
use cvparse_core::ner::{PatternRules, SectionKind};

pub fn free_port() -> u16 {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").expect("bind ephemeral port");
    listener.local_addr().expect("local addr").port()
}

pub async fn wait_http_ok(client: &reqwest::Client, url: &str, timeout: Duration) -> bool {
    let deadline = Instant::now() + timeout;
    while Instant::now() < deadline {
        if let Ok(resp) = client
            .get(url)
            .timeout(Duration::from_millis(500))
            .send()
            .await
        {
            if resp.status().is_success() {
                return true;
            }
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    false
}

/// A synthetic CV-style document touching all four section classes, so every
/// parse fans out to all five services.
pub fn sample_document(i: usize) -> String {
    format!(
        "Name: Candidate {i}\n\
         reach me at candidate{i}@example.com or phone 987654{i:04}\n\
         Languages known: English, Hindi\n\
         B.Tech in Computer Science from Some University, 2015\n\
         Software Engineer at Acme since 2018\n\
         Worked as developer with broad responsibilities\n\
         Skills: Python, Rust, SQL and Docker\n\
         Functional area: Information Technology\n\
         Hobbies: chess and long walks"
    )
}

/// Stores the bundled pattern artifacts and returns kind -> model id.
pub fn seed_pattern_store(root: &std::path::Path) -> BTreeMap<SectionKind, String> {
    let store = ModelStore::open(root).expect("open store");
    SectionKind::ALL
        .iter()
        .map(|&kind| {
            let meta = store
                .put_file(
                    &format!("{kind}.tsv"),
                    PatternRules::default_source(kind).as_bytes(),
                    4096,
                )
                .expect("store pattern file");
            (kind, meta.file_id)
        })
        .collect()
}

pub struct ConstellationOptions {
    /// Fixed latency per predictor, in listing order (personal information,
    /// education, work experience, skills, functional area).
    pub predictor_latencies: [f64; 5],
    pub extractor_delay: f64,
    pub embedder_delay: f64,
    pub sectioning_delay: f64,
    pub gateway_workers: usize,
}

impl Default for ConstellationOptions {
    fn default() -> Self {
        Self {
            predictor_latencies: [0.0; 5],
            extractor_delay: 0.0,
            embedder_delay: 0.0,
            sectioning_delay: 0.0,
            gateway_workers: 0,
        }
    }
}

pub struct Constellation {
    pub dir: tempfile::TempDir,
    pub gateway_url: String,
    pub timing_log: PathBuf,
    pub event_log: PathBuf,
    pub socket: PathBuf,
    supervise: Child,
}

impl Constellation {
    /// Boots extractor, embedder, the five predictors and the gateway via
    /// the supervisor binary, then waits for the gateway health check.
    pub async fn boot(options: ConstellationOptions) -> Constellation {
        let dir = tempfile::tempdir().expect("tempdir");
        let store_root = dir.path().join("store");
        let models = seed_pattern_store(&store_root);

        let extractor_port = free_port();
        let embedder_port = free_port();
        let predictor_ports: Vec<u16> = (0..5).map(|_| free_port()).collect();
        let gateway_port = free_port();

        let mut conf = String::new();
        conf.push_str(&format!(
            "[program:text-extractor]\n\
             command={} --listen 127.0.0.1:{extractor_port} --delay {}\n\
             priority=0\n\
             healthcheck=http://127.0.0.1:{extractor_port}/health\n\n",
            env!("CARGO_BIN_EXE_extractor"),
            options.extractor_delay,
        ));
        conf.push_str(&format!(
            "[program:embedding-provider]\n\
             command={} --listen 127.0.0.1:{embedder_port} --delay {}\n\
             priority=1\n\
             healthcheck=http://127.0.0.1:{embedder_port}/health\n\n",
            env!("CARGO_BIN_EXE_embedder"),
            options.embedder_delay,
        ));
        for (slot, &kind) in SectionKind::ALL.iter().enumerate() {
            let port = predictor_ports[slot];
            conf.push_str(&format!(
                "[program:predictor-{}]\n\
                 command={} --listen 127.0.0.1:{port} --kind {kind} --store {} --model-id {} --latency fixed:{}\n\
                 priority=2\n\
                 healthcheck=http://127.0.0.1:{port}/health\n\n",
                kind.as_str().replace('_', "-"),
                env!("CARGO_BIN_EXE_predictor"),
                store_root.display(),
                models[&kind],
                options.predictor_latencies[slot],
            ));
        }
        let timing_log = dir.path().join("timing.log");
        let predictor_flags: String = SectionKind::ALL
            .iter()
            .enumerate()
            .map(|(slot, &kind)| {
                format!(
                    " --predictor {kind}=http://127.0.0.1:{}",
                    predictor_ports[slot]
                )
            })
            .collect();
        conf.push_str(&format!(
            "[program:gateway]\n\
             command={} --listen 127.0.0.1:{gateway_port} --extractor-url http://127.0.0.1:{extractor_port} --embedder-url http://127.0.0.1:{embedder_port}{predictor_flags} --sectioning-delay {} --workers {} --timing-log {}\n\
             priority=3\n\
             healthcheck=http://127.0.0.1:{gateway_port}/health\n",
            env!("CARGO_BIN_EXE_gateway"),
            options.sectioning_delay,
            options.gateway_workers,
            timing_log.display(),
        ));

        let conf_path = dir.path().join("constellation.conf");
        std::fs::write(&conf_path, conf).expect("write conf");
        let socket = dir.path().join("supervise.sock");
        let event_log = dir.path().join("events.jsonl");

        let supervise = Command::new(env!("CARGO_BIN_EXE_supervise"))
            .arg("-c")
            .arg(&conf_path)
            .arg("--socket")
            .arg(&socket)
            .arg("--event-log")
            .arg(&event_log)
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn supervise");

        let gateway_url = format!("http://127.0.0.1:{gateway_port}");
        let client = reqwest::Client::new();
        let healthy = wait_http_ok(
            &client,
            &format!("{gateway_url}/health"),
            Duration::from_secs(60),
        )
        .await;
        assert!(
            healthy,
            "constellation did not become healthy; events: {:?}",
            std::fs::read_to_string(&event_log).unwrap_or_default()
        );

        Constellation {
            dir,
            gateway_url,
            timing_log,
            event_log,
            socket,
            supervise,
        }
    }

    pub async fn shutdown(mut self) {
        let _ = cvparse::supervisor::ctl::send_command(&self.socket, "shutdown").await;
        let deadline = Instant::now() + Duration::from_secs(15);
        loop {
            match self.supervise.try_wait() {
                Ok(Some(_)) => break,
                _ if Instant::now() > deadline => {
                    let _ = self.supervise.kill();
                    break;
                }
                _ => tokio::time::sleep(Duration::from_millis(20)).await,
            }
        }
    }
}

impl Drop for Constellation {
    fn drop(&mut self) {
        // Last-resort cleanup when a test aborts before shutdown().
        let _ = self.supervise.kill();
        let _ = self.supervise.wait();
    }
}

/// Runs `n_docs * rounds` parses against the gateway with a small pool of
/// concurrent clients; returns the count of successful parses.
pub async fn drive_parses(
    gateway_url: &str,
    mode: &str,
    n_docs: usize,
    rounds: usize,
    client_concurrency: usize,
) -> usize {
    let client = reqwest::Client::new();
    let jobs: Vec<(usize, usize)> = (0..rounds)
        .flat_map(|round| (0..n_docs).map(move |doc| (round, doc)))
        .collect();
    let jobs = std::sync::Arc::new(std::sync::Mutex::new(jobs));
    let mut workers = Vec::new();
    for _ in 0..client_concurrency {
        let client = client.clone();
        let jobs = std::sync::Arc::clone(&jobs);
        let url = format!("{gateway_url}/parse");
        let mode = mode.to_string();
        workers.push(tokio::spawn(async move {
            let mut ok = 0usize;
            loop {
                let job = jobs.lock().expect("job queue lock").pop();
                let Some((_round, doc)) = job else { break };
                let response = client
                    .post(&url)
                    .header("content-type", "text/plain")
                    .header("x-parse-mode", &mode)
                    .header("x-document-id", format!("doc-{doc}"))
                    .body(sample_document(doc))
                    .timeout(Duration::from_secs(30))
                    .send()
                    .await;
                if matches!(&response, Ok(r) if r.status().is_success()) {
                    ok += 1;
                }
            }
            ok
        }));
    }
    let mut total = 0;
    for worker in workers {
        total += worker.await.expect("client worker");
    }
    total
}
