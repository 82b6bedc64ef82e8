//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Run with `cargo test --test acceptance -- --nocapture` to see the
//! lines; any failure also fails the test.

mod common;

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{drive_parses, free_port, sample_document, Constellation, ConstellationOptions};
use cvparse_core::routing::ParseMode;

/// Serializes the process-heavy criteria so timing-sensitive medians are
/// not skewed by each other's load.
static HEAVY: OnceLock<tokio::sync::Mutex<()>> = OnceLock::new();

async fn heavy_lock() -> tokio::sync::MutexGuard<'static, ()> {
    HEAVY
        .get_or_init(|| tokio::sync::Mutex::new(()))
        .lock()
        .await
}

fn criterion_line(n: u8, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {n} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance criterion {n} ({name}) failed: {detail}");
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cvparse_core::stats::percentile_sorted(values, 50.0)
}

// --- criterion 1: selection reproduction ------------------------------------

#[test]
fn criterion_1_ahp_reproduction() {
    let cases: [(&str, [&str; 3], [f64; 3]); 3] = [
        (
            "hello_world.tsv",
            ["Falcon", "FastApi", "Flask"],
            [50.5, 31.7, 17.8],
        ),
        (
            "fibonacci.tsv",
            ["Falcon", "FastApi", "Flask"],
            [49.1, 33.0, 17.9],
        ),
        (
            // Alternatives stay in table order; the ranking reorders the
            // runners-up for the IO-bound scenario.
            "file_retrieval.tsv",
            ["Falcon", "Flask", "FastApi"],
            [34.1, 32.7, 33.2],
        ),
    ];

    let started = Instant::now();
    let mut detail = String::new();
    for (file, expected_ranking, expected_totals) in &cases {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("result.json");
        let input = format!("{}/assets/measurements/{file}", env!("CARGO_MANIFEST_DIR"));
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_ahp"))
            .args([
                "evaluate",
                "--input",
                &input,
                "--out",
                out.to_str().unwrap(),
                "--quiet",
            ])
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
        let result: cvparse_core::ahp::AhpResult =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();

        assert_eq!(
            &result.ranking, expected_ranking,
            "{file}: ranking mismatch"
        );
        for (alt, (&got, &want)) in result
            .alternatives
            .iter()
            .zip(result.totals.iter().zip(expected_totals.iter()))
        {
            let got_pct = got * 100.0;
            assert!(
                (got_pct - want).abs() <= 2.5,
                "{file}: {alt} share {got_pct:.1}% vs published {want}% (tolerance 2.5pp)"
            );
        }
        detail.push_str(&format!("{file} ranking {:?}; ", result.ranking));
    }
    let elapsed = started.elapsed();
    let pass = elapsed < Duration::from_secs(1);
    criterion_line(
        1,
        "AHP reproduction",
        pass,
        &format!("{detail}runtime {elapsed:.2?} (< 1 s)"),
    );
}

// --- criterion 2: parallel speedup -------------------------------------------

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn criterion_2_parallel_speedup() {
    let _guard = heavy_lock().await;
    let started = Instant::now();

    let constellation = Constellation::boot(ConstellationOptions {
        predictor_latencies: [0.30, 0.20, 0.50, 0.40, 0.39],
        ..Default::default()
    })
    .await;

    let per_mode = 50;
    let ok = drive_parses(&constellation.gateway_url, "parallel", 10, 5, 4).await;
    assert_eq!(ok, per_mode, "parallel parses failed");
    let ok = drive_parses(&constellation.gateway_url, "sequential", 10, 5, 4).await;
    assert_eq!(ok, per_mode, "sequential parses failed");

    // Split the gateway timing log by mode and compare via the report CLI.
    let records = cvparse::reportio::read_log(&constellation.timing_log).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let par_log = dir.path().join("par.log");
    let seq_log = dir.path().join("seq.log");
    for (path, mode) in [
        (&par_log, ParseMode::Parallel),
        (&seq_log, ParseMode::Sequential),
    ] {
        let lines: String = records
            .iter()
            .filter(|r| r.mode == mode)
            .map(|r| serde_json::to_string(r).unwrap() + "\n")
            .collect();
        std::fs::write(path, lines).unwrap();
    }
    constellation.shutdown().await;

    let output = std::process::Command::new(env!("CARGO_BIN_EXE_report"))
        .args([
            "compare",
            par_log.to_str().unwrap(),
            seq_log.to_str().unwrap(),
            "--json",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let summary: cvparse_core::stats::ComparisonSummary =
        serde_json::from_str(&String::from_utf8_lossy(&output.stdout)).unwrap();

    let elapsed = started.elapsed();
    let pass = summary.speedup_services >= 3.0
        && summary.services_parallel_median_s >= 0.50
        && summary.services_parallel_median_s <= 0.65
        && elapsed < Duration::from_secs(180);
    criterion_line(
        2,
        "parallel speedup",
        pass,
        &format!(
            "speedup {:.2}x (>= 3.0), parallel services median {:.3} s (in [0.50, 0.65]), \
             sequential median {:.3} s, runtime {elapsed:.1?} (< 3 min)",
            summary.speedup_services,
            summary.services_parallel_median_s,
            summary.services_sequential_median_s,
        ),
    );
}

// --- criterion 3: end-to-end latency shape -----------------------------------

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn criterion_3_latency_shape() {
    let _guard = heavy_lock().await;

    // Stage stubs tuned to the reference medians: extract 0.044 s,
    // sectioning 0.016 s, embedding 0.211 s, services 0.568 s (slowest
    // predictor), with two gateway workers so queueing grows with client
    // concurrency.
    let constellation = Constellation::boot(ConstellationOptions {
        predictor_latencies: [0.30, 0.20, 0.568, 0.40, 0.39],
        extractor_delay: 0.044,
        embedder_delay: 0.211,
        sectioning_delay: 0.016,
        gateway_workers: 2,
    })
    .await;

    // Phase 1: single-client parses; the median total must sit within 20%
    // of the 0.839 s stage sum.
    let ok = drive_parses(&constellation.gateway_url, "parallel", 31, 1, 1).await;
    assert_eq!(ok, 31);
    let records = cvparse::reportio::read_log(&constellation.timing_log).unwrap();
    let mut totals: Vec<f64> = records.iter().map(|r| r.timings.total_s).collect();
    let mut services: Vec<f64> = records.iter().map(|r| r.timings.services_s).collect();
    let total_median = median(&mut totals);
    let services_median = median(&mut services);
    let configured_sum = 0.044 + 0.016 + 0.211 + 0.568;
    let total_ok = (total_median - configured_sum).abs() / configured_sum <= 0.20;
    let services_ok = (services_median - 0.568).abs() / 0.568 <= 0.20;

    // Phase 2: response time must not decrease as concurrency grows.
    let doc_path = constellation.dir.path().join("doc.txt");
    std::fs::write(&doc_path, sample_document(0)).unwrap();
    let mut averages = Vec::new();
    for concurrency in [1u32, 3, 5, 10] {
        let json = constellation
            .dir
            .path()
            .join(format!("bench-c{concurrency}.json"));
        let output = tokio::process::Command::new(env!("CARGO_BIN_EXE_bench"))
            .args([
                "-n",
                "12",
                "-c",
                &concurrency.to_string(),
                "-p",
                doc_path.to_str().unwrap(),
                "-T",
                "text/plain",
                "--json",
                json.to_str().unwrap(),
                &format!("{}/parse", constellation.gateway_url),
            ])
            .output()
            .await
            .unwrap();
        assert!(
            output.status.success(),
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
        let run: cvparse::bench::BenchRunFile =
            serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
        assert_eq!(run.report.failed_requests, 0);
        averages.push(run.report.time_per_request_ms / 1000.0);
    }
    constellation.shutdown().await;

    let monotone = averages.windows(2).all(|w| w[1] >= w[0] * 0.99);
    let pass = total_ok && services_ok && monotone;
    criterion_line(
        3,
        "end-to-end latency shape",
        pass,
        &format!(
            "single-client total median {total_median:.3} s (within 20% of {configured_sum:.3}), \
             services median {services_median:.3} s (within 20% of 0.568), \
             bench averages by concurrency {{1,3,5,10}} = {:?} s (non-decreasing: {monotone})",
            averages
                .iter()
                .map(|a| (a * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>(),
        ),
    );
}

// --- criterion 4: bench identities -------------------------------------------

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn criterion_4_bench_identities() {
    let _guard = heavy_lock().await;

    // Raw stub answering every request with exactly 163 wire bytes.
    let body = "x".repeat(98);
    let response =
        format!("HTTP/1.1 200 OK\r\nContent-Type: text/plain\r\nContent-Length: 98\r\n\r\n{body}");
    assert_eq!(response.len(), 163);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        loop {
            let Ok((mut sock, _)) = listener.accept().await else {
                return;
            };
            let response = response.clone();
            tokio::spawn(async move {
                use tokio::io::{AsyncReadExt, AsyncWriteExt};
                let mut buf = [0u8; 8192];
                while matches!(sock.read(&mut buf).await, Ok(n) if n > 0) {
                    if sock.write_all(response.as_bytes()).await.is_err() {
                        break;
                    }
                }
            });
        }
    });

    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("run.json");
    let output = tokio::process::Command::new(env!("CARGO_BIN_EXE_bench"))
        .args([
            "-n",
            "10000",
            "-c",
            "30",
            "--json",
            json.to_str().unwrap(),
            &format!("http://{addr}/"),
        ])
        .output()
        .await
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let run: cvparse::bench::BenchRunFile =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let report = &run.report;

    let n_identity = report.requests_per_second * report.time_taken_for_tests_s;
    let n_rel = (n_identity - 10000.0).abs() / 10000.0;
    let t_identity = report.transfer_rate_bytes_per_s * report.time_taken_for_tests_s;
    let t_rel = (t_identity - report.total_transferred as f64) / report.total_transferred as f64;
    let pass = n_rel < 0.001
        && t_rel.abs() < 0.001
        && report.total_transferred == 1_630_000
        && report.failed_requests == 0;
    criterion_line(
        4,
        "bench identities",
        pass,
        &format!(
            "rps*T vs N rel err {n_rel:.2e} (< 1e-3), rate*T vs bytes rel err {:.2e} (< 1e-3), \
             total transferred {} (= 1,630,000), failed {}",
            t_rel.abs(),
            report.total_transferred,
            report.failed_requests,
        ),
    );
}

// --- criterion 5: balancer semantics ------------------------------------------

#[test]
fn criterion_5_balancer_semantics() {
    use cvparse_core::upstream::{UpstreamConfig, UpstreamEvent, UpstreamServer, UpstreamState};
    use rand::{Rng, SeedableRng};

    let pool = |k: usize, backups: usize| {
        let mut servers: Vec<UpstreamServer> = (0..k)
            .map(|i| UpstreamServer::new(format!("p{i}:80")))
            .collect();
        for i in 0..backups {
            let mut s = UpstreamServer::new(format!("b{i}:80"));
            s.backup = true;
            servers.push(s);
        }
        UpstreamConfig::new("pool", servers, 0).unwrap()
    };

    // (a) Round-robin fairness +/- 1 over 1000 requests, 2..=5 primaries.
    for k in 2..=5usize {
        let mut state = UpstreamState::new(pool(k, 0));
        let mut counts = vec![0u32; k];
        for t in 0..1000u64 {
            counts[state.pick_server(t).unwrap()] += 1;
        }
        let max = *counts.iter().max().unwrap();
        let min = *counts.iter().min().unwrap();
        assert!(max - min <= 1, "k={k}: spread {counts:?}");
    }

    // (b) Three failures within 15 s trip a server for exactly 15 s.
    let mut state = UpstreamState::new(pool(1, 0));
    for t in [1_000, 6_000, 11_000] {
        state.record_result("p0:80", false, t).unwrap();
    }
    assert!(!state.states()[0].available(11_001));
    assert!(!state.states()[0].available(26_000 - 1));
    assert!(state.states()[0].available(26_000));
    assert!(state.pick_server(25_999).is_err());
    assert_eq!(state.pick_server(26_000).unwrap(), 0);

    // (c) Backup exclusivity: zero requests while any primary is available,
    // all requests when none is.
    let mut state = UpstreamState::new(pool(2, 1));
    for t in 0..100u64 {
        let picked = state.pick_server(t).unwrap();
        assert!(!state.config().servers[picked].backup);
    }
    for addr in ["p0:80", "p1:80"] {
        for _ in 0..3 {
            state.record_result(addr, false, 200).unwrap();
        }
    }
    for t in 201..301u64 {
        let picked = state.pick_server(t).unwrap();
        assert!(state.config().servers[picked].backup, "t={t}");
    }

    // (d) Replaying a recorded event log reproduces identical state.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for round in 0..30 {
        let config = pool(rng.random_range(1..5), 1);
        let mut live = UpstreamState::new(config.clone());
        let mut log = Vec::new();
        let mut now = 0u64;
        for _ in 0..500 {
            now += rng.random_range(0..2_500);
            let event = if rng.random_bool(0.5) {
                UpstreamEvent::Pick { now_ms: now }
            } else {
                let servers = &live.config().servers;
                UpstreamEvent::Result {
                    address: servers[rng.random_range(0..servers.len())].address.clone(),
                    success: rng.random_bool(0.5),
                    now_ms: now,
                }
            };
            live.apply(&event);
            log.push(event);
        }
        let replayed = UpstreamState::replay(config, &log);
        assert_eq!(live, replayed, "round {round}: replay diverged");
    }

    criterion_line(
        5,
        "balancer semantics",
        true,
        "fairness +/-1 over 1000 picks (k=2..5); 3 failures in 15 s trip for exactly 15 s; \
         backup exclusivity holds; 30 random event logs replay to identical state",
    );
}

// --- criterion 6: supervisor ordering -----------------------------------------

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn criterion_6_supervisor_ordering() {
    use cvparse::supervisor::daemon::ProgramState;
    use cvparse::supervisor::{Supervisor, SupervisorConfig, SupervisorOptions};
    use std::collections::BTreeMap;

    let _guard = heavy_lock().await;

    fn four_tier_stub_config() -> (SupervisorConfig, BTreeMap<String, u32>) {
        let mut text = String::new();
        let mut tiers = BTreeMap::new();
        let mut add = |name: &str, priority: u32, text: &mut String| {
            let port = free_port();
            text.push_str(&format!(
                "[program:{name}]\n\
                 command={} --listen 127.0.0.1:{port} --name {name}\n\
                 priority={priority}\n\
                 healthcheck=http://127.0.0.1:{port}/health\n\
                 startup_timeout=15s\n\n",
                env!("CARGO_BIN_EXE_stubsvc")
            ));
            tiers.insert(name.to_string(), priority);
        };
        add("tier0-extract", 0, &mut text);
        add("tier1-embed", 1, &mut text);
        for i in 0..5 {
            add(&format!("tier2-predict-{i}"), 2, &mut text);
        }
        add("tier3-gateway", 3, &mut text);
        (SupervisorConfig::parse(&text).unwrap(), tiers)
    }

    // 100 boots, zero ordering violations.
    let boots = 100;
    for boot in 0..boots {
        let (config, tiers) = four_tier_stub_config();
        let supervisor = Supervisor::launch(config, SupervisorOptions::default())
            .await
            .unwrap();
        supervisor
            .start_all()
            .await
            .unwrap_or_else(|e| panic!("boot {boot}: {e}"));

        // Ordering: every lower tier fully Running before a higher tier's
        // first spawn.
        let events = supervisor.events();
        let mut running_max: BTreeMap<u32, u64> = BTreeMap::new();
        let mut spawn_min: BTreeMap<u32, u64> = BTreeMap::new();
        for event in &events {
            let Some(&tier) = tiers.get(&event.program) else {
                continue;
            };
            match event.event.as_str() {
                "running" => {
                    let slot = running_max.entry(tier).or_insert(0);
                    *slot = (*slot).max(event.ts_ms);
                }
                "spawned" => {
                    let slot = spawn_min.entry(tier).or_insert(u64::MAX);
                    *slot = (*slot).min(event.ts_ms);
                }
                _ => {}
            }
        }
        for window in [0u32, 1, 2, 3].windows(2) {
            let (lower, higher) = (window[0], window[1]);
            assert!(
                running_max[&lower] <= spawn_min[&higher],
                "boot {boot}: tier {lower} finished running at {} ms but tier {higher} \
                 spawned at {} ms",
                running_max[&lower],
                spawn_min[&higher]
            );
        }
        supervisor.shutdown().await;
    }

    // Restart isolation: killing one tier-2 replica leaves every other
    // program's restart_count untouched.
    let (config, _) = four_tier_stub_config();
    let supervisor = Supervisor::launch(config, SupervisorOptions::default())
        .await
        .unwrap();
    supervisor.start_all().await.unwrap();
    let before = supervisor.status();
    let victim = before.iter().find(|s| s.key == "tier2-predict-2").unwrap();
    unsafe {
        libc::kill(victim.pid.unwrap() as i32, libc::SIGKILL);
    }
    let deadline = Instant::now() + Duration::from_secs(15);
    loop {
        tokio::time::sleep(Duration::from_millis(50)).await;
        let status = supervisor.status();
        let victim_now = status.iter().find(|s| s.key == "tier2-predict-2").unwrap();
        if victim_now.restart_count >= 1 && victim_now.state == ProgramState::Running {
            break;
        }
        assert!(Instant::now() < deadline, "victim never restarted");
    }
    for status in supervisor.status() {
        if status.key != "tier2-predict-2" {
            assert_eq!(
                status.restart_count, 0,
                "{}: restart count changed by a sibling's crash",
                status.key
            );
        }
    }
    supervisor.shutdown().await;

    criterion_line(
        6,
        "supervisor ordering",
        true,
        &format!(
            "{boots} boots with zero start-order violations; killing one tier-2 replica \
             left all other restart counts at 0"
        ),
    );
}

// --- criterion 7: model store round-trip ---------------------------------------

#[test]
fn criterion_7_modelstore_round_trip() {
    use cvparse::modelstore::ModelStore;
    use rand::{Rng, SeedableRng};

    let chunk_size: u64 = 64;
    let dir = tempfile::tempdir().unwrap();
    let store = ModelStore::open(dir.path()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7_700);

    let payloads = 500;
    let mut corruption_checks = 0usize;
    for i in 0..payloads {
        let size = rng.random_range(0..=(4 * chunk_size + 17)) as usize;
        let data: Vec<u8> = (0..size).map(|_| rng.random()).collect();
        let meta = store
            .put_file(&format!("payload-{i}"), &data, chunk_size)
            .unwrap();
        let back = store.get_file(&meta.file_id).unwrap();
        assert_eq!(back, data, "payload {i} (size {size}) corrupted in transit");

        if meta.n_chunks > 0 {
            // Flip one random byte of one random chunk; retrieval must fail.
            let chunk_index = rng.random_range(0..meta.n_chunks);
            let chunk_path = dir
                .path()
                .join(&meta.file_id)
                .join(format!("{chunk_index}.chunk"));
            let mut bytes = std::fs::read(&chunk_path).unwrap();
            let at = rng.random_range(0..bytes.len());
            bytes[at] ^= 1 << rng.random_range(0..8);
            std::fs::write(&chunk_path, &bytes).unwrap();
            assert!(
                store.get_file(&meta.file_id).is_err(),
                "payload {i}: single-byte corruption in chunk {chunk_index} went undetected"
            );
            corruption_checks += 1;
            store.delete_file(&meta.file_id).unwrap();
        }
    }

    criterion_line(
        7,
        "modelstore round-trip",
        true,
        &format!(
            "{payloads} random payloads (0..=273 bytes at chunk size 64) round-tripped \
             byte-identically; {corruption_checks}/{corruption_checks} injected corruptions detected"
        ),
    );
}

// --- criterion 8: segmenter shape ----------------------------------------------

#[test]
fn criterion_8_segmenter_shape() {
    use cvparse_core::segmenter::{DenseClassifier, EMBEDDING_DIM, HIDDEN_DIM, N_CLASSES};
    use rand::{Rng, SeedableRng};

    let classifier = cvparse::segio::seeded_classifier(1);
    let (layer1, layer2) = classifier.layer_parameter_counts();
    assert_eq!(classifier.parameter_count(), 154_604);
    assert_eq!(layer1, 153_800);
    assert_eq!(layer2, 804);

    /// Independent nested-loop forward pass.
    fn oracle(c: &DenseClassifier, x: &[f64]) -> [f64; N_CLASSES] {
        let (w1, b1, w2, b2) = c.weights();
        let mut hidden = vec![0.0; HIDDEN_DIM];
        for j in 0..HIDDEN_DIM {
            let mut acc = b1[j];
            for i in 0..EMBEDDING_DIM {
                acc += x[i] * w1[i * HIDDEN_DIM + j];
            }
            hidden[j] = acc.max(0.0);
        }
        let mut logits = [0.0; N_CLASSES];
        for k in 0..N_CLASSES {
            let mut acc = b2[k];
            for j in 0..HIDDEN_DIM {
                acc += hidden[j] * w2[j * N_CLASSES + k];
            }
            logits[k] = acc;
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let mut out = [0.0; N_CLASSES];
        for k in 0..N_CLASSES {
            out[k] = exps[k] / sum;
        }
        out
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(88);
    let mut max_err = 0.0f64;
    let mut max_sum_err = 0.0f64;
    for case in 0..100u64 {
        let classifier = cvparse::segio::seeded_classifier(case);
        let x: Vec<f64> = (0..EMBEDDING_DIM)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let got = classifier.forward(&x).unwrap();
        let want = oracle(&classifier, &x);
        for k in 0..N_CLASSES {
            max_err = max_err.max((got[k] - want[k]).abs());
        }
        let sum: f64 = got.iter().sum();
        max_sum_err = max_sum_err.max((sum - 1.0).abs());
    }
    let pass = max_err < 1e-9 && max_sum_err < 1e-6;
    criterion_line(
        8,
        "segmenter shape",
        pass,
        &format!(
            "154,604 parameters (153,800 + 804); 100 seeded forwards vs naive oracle, \
             max |diff| {max_err:.2e} (< 1e-9); max |sum - 1| {max_sum_err:.2e} (< 1e-6)"
        ),
    );
}
