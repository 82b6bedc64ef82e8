//! The supervisor daemon: launches programs in ascending priority tiers
//! (each tier gated on the previous one being fully Running), restarts
//! crashed programs with exponential backoff, and serves the line-oriented
//! control protocol on a unix socket.

use std::path::PathBuf;
use std::process::Stdio;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{UnixListener, UnixStream};
use tokio::process::{Child, Command};
use tokio::sync::mpsc;

use super::config::{expand_replica, ProgramSpec, SupervisorConfig};

/// Liveness threshold for programs without a health check.
pub const ALIVE_THRESHOLD: Duration = Duration::from_secs(1);
/// Grace period between SIGTERM and SIGKILL on stop.
pub const STOP_GRACE: Duration = Duration::from_secs(10);
/// Consecutive failed starts before a program goes Fatal.
pub const MAX_START_FAILURES: u32 = 5;
const BACKOFF_CAP: Duration = Duration::from_secs(60);
const HEALTH_POLL: Duration = Duration::from_millis(25);
const GATE_POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProgramState {
    Stopped,
    Starting,
    Running,
    Backoff,
    Fatal,
}

impl ProgramState {
    pub fn as_str(self) -> &'static str {
        match self {
            ProgramState::Stopped => "STOPPED",
            ProgramState::Starting => "STARTING",
            ProgramState::Running => "RUNNING",
            ProgramState::Backoff => "BACKOFF",
            ProgramState::Fatal => "FATAL",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Event {
    pub ts_ms: u64,
    pub program: String,
    pub event: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pid: Option<u32>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

/// Point-in-time view of one instance, as reported by `status`.
#[derive(Debug, Clone)]
pub struct InstanceStatus {
    pub key: String,
    pub program: String,
    pub state: ProgramState,
    pub pid: Option<u32>,
    pub uptime: Option<Duration>,
    pub restart_count: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum SupervisorError {
    #[error("tier startup failed: program {0:?} did not reach RUNNING")]
    TierFailed(String),
    #[error("program {0:?} went FATAL")]
    StartFailed(String),
    #[error("unknown program {0:?}")]
    UnknownProgram(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    Start,
    Stop,
}

struct Dynamic {
    state: ProgramState,
    pid: Option<u32>,
    running_since: Option<Instant>,
    restart_count: u64,
}

struct Instance {
    key: String,
    program_index: usize,
    replica: u32,
    dynamic: Mutex<Dynamic>,
    commands: mpsc::UnboundedSender<Cmd>,
}

struct Shared {
    config: SupervisorConfig,
    instances: Vec<Instance>,
    origin: Instant,
    event_file: Option<Mutex<std::fs::File>>,
    events_mem: Mutex<Vec<Event>>,
    client: reqwest::Client,
    shutdown_requested: tokio::sync::Notify,
    shutting_down: AtomicBool,
}

impl Shared {
    fn event(&self, key: &str, kind: &str, pid: Option<u32>, detail: String) {
        let event = Event {
            ts_ms: self.origin.elapsed().as_millis() as u64,
            program: key.to_string(),
            event: kind.to_string(),
            pid,
            detail,
        };
        if let Some(file) = &self.event_file {
            if let Ok(line) = serde_json::to_string(&event) {
                use std::io::Write;
                let mut file = file.lock().expect("event log lock never poisoned");
                let _ = writeln!(file, "{line}");
            }
        }
        self.events_mem
            .lock()
            .expect("event mem lock never poisoned")
            .push(event);
    }

    fn set_state(&self, index: usize, state: ProgramState, pid: Option<u32>) {
        let instance = &self.instances[index];
        let mut dynamic = instance
            .dynamic
            .lock()
            .expect("instance lock never poisoned");
        dynamic.state = state;
        dynamic.pid = pid;
        dynamic.running_since = match state {
            ProgramState::Running => dynamic.running_since.or(Some(Instant::now())),
            _ => None,
        };
    }

    fn spec(&self, index: usize) -> &ProgramSpec {
        &self.config.programs[self.instances[index].program_index]
    }
}

#[derive(Debug, Clone, Default)]
pub struct SupervisorOptions {
    pub socket: Option<PathBuf>,
    pub event_log: Option<PathBuf>,
}

pub struct Supervisor {
    shared: Arc<Shared>,
    socket_path: Option<PathBuf>,
}

impl Supervisor {
    /// Creates the instance runners and (optionally) the control socket.
    /// Nothing is started until [`Supervisor::start_all`].
    pub async fn launch(
        config: SupervisorConfig,
        options: SupervisorOptions,
    ) -> Result<Supervisor, SupervisorError> {
        let event_file = match &options.event_log {
            Some(path) => Some(Mutex::new(
                std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)?,
            )),
            None => None,
        };

        let mut instances = Vec::new();
        let mut receivers = Vec::new();
        for (program_index, program) in config.programs.iter().enumerate() {
            for replica in 0..program.replicas {
                let key = if program.replicas == 1 {
                    program.name.clone()
                } else {
                    format!("{}:{replica}", program.name)
                };
                let (tx, rx) = mpsc::unbounded_channel();
                instances.push(Instance {
                    key,
                    program_index,
                    replica,
                    dynamic: Mutex::new(Dynamic {
                        state: ProgramState::Stopped,
                        pid: None,
                        running_since: None,
                        restart_count: 0,
                    }),
                    commands: tx,
                });
                receivers.push(rx);
            }
        }

        let shared = Arc::new(Shared {
            config,
            instances,
            origin: Instant::now(),
            event_file,
            events_mem: Mutex::new(Vec::new()),
            client: reqwest::Client::new(),
            shutdown_requested: tokio::sync::Notify::new(),
            shutting_down: AtomicBool::new(false),
        });

        for (index, rx) in receivers.into_iter().enumerate() {
            tokio::spawn(run_instance(Arc::clone(&shared), index, rx));
        }

        let socket_path = options.socket;
        if let Some(path) = &socket_path {
            let _ = std::fs::remove_file(path);
            let listener = UnixListener::bind(path)?;
            tokio::spawn(serve_control(Arc::clone(&shared), listener));
        }

        Ok(Supervisor {
            shared,
            socket_path,
        })
    }

    /// Starts every program, one priority tier at a time. A tier launches
    /// only after all programs of lower tiers are Running; on failure,
    /// higher tiers are never started.
    pub async fn start_all(&self) -> Result<(), SupervisorError> {
        let tiers: Vec<(u32, Vec<String>)> = self
            .shared
            .config
            .tiers()
            .into_iter()
            .map(|(p, members)| (p, members.into_iter().map(|m| m.name.clone()).collect()))
            .collect();
        for (priority, members) in tiers {
            log::info!("starting tier {priority}: {}", members.join(", "));
            let tier_started = Instant::now();
            let mut waiting: Vec<usize> = Vec::new();
            for (index, instance) in self.shared.instances.iter().enumerate() {
                let program = &self.shared.config.programs[instance.program_index];
                if program.priority == priority {
                    let _ = instance.commands.send(Cmd::Start);
                    waiting.push(index);
                }
            }
            loop {
                let mut all_running = true;
                for &index in &waiting {
                    let instance = &self.shared.instances[index];
                    let state = instance.dynamic.lock().expect("lock").state;
                    match state {
                        ProgramState::Running => {}
                        ProgramState::Fatal => {
                            return Err(SupervisorError::TierFailed(
                                self.shared.spec(index).name.clone(),
                            ));
                        }
                        _ => {
                            all_running = false;
                            let timeout =
                                self.shared.spec(index).startup_timeout + Duration::from_secs(1);
                            if tier_started.elapsed() > timeout {
                                return Err(SupervisorError::TierFailed(
                                    self.shared.spec(index).name.clone(),
                                ));
                            }
                        }
                    }
                }
                if all_running {
                    break;
                }
                tokio::time::sleep(GATE_POLL).await;
            }
        }
        Ok(())
    }

    pub fn status(&self) -> Vec<InstanceStatus> {
        self.shared
            .instances
            .iter()
            .map(|instance| {
                let dynamic = instance.dynamic.lock().expect("lock");
                InstanceStatus {
                    key: instance.key.clone(),
                    program: self.shared.config.programs[instance.program_index]
                        .name
                        .clone(),
                    state: dynamic.state,
                    pid: dynamic.pid,
                    uptime: dynamic.running_since.map(|t| t.elapsed()),
                    restart_count: dynamic.restart_count,
                }
            })
            .collect()
    }

    pub fn events(&self) -> Vec<Event> {
        self.shared.events_mem.lock().expect("lock").clone()
    }

    /// Sends start to every replica of a program and waits for Running.
    pub async fn start_program(&self, name: &str) -> Result<(), SupervisorError> {
        control_program(&self.shared, name, Cmd::Start).await
    }

    /// Stops every replica of a program (TERM, then KILL after the grace
    /// period) and waits for Stopped.
    pub async fn stop_program(&self, name: &str) -> Result<(), SupervisorError> {
        control_program(&self.shared, name, Cmd::Stop).await
    }

    /// Terminates every child and tears down the control socket.
    pub async fn shutdown(&self) {
        self.shared.shutting_down.store(true, Ordering::SeqCst);
        for instance in &self.shared.instances {
            let _ = instance.commands.send(Cmd::Stop);
        }
        let deadline = Instant::now() + STOP_GRACE + Duration::from_secs(3);
        loop {
            let all_down = self.shared.instances.iter().all(|instance| {
                matches!(
                    instance.dynamic.lock().expect("lock").state,
                    ProgramState::Stopped | ProgramState::Fatal
                )
            });
            if all_down || Instant::now() > deadline {
                break;
            }
            tokio::time::sleep(GATE_POLL).await;
        }
        if let Some(path) = &self.socket_path {
            let _ = std::fs::remove_file(path);
        }
    }

    /// Blocks until a shutdown is requested over the control socket or via
    /// SIGTERM/SIGINT, then terminates all children.
    pub async fn wait_for_shutdown(&self) {
        let mut sigterm = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
            .expect("signal handler installs");
        let mut sigint = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::interrupt())
            .expect("signal handler installs");
        tokio::select! {
            _ = self.shared.shutdown_requested.notified() => {}
            _ = sigterm.recv() => log::info!("SIGTERM received"),
            _ = sigint.recv() => log::info!("SIGINT received"),
        }
        self.shutdown().await;
    }
}

async fn control_program(
    shared: &Arc<Shared>,
    name: &str,
    cmd: Cmd,
) -> Result<(), SupervisorError> {
    let members: Vec<usize> = shared
        .instances
        .iter()
        .enumerate()
        .filter(|(_, i)| shared.config.programs[i.program_index].name == name || i.key == name)
        .map(|(index, _)| index)
        .collect();
    if members.is_empty() {
        return Err(SupervisorError::UnknownProgram(name.to_string()));
    }
    for &index in &members {
        let _ = shared.instances[index].commands.send(cmd);
    }
    let timeout = match cmd {
        Cmd::Start => {
            members
                .iter()
                .map(|&i| shared.spec(i).startup_timeout)
                .max()
                .unwrap_or(Duration::from_secs(30))
                + Duration::from_secs(2)
        }
        Cmd::Stop => STOP_GRACE + Duration::from_secs(3),
    };
    let deadline = Instant::now() + timeout;
    loop {
        let done = members.iter().all(|&index| {
            let state = shared.instances[index].dynamic.lock().expect("lock").state;
            match cmd {
                Cmd::Start => matches!(state, ProgramState::Running | ProgramState::Fatal),
                Cmd::Stop => matches!(state, ProgramState::Stopped | ProgramState::Fatal),
            }
        });
        if done {
            // A start that ended in FATAL is a failure, not a success.
            if cmd == Cmd::Start {
                let fatal = members.iter().any(|&index| {
                    shared.instances[index].dynamic.lock().expect("lock").state
                        == ProgramState::Fatal
                });
                if fatal {
                    return Err(SupervisorError::StartFailed(name.to_string()));
                }
            }
            return Ok(());
        }
        if Instant::now() > deadline {
            return Err(SupervisorError::TierFailed(name.to_string()));
        }
        tokio::time::sleep(GATE_POLL).await;
    }
}

fn spawn_child(spec: &ProgramSpec, replica: u32) -> std::io::Result<Child> {
    let argv: Vec<String> = spec
        .command
        .iter()
        .map(|a| expand_replica(a, replica))
        .collect();
    let mut command = Command::new(&argv[0]);
    command
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .process_group(0)
        .kill_on_drop(true);
    command.spawn()
}

enum StartOutcome {
    Ready,
    ChildExited,
    TimedOut,
    StopRequested,
}

async fn wait_ready(
    shared: &Arc<Shared>,
    spec: &ProgramSpec,
    replica: u32,
    child: &mut Child,
    rx: &mut mpsc::UnboundedReceiver<Cmd>,
) -> StartOutcome {
    let deadline = tokio::time::Instant::now() + spec.startup_timeout;
    match &spec.health_check {
        None => {
            tokio::select! {
                _ = child.wait() => StartOutcome::ChildExited,
                _ = tokio::time::sleep(ALIVE_THRESHOLD) => StartOutcome::Ready,
                cmd = rx.recv() => match cmd {
                    Some(Cmd::Stop) | None => StartOutcome::StopRequested,
                    Some(Cmd::Start) => {
                        // Already starting; keep waiting out the threshold.
                        tokio::select! {
                            _ = child.wait() => StartOutcome::ChildExited,
                            _ = tokio::time::sleep(ALIVE_THRESHOLD) => StartOutcome::Ready,
                        }
                    }
                },
            }
        }
        Some(url_template) => {
            let url = expand_replica(url_template, replica);
            let client = shared.client.clone();
            let probe = async move {
                loop {
                    let healthy = client
                        .get(&url)
                        .timeout(Duration::from_millis(500))
                        .send()
                        .await
                        .map(|r| r.status().is_success())
                        .unwrap_or(false);
                    if healthy {
                        return;
                    }
                    tokio::time::sleep(HEALTH_POLL).await;
                }
            };
            tokio::pin!(probe);
            loop {
                tokio::select! {
                    _ = &mut probe => return StartOutcome::Ready,
                    _ = child.wait() => return StartOutcome::ChildExited,
                    _ = tokio::time::sleep_until(deadline) => return StartOutcome::TimedOut,
                    cmd = rx.recv() => match cmd {
                        Some(Cmd::Stop) | None => return StartOutcome::StopRequested,
                        Some(Cmd::Start) => {}
                    },
                }
            }
        }
    }
}

async fn graceful_kill(child: &mut Child) {
    if let Some(pid) = child.id() {
        unsafe {
            libc::kill(pid as i32, libc::SIGTERM);
        }
        if tokio::time::timeout(STOP_GRACE, child.wait()).await.is_ok() {
            return;
        }
    }
    let _ = child.kill().await;
    let _ = child.wait().await;
}

/// The per-instance lifecycle loop.
async fn run_instance(shared: Arc<Shared>, index: usize, mut rx: mpsc::UnboundedReceiver<Cmd>) {
    let key = shared.instances[index].key.clone();
    let replica = shared.instances[index].replica;
    let mut desired_run = false;
    let mut consecutive_failures: u32 = 0;
    let mut ever_spawned = false;
    let mut automatic_respawn = false;

    loop {
        while !desired_run {
            match rx.recv().await {
                Some(Cmd::Start) => {
                    desired_run = true;
                    consecutive_failures = 0;
                    automatic_respawn = false;
                }
                Some(Cmd::Stop) => {}
                None => return,
            }
        }

        let spec = shared.spec(index).clone();
        shared.set_state(index, ProgramState::Starting, None);
        let mut child = match spawn_child(&spec, replica) {
            Ok(child) => child,
            Err(e) => {
                shared.event(&key, "spawn-error", None, e.to_string());
                consecutive_failures += 1;
                if consecutive_failures >= MAX_START_FAILURES {
                    shared.set_state(index, ProgramState::Fatal, None);
                    shared.event(&key, "fatal", None, String::new());
                    desired_run = false;
                    continue;
                }
                if !backoff(&shared, index, &key, consecutive_failures, &mut rx).await {
                    desired_run = false;
                    shared.set_state(index, ProgramState::Stopped, None);
                }
                continue;
            }
        };
        let pid = child.id();
        if ever_spawned && automatic_respawn {
            let instance = &shared.instances[index];
            instance.dynamic.lock().expect("lock").restart_count += 1;
        }
        ever_spawned = true;
        automatic_respawn = true;
        shared.set_state(index, ProgramState::Starting, pid);
        shared.event(&key, "spawned", pid, String::new());

        match wait_ready(&shared, &spec, replica, &mut child, &mut rx).await {
            StartOutcome::Ready => {
                consecutive_failures = 0;
                shared.set_state(index, ProgramState::Running, pid);
                shared.event(&key, "running", pid, String::new());

                // Supervise until exit or an operator command.
                loop {
                    tokio::select! {
                        status = child.wait() => {
                            let code = status.ok().and_then(|s| s.code());
                            shared.event(&key, "exited", pid, format!("code={code:?}"));
                            if shared.shutting_down.load(Ordering::SeqCst) || !spec.autorestart {
                                shared.set_state(index, ProgramState::Stopped, None);
                                desired_run = false;
                            } else if !backoff(&shared, index, &key, 0, &mut rx).await {
                                desired_run = false;
                                shared.set_state(index, ProgramState::Stopped, None);
                            }
                            break;
                        }
                        cmd = rx.recv() => match cmd {
                            Some(Cmd::Stop) => {
                                graceful_kill(&mut child).await;
                                shared.set_state(index, ProgramState::Stopped, None);
                                shared.event(&key, "stopped", pid, String::new());
                                desired_run = false;
                                break;
                            }
                            Some(Cmd::Start) => {}
                            None => {
                                graceful_kill(&mut child).await;
                                return;
                            }
                        },
                    }
                }
            }
            outcome @ (StartOutcome::ChildExited | StartOutcome::TimedOut) => {
                if matches!(outcome, StartOutcome::TimedOut) {
                    graceful_kill(&mut child).await;
                    shared.event(&key, "start-timeout", pid, String::new());
                } else {
                    shared.event(&key, "exited-early", pid, String::new());
                }
                consecutive_failures += 1;
                if consecutive_failures >= MAX_START_FAILURES {
                    shared.set_state(index, ProgramState::Fatal, None);
                    shared.event(&key, "fatal", None, String::new());
                    desired_run = false;
                } else if !backoff(&shared, index, &key, consecutive_failures, &mut rx).await {
                    desired_run = false;
                    shared.set_state(index, ProgramState::Stopped, None);
                }
            }
            StartOutcome::StopRequested => {
                graceful_kill(&mut child).await;
                shared.set_state(index, ProgramState::Stopped, None);
                shared.event(&key, "stopped", pid, String::new());
                desired_run = false;
            }
        }
    }
}

/// Exponential backoff: 1 s, 2 s, 4 s, ... capped at 60 s. Returns false
/// when interrupted by a stop request.
async fn backoff(
    shared: &Arc<Shared>,
    index: usize,
    key: &str,
    failures: u32,
    rx: &mut mpsc::UnboundedReceiver<Cmd>,
) -> bool {
    let exponent = failures.saturating_sub(1).min(6);
    let delay = Duration::from_secs(1 << exponent).min(BACKOFF_CAP);
    shared.set_state(index, ProgramState::Backoff, None);
    shared.event(key, "backoff", None, format!("delay_s={}", delay.as_secs()));
    tokio::select! {
        _ = tokio::time::sleep(delay) => true,
        cmd = rx.recv() => match cmd {
            Some(Cmd::Start) => true,
            Some(Cmd::Stop) | None => false,
        },
    }
}

// ---- control protocol ------------------------------------------------------

fn render_status(shared: &Arc<Shared>) -> String {
    let mut out = String::new();
    for instance in &shared.instances {
        let dynamic = instance.dynamic.lock().expect("lock");
        let pid = dynamic
            .pid
            .map_or_else(|| "-".to_string(), |p| p.to_string());
        let uptime = dynamic.running_since.map_or_else(
            || "-".to_string(),
            |t| format!("{:.0}", t.elapsed().as_secs_f64()),
        );
        out.push_str(&format!(
            "{} {} pid={} uptime={} restarts={}\n",
            instance.key,
            dynamic.state.as_str(),
            pid,
            uptime,
            dynamic.restart_count
        ));
    }
    out
}

async fn dispatch(shared: &Arc<Shared>, line: &str) -> (String, bool) {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next()) {
        (Some("status"), None) => (render_status(shared), false),
        (Some("start"), Some(name)) => match control_program(shared, name, Cmd::Start).await {
            Ok(()) => (format!("{name}: started\n"), false),
            Err(SupervisorError::UnknownProgram(_)) => {
                (format!("ERROR unknown program {name}\n"), false)
            }
            Err(e) => (format!("ERROR {e}\n"), false),
        },
        (Some("stop"), Some(name)) => match control_program(shared, name, Cmd::Stop).await {
            Ok(()) => (format!("{name}: stopped\n"), false),
            Err(SupervisorError::UnknownProgram(_)) => {
                (format!("ERROR unknown program {name}\n"), false)
            }
            Err(e) => (format!("ERROR {e}\n"), false),
        },
        (Some("restart"), Some(name)) => {
            let stop = control_program(shared, name, Cmd::Stop).await;
            match stop {
                Err(SupervisorError::UnknownProgram(_)) => {
                    (format!("ERROR unknown program {name}\n"), false)
                }
                _ => match control_program(shared, name, Cmd::Start).await {
                    Ok(()) => (format!("{name}: restarted\n"), false),
                    Err(e) => (format!("ERROR {e}\n"), false),
                },
            }
        }
        (Some("shutdown"), None) => ("shutting down\n".to_string(), true),
        _ => (format!("ERROR unknown command {line:?}\n"), false),
    }
}

async fn handle_control_conn(shared: Arc<Shared>, stream: UnixStream) {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    if reader.read_line(&mut line).await.is_err() {
        return;
    }
    let (response, shutdown) = dispatch(&shared, line.trim()).await;
    let mut stream = reader.into_inner();
    let _ = stream.write_all(response.as_bytes()).await;
    let _ = stream.shutdown().await;
    if shutdown {
        shared.shutdown_requested.notify_one();
    }
}

async fn serve_control(shared: Arc<Shared>, listener: UnixListener) {
    loop {
        match listener.accept().await {
            Ok((stream, _)) => {
                tokio::spawn(handle_control_conn(Arc::clone(&shared), stream));
            }
            Err(e) => {
                log::error!("control socket accept failed: {e}");
                return;
            }
        }
    }
}
