//! The `jacette` command line. Exit status: 0 on success, 1 when the
//! program or runtime fails, 2 on usage errors.

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use jacette::actions::{load_manifest, serve_actions, ActionRegistry, ManifestEntry};
use jacette::bench::{self, Mix, OrchestratorBench, Policy, RequestKind, WorkloadSpec};
use jacette::corpus;
use jacette::jsorc::{
    analyze_application, read_profiles, solve_config, spawn_controller, write_profiles, AnalyticModel, DecisionLog,
    LiveEvaluator, LocalEndpointManager, ModelEvaluator, Orchestrator, Reconfigurator,
};
use jacette::metrics::MetricsRecorder;
use jacette::seed::parse_seed;
use jacette::service::{self, AppState};
use jacette::{ContextMap, ObjectId, Runtime};

use config::{GlobalFlags, RuntimeConfig};

#[derive(Debug, Parser)]
#[command(name = "jacette", version, about = "Data-spatial graph runtime and componentization orchestrator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one walker and print its report as JSON
    Run {
        program: PathBuf,
        walker: String,
        /// Start node: a seed label or a numeric id
        #[arg(long)]
        start: String,
        /// Walker arguments as a JSON object
        #[arg(long)]
        args: Option<String>,
        /// Seed graph to create before running
        #[arg(long)]
        seed_file: Option<PathBuf>,
    },
    /// Serve the walker HTTP API
    Serve {
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long)]
        seed_file: Option<PathBuf>,
        /// Profile file to read, or to write after profiling
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Serve actions over the line protocol
    ServeActions {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Run an experiment and write CSV
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Profile the manifest actions and solve a configuration offline
    Orchestrate {
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// A running action server to profile against
        #[arg(long)]
        remote: Option<SocketAddr>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Check the program corpus against its goldens
    Corpus {
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Rewrite goldens from current behavior
        #[arg(long)]
        bless: bool,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct WorkloadFlags {
    /// JSON workload file; flags override its fields
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub clients: Option<usize>,
    /// Requests per client; replaces the duration
    #[arg(long)]
    pub requests: Option<u64>,
    /// Seconds per run
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub graph_size: Option<usize>,
    #[arg(long)]
    pub fanout: Option<usize>,
    /// Weights create,walk,action_heavy
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub mix: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Fused against unfused storage on one workload
    Fastedge {
        #[command(flatten)]
        workload: WorkloadFlags,
        #[arg(long, value_delimiter = ',', default_value = "64")]
        thresholds: Vec<usize>,
    },
    /// Every static configuration of synthetic actions
    Sweep {
        #[command(flatten)]
        workload: WorkloadFlags,
        #[arg(long, default_value_t = 5)]
        actions: usize,
        #[arg(long, default_value_t = 2.0)]
        compute_ms: f64,
        /// Injected delay per action; defaults to a ramp from compute_ms
        #[arg(long, value_delimiter = ',')]
        delays: Option<Vec<f64>>,
    },
    /// All-remote, all-local and orchestrated runs
    Jsorc {
        #[command(flatten)]
        workload: WorkloadFlags,
        #[arg(long, default_value_t = 5)]
        actions: usize,
        #[arg(long, default_value_t = 2.0)]
        compute_ms: f64,
        /// Injected componentization coefficient of every action
        #[arg(long, default_value_t = 3.0)]
        cc: f64,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

/// Parses arguments and runs; returns the exit status.
pub fn main_entry() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("usage error: {m}"),
                CliError::Failure(m) => eprintln!("{m}"),
            }
            e.code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = RuntimeConfig::from_flags(&cli.global).map_err(CliError::Usage)?;
    match cli.command {
        Command::Run {
            program,
            walker,
            start,
            args,
            seed_file,
        } => cmd_run(&cfg, &program, &walker, &start, args.as_deref(), seed_file.as_deref()),
        Command::Serve {
            program,
            seed_file,
            profiles,
            host,
        } => {
            let program = program
                .or_else(|| cfg.program.clone())
                .ok_or_else(|| CliError::Usage("serve needs --program".into()))?;
            cmd_serve(&cfg, &program, seed_file.as_deref(), profiles.as_deref(), &host)
        }
        Command::ServeActions { host } => cmd_serve_actions(&cfg, &host),
        Command::Bench(b) => cmd_bench(&cfg, b),
        Command::Orchestrate {
            profiles,
            remote,
            trials,
        } => cmd_orchestrate(&cfg, profiles.as_deref(), remote, trials),
        Command::Corpus { dir, bless } => cmd_corpus(dir.unwrap_or_else(corpus::corpus_dir), bless),
    }
}

fn read_usage(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {what} {}: {e}", path.display())))
}

fn manifest(cfg: &RuntimeConfig) -> Result<Vec<ManifestEntry>, CliError> {
    match &cfg.actions_manifest {
        Some(p) => load_manifest(p).map_err(CliError::Usage),
        None => Ok(Vec::new()),
    }
}

/// Builtins plus manifest actions, all bound locally.
fn registry(cfg: &RuntimeConfig) -> Result<(Arc<ActionRegistry>, Vec<ManifestEntry>), CliError> {
    let reg = Arc::new(ActionRegistry::with_builtins(Some(Arc::new(MetricsRecorder::default()))));
    let entries = manifest(cfg)?;
    for e in &entries {
        e.install(&reg).map_err(CliError::Usage)?;
    }
    Ok((reg, entries))
}

fn build_runtime(
    cfg: &RuntimeConfig,
    program: &Path,
    seed_file: Option<&Path>,
    actions: Arc<ActionRegistry>,
) -> Result<(Runtime, BTreeMap<String, ObjectId>), CliError> {
    let source = read_usage(program, "program")?;
    let rt = Runtime::from_source(&source, cfg.tier.clone(), actions).map_err(|e| CliError::Failure(e.to_json().to_string()))?;
    let labels = match seed_file {
        Some(p) => {
            let objs = parse_seed(&read_usage(p, "seed file")?).map_err(|e| CliError::Usage(e.to_string()))?;
            rt.seed(&objs).map_err(fail)?
        }
        None => BTreeMap::new(),
    };
    Ok((rt, labels))
}

fn cmd_run(
    cfg: &RuntimeConfig,
    program: &Path,
    walker: &str,
    start: &str,
    args: Option<&str>,
    seed_file: Option<&Path>,
) -> Result<(), CliError> {
    let args: ContextMap = match args {
        Some(a) => serde_json::from_str(a).map_err(|e| CliError::Usage(format!("--args: {e}")))?,
        None => ContextMap::new(),
    };
    let (reg, _) = registry(cfg)?;
    let (rt, labels) = build_runtime(cfg, program, seed_file, reg)?;
    let start = match (labels.get(start), start.parse::<u64>()) {
        (Some(id), _) => *id,
        (None, Ok(n)) => ObjectId(n),
        (None, Err(_)) => return Err(CliError::Usage(format!("unknown start label `{start}`"))),
    };
    let out = rt
        .run_walker(walker, start, args)
        .map_err(|e| CliError::Failure(e.to_json().to_string()))?;
    let report = jacette::ContextValue::List(out.report);
    println!("{}", report.canonical());
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

fn tokio_runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(fail)
}

fn announce(addr: SocketAddr, what: &str) {
    println!("{what} listening on {addr}");
    let _ = std::io::stdout().flush();
}

/// Profiles `entries` against a temporary in-process server hosting them.
fn profile_in_process(reg: &ActionRegistry, names: &[String], trials: usize) -> Result<Vec<jacette::actions::ActionProfile>, CliError> {
    let server = serve_actions("127.0.0.1:0".parse().expect("literal addr"), reg.action_set(Some(names))).map_err(fail)?;
    let profiles = analyze_application(reg, names, server.local_addr(), trials, None).map_err(fail);
    server.shutdown();
    profiles
}

fn cmd_serve(
    cfg: &RuntimeConfig,
    program: &Path,
    seed_file: Option<&Path>,
    profiles_path: Option<&Path>,
    host: &str,
) -> Result<(), CliError> {
    let (reg, entries) = registry(cfg)?;
    let (rt, labels) = build_runtime(cfg, program, seed_file, reg.clone())?;
    let rt = Arc::new(rt);
    let mut controller = None;
    let orchestrator = if cfg.jsorc {
        if entries.is_empty() {
            return Err(CliError::Usage("--jsorc needs an actions manifest".into()));
        }
        let names: Vec<String> = entries.iter().map(|e| e.name.clone()).collect();
        let profiles = match profiles_path {
            Some(p) if p.exists() => read_profiles(p).map_err(fail)?,
            other => {
                let ps = profile_in_process(&reg, &names, 10)?;
                if let Some(p) = other {
                    write_profiles(p, &ps).map_err(fail)?;
                }
                ps
            }
        };
        let endpoints = Arc::new(LocalEndpointManager::new(reg.clone()));
        let reconf = Reconfigurator::new(names, reg.clone(), endpoints).map_err(fail)?;
        fs::create_dir_all(&cfg.out).map_err(fail)?;
        let log = DecisionLog::to_file(&cfg.out.join("decisions.jsonl")).map_err(fail)?;
        let orch = Arc::new(Orchestrator::new(reconf, profiles, cfg.policy.clone(), log));
        let evaluator = LiveEvaluator::new(rt.metrics().clone(), &cfg.policy, 1, cfg.policy.epoch_interval);
        controller = Some(spawn_controller(orch.clone(), Box::new(evaluator)));
        Some(orch)
    } else {
        None
    };
    let state = AppState {
        runtime: rt,
        orchestrator,
        labels: Arc::new(labels),
    };
    let tokio = tokio_runtime()?;
    let result = tokio.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, cfg.port)).await.map_err(|e| fail(format!("bind failure: {e}")))?;
        announce(listener.local_addr().map_err(fail)?, "walker api");
        service::serve(listener, state, shutdown_signal()).await.map_err(fail)
    });
    if let Some(c) = controller {
        c.stop();
    }
    result
}

fn cmd_serve_actions(cfg: &RuntimeConfig, host: &str) -> Result<(), CliError> {
    let (reg, _) = registry(cfg)?;
    let addr: SocketAddr = format!("{host}:{}", cfg.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
    let server = serve_actions(addr, reg.action_set(None)).map_err(|e| fail(format!("bind failure: {e}")))?;
    announce(server.local_addr(), "action server");
    tokio_runtime()?.block_on(shutdown_signal());
    server.shutdown();
    Ok(())
}

fn workload(flags: &WorkloadFlags, base: WorkloadSpec, seed: u64) -> Result<WorkloadSpec, CliError> {
    let mut spec = match &flags.scenario {
        Some(p) => serde_json::from_str(&read_usage(p, "scenario")?).map_err(|e| CliError::Usage(format!("scenario: {e}")))?,
        None => WorkloadSpec { graph_seed: seed, ..base },
    };
    if let Some(c) = flags.clients {
        spec.clients = c;
    }
    if let Some(r) = flags.requests {
        spec.requests_per_client = Some(r);
    }
    if let Some(d) = flags.duration {
        spec.duration_s = d;
        spec.requests_per_client = None;
    }
    if let Some(g) = flags.graph_size {
        spec.graph_size = g;
    }
    if let Some(f) = flags.fanout {
        spec.chain_fanout = f;
    }
    if let Some(m) = &flags.mix {
        spec.mix = Mix {
            create: m[0],
            walk: m[1],
            action_heavy: m[2],
        };
    }
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn write_rows<T: serde::Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    bench::write_csv(&path, rows).map_err(fail)?;
    Ok(path)
}

fn cmd_bench(cfg: &RuntimeConfig, b: BenchCommand) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out).map_err(fail)?;
    let out = &cfg.out;
    let mut written = Vec::new();
    match b {
        BenchCommand::Fastedge { workload: w, thresholds } => {
            let base = WorkloadSpec {
                graph_size: 200,
                requests_per_client: Some(50),
                ..WorkloadSpec::default()
            };
            let spec = workload(&w, base, cfg.seed)?;
            let r = bench::bench_fast_edge(&spec, &thresholds, cfg.tier.cache_capacity).map_err(fail)?;
            for kind in [RequestKind::Create, RequestKind::Walk, RequestKind::ActionHeavy] {
                let rows: Vec<_> = r.rows.iter().filter(|x| x.kind == kind.as_str()).cloned().collect();
                if !rows.is_empty() {
                    written.push(write_rows(out, &format!("fastedge_{}.csv", kind.as_str()), &rows)?);
                }
            }
            written.push(write_rows(out, "fastedge_samples.csv", &r.sample_rows())?);
            for row in &r.rows {
                println!(
                    "{:<12} {:<13} requests={:<5} mean_us={:<10.1} objects_fetched={:<8} store_writes={}",
                    row.variant, row.kind, row.requests, row.mean_us, row.objects_fetched, row.store_writes
                );
            }
        }
        BenchCommand::Sweep {
            workload: w,
            actions,
            compute_ms,
            delays,
        } => {
            let base = WorkloadSpec {
                mix: Mix::only(RequestKind::ActionHeavy),
                clients: 2,
                graph_size: 1,
                chain_fanout: 0,
                requests_per_client: Some(10),
                ..WorkloadSpec::default()
            };
            let spec = workload(&w, base, cfg.seed)?;
            let delays = delays.unwrap_or_else(|| (0..actions).map(|i| compute_ms * (1.0 + i as f64 * 0.5)).collect());
            if delays.len() != actions {
                return Err(CliError::Usage(format!("{} delays for {actions} actions", delays.len())));
            }
            let entries = bench::synthetic_actions(compute_ms, &delays, 1);
            let budget = (cfg.policy.memory_budget_bytes != i64::MAX).then_some(cfg.policy.memory_budget_bytes);
            let r = bench::bench_config_sweep(&spec, &entries, budget).map_err(fail)?;
            written.push(write_rows(out, "sweep.csv", &r.rows)?);
            written.push(write_rows(out, "sweep_groups.csv", &r.groups)?);
            written.push(write_rows(out, "sweep_samples.csv", &r.sample_rows())?);
            for g in &r.groups {
                println!("local={} configs={:<3} median_mean_us={:.1}", g.local_count, g.configs, g.median_us);
            }
        }
        BenchCommand::Jsorc {
            workload: w,
            actions,
            compute_ms,
            cc,
            trials,
        } => {
            let base = WorkloadSpec {
                mix: Mix::only(RequestKind::ActionHeavy),
                clients: 4,
                graph_size: 1,
                chain_fanout: 0,
                duration_s: 20.0,
                ..WorkloadSpec::default()
            };
            let spec = workload(&w, base, cfg.seed)?;
            let delays = vec![compute_ms * (cc - 1.0); actions];
            let r = bench::bench_orchestrator(&OrchestratorBench {
                spec,
                actions: bench::synthetic_actions(compute_ms, &delays, 1),
                params: cfg.policy.clone(),
                profile_trials: trials,
                policies: vec![Policy::AllRemote, Policy::AllLocal, Policy::Jsorc],
            })
            .map_err(fail)?;
            written.push(write_rows(out, "jsorc.csv", &r.rows)?);
            written.push(write_rows(out, "jsorc_samples.csv", &r.sample_rows())?);
            let mut log = String::new();
            for d in &r.decisions {
                log.push_str(&serde_json::to_string(d).map_err(fail)?);
                log.push('\n');
            }
            let path = out.join("jsorc_decisions.jsonl");
            fs::write(&path, log).map_err(fail)?;
            written.push(path);
            for row in &r.rows {
                println!(
                    "{:<10} {:<11} {:<6} mean_us={:<10.1} p99_us={:<10.1} mean_speedup={:.2} p99_speedup={:.2} qps_norm={:.2}",
                    row.policy, row.label, row.segment, row.mean_us, row.p99_us, row.mean_speedup, row.p99_speedup, row.qps_norm
                );
            }
        }
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_orchestrate(cfg: &RuntimeConfig, profiles_path: Option<&Path>, remote: Option<SocketAddr>, trials: usize) -> Result<(), CliError> {
    let (reg, entries) = registry(cfg)?;
    if entries.is_empty() {
        return Err(CliError::Usage("orchestrate needs an actions manifest".into()));
    }
    let names: Vec<String> = entries.iter().map(|e| e.name.clone()).collect();
    let profiles = match remote {
        Some(addr) => analyze_application(&reg, &names, addr, trials, None).map_err(fail)?,
        None => profile_in_process(&reg, &names, trials)?,
    };
    if let Some(p) = profiles_path {
        write_profiles(p, &profiles).map_err(fail)?;
    }
    let params = cfg.policy.clone();
    let mut eval = ModelEvaluator::new(AnalyticModel::from_profiles(&profiles), 0.0, cfg.seed);
    let solution = solve_config(&profiles, &params, params.memory_budget_bytes, &mut eval).map_err(fail)?;
    let out = serde_json::json!({
        "actions": names,
        "profiles": profiles,
        "config_mask": solution.config.0,
        "method": solution.method,
        "predicted_latency_us": solution.score(),
    });
    println!("{}", serde_json::to_string_pretty(&out).map_err(fail)?);
    Ok(())
}

fn cmd_corpus(dir: PathBuf, bless: bool) -> Result<(), CliError> {
    let results = corpus::check_corpus(&dir, bless).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    let mut failed = 0;
    for r in &results {
        if r.ok {
            println!("ok   {} ({})", r.name, r.detail);
        } else {
            failed += 1;
            println!("FAIL {}: {}", r.name, r.detail);
        }
    }
    let entries = corpus::load_corpus(&dir).map_err(fail)?;
    let uncovered: Vec<&str> = corpus::grammar_coverage(&entries)
        .into_iter()
        .filter(|(_, files)| files.is_empty())
        .map(|(p, _)| p)
        .collect();
    if uncovered.is_empty() {
        println!("grammar coverage: all {} productions", corpus::ALL_PRODUCTIONS.len());
    } else {
        failed += 1;
        println!("grammar coverage: missing {}", uncovered.join(", "));
    }
    if failed > 0 {
        return Err(CliError::Failure(format!("{failed} corpus check(s) failed")));
    }
    Ok(())
}
