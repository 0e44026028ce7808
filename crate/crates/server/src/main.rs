use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use chrono::Utc;
use clap::{Parser, Subcommand};
use evaluare_core::org::OrgMapFile;
use evaluare_core::store::{NewTeacher, StateChanges};
use evaluare_core::{ChairId, FacultyId, QuestionBank, ResultRecord, Store, StoreConfig, TeacherId, ViewerRole};
use evaluare_server::export::{self, ExportFormat};
use evaluare_server::simulate::{simulate, AnswerModel, SimulationSpec};
use evaluare_server::{AppCore, ServerConfig};

#[derive(Parser)]
#[command(name = "evaluare", version, about = "Teaching-staff evaluation service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "EVALUARE_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, env = "EVALUARE_DATA_DIR")]
        data_dir: PathBuf,
        /// Question bank file; the built-in 58-item bank when omitted.
        #[arg(long, env = "EVALUARE_BANK")]
        bank: Option<PathBuf>,
        /// Org map file placing teachers in chairs and faculties.
        #[arg(long, env = "EVALUARE_ORG_MAP")]
        org_map: Option<PathBuf>,
        #[arg(long, env = "EVALUARE_SESSION_TTL_MINUTES", default_value_t = 120)]
        session_ttl_minutes: u32,
        /// Trust the first X-Forwarded-For hop as the client address.
        #[arg(long, env = "EVALUARE_TRUSTED_PROXY")]
        trusted_proxy: bool,
        /// Built UI bundle served at `/`.
        #[arg(long, env = "EVALUARE_STATIC_DIR")]
        static_dir: Option<PathBuf>,
    },
    /// Create or replace the administrator credential.
    InitAdmin {
        #[arg(long, env = "EVALUARE_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long, env = "EVALUARE_ADMIN_USER", default_value = "admin")]
        username: String,
        #[arg(long, env = "EVALUARE_ADMIN_PASSWORD")]
        password: String,
        /// Overwrite an existing credential.
        #[arg(long)]
        force: bool,
    },
    /// Add demo teachers and open an evaluation for loopback clients.
    SeedDemo {
        #[arg(long, env = "EVALUARE_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long, env = "EVALUARE_BANK")]
        bank: Option<PathBuf>,
    },
    /// Issue an access key for a dean, a rector or an evaluated teacher.
    IssueKey {
        #[arg(long, env = "EVALUARE_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long, value_parser = ["dean", "rector", "evaluated_teacher"])]
        role: String,
        #[arg(long, required_if_eq("role", "evaluated_teacher"))]
        teacher_id: Option<i64>,
    },
    /// Drive a synthetic cohort through a running service.
    Simulate {
        #[arg(long, env = "EVALUARE_URL", default_value = "http://127.0.0.1:8080")]
        url: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
        cohort: u64,
        /// `uniform` or `all_1` … `all_5`.
        #[arg(long, default_value = "uniform")]
        model: AnswerModel,
    },
    /// Dump anonymized results, one row per questionnaire.
    Export {
        /// Read through a running service.
        #[arg(long, env = "EVALUARE_URL", conflicts_with = "data_dir")]
        url: Option<String>,
        /// Read a data directory directly (the service must be stopped).
        #[arg(long, env = "EVALUARE_DATA_DIR")]
        data_dir: Option<PathBuf>,
        /// Bank the results were taken against, for `--data-dir`.
        #[arg(long, env = "EVALUARE_BANK")]
        bank: Option<PathBuf>,
        #[arg(long, env = "EVALUARE_KEY")]
        key: Option<String>,
        #[arg(long, default_value = "csv")]
        format: ExportFormat,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_bank(path: Option<&Path>) -> anyhow::Result<QuestionBank> {
    match path {
        None => Ok(QuestionBank::default_bank()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading bank {}", p.display()))?;
            QuestionBank::load(&text).with_context(|| format!("loading bank {}", p.display()))
        }
    }
}

fn open_store(dir: &Path, config: StoreConfig) -> anyhow::Result<Store> {
    Store::open_dir(dir, config).with_context(|| format!("opening data directory {}", dir.display()))
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Serve { addr, data_dir, bank, org_map, session_ttl_minutes, trusted_proxy, static_dir } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .init();
            let bank = load_bank(bank.as_deref())?;
            let org = org_map
                .map(|p| -> anyhow::Result<OrgMapFile> {
                    let text =
                        std::fs::read_to_string(&p).with_context(|| format!("reading org map {}", p.display()))?;
                    Ok(OrgMapFile::parse(&text)?)
                })
                .transpose()?;
            let config = StoreConfig {
                session_ttl: chrono::Duration::minutes(session_ttl_minutes.into()),
                ..Default::default()
            };
            let store = open_store(&data_dir, config)?;
            if let Some(org) = &org {
                store.apply_org_map(org).context("applying org map")?;
            }
            if !store.has_admin()? {
                tracing::warn!("no administrator credential; run `evaluare init-admin`");
            }
            let core =
                Arc::new(AppCore::new(store, bank, ServerConfig { trusted_proxy, static_dir, ..Default::default() })?);
            runtime()?.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
                tracing::info!(%addr, "listening");
                evaluare_server::serve(listener, core, shutdown_signal()).await?;
                Ok(())
            })
        }
        Command::InitAdmin { data_dir, username, password, force } => {
            let store = open_store(&data_dir, StoreConfig::default())?;
            store.init_admin(&username, &password, force)?;
            println!("administrator {username:?} stored");
            Ok(())
        }
        Command::SeedDemo { data_dir, bank } => {
            let bank = load_bank(bank.as_deref())?;
            let store = open_store(&data_dir, StoreConfig::default())?;
            store.register_bank(&bank)?;
            let demo = [
                ("Prof. dr. Ana Demo", "informatics", "sciences"),
                ("Conf. dr. Mihai Exemplu", "informatics", "sciences"),
                ("Lect. dr. Ioana Model", "mathematics", "sciences"),
                ("Lect. dr. Radu Proba", "economics", "economics"),
            ];
            let mut ids = Vec::new();
            for (name, chair, faculty) in demo {
                let id = store.put_teacher(NewTeacher {
                    full_name: name.into(),
                    chair_id: ChairId(chair.into()),
                    faculty_id: FacultyId(faculty.into()),
                    photo: None,
                })?;
                println!("teacher {id}: {name} ({chair}, {faculty})");
                ids.push(id);
            }
            store.set_state(StateChanges {
                active: Some(true),
                selected_teacher: Some(Some(ids[0])),
                allowlist: Some(vec!["127.0.0.1".parse()?, "::1".parse()?]),
            })?;
            println!("evaluation active for teacher {}; allowlist 127.0.0.1, ::1", ids[0]);
            Ok(())
        }
        Command::IssueKey { data_dir, role, teacher_id } => {
            let role = match role.as_str() {
                "dean" => ViewerRole::Dean,
                "rector" => ViewerRole::Rector,
                _ => ViewerRole::EvaluatedTeacher(TeacherId(teacher_id.context("--teacher-id is required")?)),
            };
            let store = open_store(&data_dir, StoreConfig::default())?;
            println!("{}", store.issue_role_key(role, Utc::now())?);
            Ok(())
        }
        Command::Simulate { url, seed, cohort, model } => {
            let spec = SimulationSpec { seed, cohort_size: cohort as usize, answer_model: model };
            let summary = runtime()?.block_on(simulate(&url, spec))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Export { url, data_dir, bank, key, format, out } => {
            let (results, item_count) = match (url, data_dir) {
                (Some(url), _) => runtime()?.block_on(fetch_results(&url, key.as_deref()))?,
                (None, Some(dir)) => {
                    let bank = load_bank(bank.as_deref())?;
                    let store = open_store(&dir, StoreConfig::default())?;
                    let role = match &key {
                        Some(k) => store.resolve_role_key(k)?.context("unknown access key")?,
                        None => ViewerRole::Public,
                    };
                    (store.list_results(role, None)?, bank.len())
                }
                (None, None) => bail!("either --url or --data-dir is required"),
            };
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    export::write(format, &results, item_count, std::io::BufWriter::new(file))?;
                }
                None => export::write(format, &results, item_count, std::io::stdout().lock())?,
            }
            Ok(())
        }
    }
}

async fn fetch_results(url: &str, key: Option<&str>) -> anyhow::Result<(Vec<ResultRecord>, usize)> {
    let base = url.trim_end_matches('/');
    let client = reqwest::Client::new();
    let status: serde_json::Value =
        client.get(format!("{base}/api/status")).send().await?.error_for_status()?.json().await?;
    let item_count = status["total_questions"].as_u64().context("status lacks total_questions")? as usize;
    let mut req = client.get(format!("{base}/api/results"));
    if let Some(k) = key {
        req = req.bearer_auth(k);
    }
    let resp = req.send().await?;
    if !resp.status().is_success() {
        let code = resp.status();
        let body: serde_json::Value = resp.json().await.unwrap_or_default();
        bail!("{} ({code})", body["code"].as_str().unwrap_or("request failed"));
    }
    Ok((resp.json().await?, item_count))
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
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
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}
