//! Label service: browse a sortie corpus over HTTP, see the machine's
//! verdicts, and record human labels in an append-only journal.
//!
//! ```text
//! GET  /sorties                       summaries, sorted by id
//! GET  /sorties/{id}/trajectory       {"sortie_id","columns","rows"}
//! GET  /sorties/{id}/render/topdown   SVG ground track
//! GET  /sorties/{id}/render/altitude  SVG altitude profile
//! GET  /sorties/{id}/auto             sorter verdict, flags, template matches
//! POST /sorties/{id}/labels           {"label_kind","value","t_start"?,"t_end"?,"labeler_id"?}
//! GET  /labels?sortie_id=&label_kind=&labeler_id=
//! ```

mod api;
pub mod journal;
pub mod labels;
mod state;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use sortie_core::matcher::{load_template_library, MatchError};
use sortie_core::sim::{index_corpus, SimError};
use sortie_core::{DetectorConfig, RuleSet};
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::{router, LABELER_HEADER};
pub use journal::{Journal, JournalError, LabelFilter};
pub use labels::{LabelKind, LabelRecord, NewLabel};
pub use state::{AppState, AutoLabels, SortieSummary};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub corpus_dir: PathBuf,
    pub journal_path: PathBuf,
    pub bind: SocketAddr,
    pub rules: RuleSet,
    pub detector: DetectorConfig,
    /// Template library manifest; enables `match_results` in `/auto`.
    pub templates: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(corpus_dir: impl Into<PathBuf>, journal_path: impl Into<PathBuf>, bind: SocketAddr) -> Self {
        ServiceConfig {
            corpus_dir: corpus_dir.into(),
            journal_path: journal_path.into(),
            bind,
            rules: RuleSet::table1(),
            detector: DetectorConfig::default(),
            templates: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus not found at {path}: {detail}")]
    CorpusNotFound { path: PathBuf, detail: String },
    #[error(transparent)]
    JournalLocked(JournalError),
    #[error("templates: {0}")]
    Templates(#[from] MatchError),
    #[error("server stopped: {0}")]
    Server(#[source] std::io::Error),
}

impl ServiceError {
    /// Stable name for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::BindFailure { .. } => "BindFailure",
            ServiceError::CorpusNotFound { .. } => "CorpusNotFound",
            ServiceError::JournalLocked(_) => "JournalLocked",
            ServiceError::Templates(_) => "Templates",
            ServiceError::Server(_) => "Server",
        }
    }
}

/// A service that has indexed its corpus, locked its journal and bound its
/// socket, but is not yet answering.
pub struct BoundService {
    listener: TcpListener,
    state: Arc<AppState>,
}

impl BoundService {
    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn state(&self) -> &Arc<AppState> {
        &self.state
    }

    /// Serves until `shutdown` resolves, then finishes in-flight requests.
    pub async fn run_until(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
        axum::serve(self.listener, router(self.state))
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(ServiceError::Server)
    }
}

fn load_state(cfg: &ServiceConfig) -> Result<AppState, ServiceError> {
    let not_found = |detail: String| ServiceError::CorpusNotFound {
        path: cfg.corpus_dir.clone(),
        detail,
    };
    if !cfg.corpus_dir.is_dir() {
        return Err(not_found("not a directory".into()));
    }
    let entries = index_corpus(&cfg.corpus_dir).map_err(|e: SimError| not_found(e.to_string()))?;
    let templates = cfg.templates.as_deref().map(load_template_library).transpose()?;
    let journal = Journal::open(&cfg.journal_path).map_err(ServiceError::JournalLocked)?;
    Ok(AppState::new(entries, journal, cfg.rules.clone(), cfg.detector, templates))
}

/// Checks the corpus and journal, then binds. Every startup failure
/// surfaces here rather than on the first request.
pub async fn bind(cfg: &ServiceConfig) -> Result<BoundService, ServiceError> {
    let c = cfg.clone();
    let state = tokio::task::spawn_blocking(move || load_state(&c))
        .await
        .map_err(|e| ServiceError::Server(std::io::Error::other(e)))??;
    let listener = TcpListener::bind(cfg.bind).await.map_err(|source| ServiceError::BindFailure {
        addr: cfg.bind,
        source,
    })?;
    Ok(BoundService {
        listener,
        state: Arc::new(state),
    })
}

/// Binds and serves until Ctrl-C.
pub async fn serve(cfg: &ServiceConfig) -> Result<(), ServiceError> {
    let bound = bind(cfg).await?;
    eprintln!("listening on http://{}", bound.local_addr());
    bound
        .run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
