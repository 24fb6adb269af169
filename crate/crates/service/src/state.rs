use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;
use sha2::{Digest, Sha256};

use signalmatch::classifiers::TrainConfig;
use signalmatch::data::{load_library, load_pairs};
use signalmatch::preprocess::{clean, normalize, tokenize_raw, CleanStats};
use signalmatch::rerank::rerank;
use signalmatch::{AntonymTable, KeywordSet, Method, Model, RankedPredictions, SignalLibrary};

use crate::confirmations::{Confirmation, ConfirmationLog};
use crate::ServiceError;

/// Largest `k` a suggest call may ask for.
pub const MAX_K: usize = 50;

/// Where the service finds its data and how it trains.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub pairs: PathBuf,
    pub library: PathBuf,
    pub antonyms: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub confirmations: PathBuf,
    pub method: Method,
    pub default_k: usize,
    pub train: TrainConfig,
}

impl ServiceConfig {
    pub fn new(
        pairs: impl Into<PathBuf>,
        library: impl Into<PathBuf>,
        confirmations: impl Into<PathBuf>,
    ) -> Self {
        ServiceConfig {
            pairs: pairs.into(),
            library: library.into(),
            antonyms: None,
            keywords: None,
            confirmations: confirmations.into(),
            method: Method::TokenVote,
            default_k: 10,
            train: TrainConfig::default(),
        }
    }
}

/// Description of the served model, as reported by `GET /api/model`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInfo {
    pub method: Method,
    pub format: &'static str,
    pub version: String,
    pub n_labels: usize,
    pub n_training_pairs: u64,
    pub n_base_pairs: usize,
    pub n_confirmations: usize,
    pub cleaning: CleanStats,
    pub model_bytes: usize,
}

/// Immutable bundle of everything a suggest call reads.
#[derive(Debug)]
pub struct Snapshot {
    pub model: Model,
    pub library: SignalLibrary,
    pub antonyms: AntonymTable,
    pub keywords: KeywordSet,
    pub info: ModelInfo,
}

impl Snapshot {
    pub fn version(&self) -> &str {
        &self.info.version
    }

    pub fn suggest(&self, signal: &str, k: usize) -> Result<RankedPredictions, ServiceError> {
        let preds = self.model.predict(signal, k)?;
        Ok(rerank(
            &tokenize_raw(signal),
            preds,
            &self.antonyms,
            &self.keywords,
        ))
    }
}

/// Short content hash of a serialized model.
pub fn model_version(model_json: &str) -> String {
    let digest = Sha256::digest(model_json.as_bytes());
    hex::encode(&digest[..8])
}

/// Shared service state. Readers clone the current snapshot `Arc` and never
/// block a rebuild; a rebuild swaps in a finished snapshot in one write.
#[derive(Debug)]
pub struct Service {
    config: ServiceConfig,
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    log: ConfirmationLog,
    rebuilding: Mutex<()>,
}

impl Service {
    /// A service with no model loaded. Suggest calls answer 503 until the
    /// first successful [`Service::rebuild`].
    pub fn new(config: ServiceConfig) -> Self {
        let log = ConfirmationLog::new(config.confirmations.clone());
        Service {
            config,
            snapshot: RwLock::new(None),
            log,
            rebuilding: Mutex::new(()),
        }
    }

    /// Creates the service and trains the first model.
    pub fn start(config: ServiceConfig) -> Result<Self, ServiceError> {
        let service = Service::new(config);
        service.rebuild()?;
        Ok(service)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn log(&self) -> &ConfirmationLog {
        &self.log
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.snapshot
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    fn require_snapshot(&self) -> Result<Arc<Snapshot>, ServiceError> {
        self.snapshot().ok_or(ServiceError::NoModel)
    }

    pub fn suggest(
        &self,
        signal: &str,
        k: Option<usize>,
    ) -> Result<(RankedPredictions, String), ServiceError> {
        if signal.trim().is_empty() {
            return Err(ServiceError::BadRequest(
                "`signal` must not be empty".into(),
            ));
        }
        let k = k.unwrap_or(self.config.default_k);
        if !(1..=MAX_K).contains(&k) {
            return Err(ServiceError::BadRequest(format!(
                "`k` must be in 1..={MAX_K}, got {k}"
            )));
        }
        let snapshot = self.require_snapshot()?;
        let preds = snapshot.suggest(signal, k)?;
        Ok((preds, snapshot.version().to_owned()))
    }

    /// Validates the chosen label against the served library and appends the
    /// record to the log. Returns the stored record.
    pub fn confirm(
        &self,
        signal: &str,
        chosen: &str,
        source: &str,
    ) -> Result<Confirmation, ServiceError> {
        if signal.trim().is_empty() {
            return Err(ServiceError::BadRequest(
                "`signal` must not be empty".into(),
            ));
        }
        let snapshot = self.require_snapshot()?;
        if !snapshot.library.contains(&normalize(chosen.trim())) {
            return Err(ServiceError::BadRequest(format!(
                "`{chosen}` is not a library signal"
            )));
        }
        let record = Confirmation::new(signal, chosen.trim(), source);
        self.log.append(&record)?;
        Ok(record)
    }

    /// Re-reads base data and rules from disk, replays the confirmation log,
    /// trains and swaps the served snapshot. On any error the old snapshot
    /// keeps serving.
    pub fn rebuild(&self) -> Result<Arc<Snapshot>, ServiceError> {
        let _guard = self.rebuilding.lock().unwrap_or_else(|e| e.into_inner());
        let snapshot = Arc::new(self.build()?);
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::clone(&snapshot));
        Ok(snapshot)
    }

    fn build(&self) -> Result<Snapshot, ServiceError> {
        let cfg = &self.config;
        let mut data = load_pairs(&cfg.pairs)?;
        let library = load_library(&cfg.library)?;
        let antonyms = match &cfg.antonyms {
            Some(path) => AntonymTable::load(path)?,
            None => AntonymTable::default(),
        };
        let keywords = match &cfg.keywords {
            Some(path) => KeywordSet::load(path)?,
            None => KeywordSet::default(),
        };
        let n_base_pairs = data.len();
        let confirmations = self.log.read_all()?;
        data.extend(confirmations.iter().map(Confirmation::to_pair));

        let (train, cleaning) = clean(&data, &library);
        if train.is_empty() {
            return Err(ServiceError::Core(signalmatch::Error::EmptyModel));
        }
        let model = Model::train(cfg.method, &train, &cfg.train)?;
        let json = model.to_json();
        let info = ModelInfo {
            method: cfg.method,
            format: cfg.method.format_tag(),
            version: model_version(&json),
            n_labels: model.n_labels(),
            n_training_pairs: model.n_training_pairs(),
            n_base_pairs,
            n_confirmations: confirmations.len(),
            cleaning,
            model_bytes: json.len(),
        };
        Ok(Snapshot {
            model,
            library,
            antonyms,
            keywords,
            info,
        })
    }
}
