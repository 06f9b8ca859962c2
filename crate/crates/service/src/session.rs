use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use rashgam_core::ellipsoid::Ellipsoid;
use rashgam_core::gam::Support;
use rashgam_core::io::{read_json, EllipsoidDoc, ModelDoc};
use rashgam_core::{Error, Result};

/// A loaded model and its ellipsoid. Immutable; reloads build a new one.
#[derive(Debug)]
pub struct Session {
    pub model: ModelDoc,
    pub ellipsoid_doc: EllipsoidDoc,
    ellipsoid: Ellipsoid,
    support: Support,
    /// Run weights in ellipsoid order (intercept excluded), when the model
    /// document carries bin weights.
    weights: Option<Vec<f64>>,
}

impl Session {
    pub fn new(model: ModelDoc, ellipsoid_doc: EllipsoidDoc) -> Result<Self> {
        model.model()?;
        let support = model.support()?;
        let ellipsoid = ellipsoid_doc.ellipsoid()?;
        if ellipsoid.dim() != support.size() + 1 {
            return Err(Error::DimensionMismatch {
                expected: support.size() + 1,
                got: ellipsoid.dim(),
            });
        }
        let weights = model.run_weights().ok();
        Ok(Self {
            model,
            ellipsoid_doc,
            ellipsoid,
            support,
            weights,
        })
    }

    pub fn load(model_path: impl AsRef<Path>, ellipsoid_path: impl AsRef<Path>) -> Result<Self> {
        Self::new(read_json(model_path)?, read_json(ellipsoid_path)?)
    }

    pub fn ellipsoid(&self) -> &Ellipsoid {
        &self.ellipsoid
    }

    pub fn n_features(&self) -> usize {
        self.support.n_features()
    }

    /// Ellipsoid coordinates of feature `j` (one per run).
    pub fn feature_block(&self, j: usize) -> Option<Range<usize>> {
        self.support.blocks().get(j).map(|b| b.start + 1..b.end + 1)
    }

    pub fn blocks(&self) -> Vec<Range<usize>> {
        (0..self.n_features()).filter_map(|j| self.feature_block(j)).collect()
    }

    /// Ellipsoid coordinate holding bin `k` of feature `j`.
    pub fn bin_coordinate(&self, j: usize, k: usize) -> Option<usize> {
        let bins = self.support.bins_per_feature();
        if j >= bins.len() || k >= bins[j] {
            return None;
        }
        let offset: usize = bins[..j].iter().sum();
        Some(self.support.column_map()[offset + k] + 1)
    }

    pub fn bins(&self, j: usize) -> usize {
        self.support.bins_per_feature()[j]
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }
}

/// Shared handle to the current session. Readers clone the inner `Arc`, so a
/// request sees one snapshot from start to finish; reloads swap the pointer.
#[derive(Clone)]
pub struct AppState {
    current: Arc<RwLock<Arc<Session>>>,
    sources: Option<Arc<(PathBuf, PathBuf)>>,
}

impl AppState {
    pub fn new(session: Session) -> Self {
        Self {
            current: Arc::new(RwLock::new(Arc::new(session))),
            sources: None,
        }
    }

    /// Loads from files and remembers them for `reload_from_sources`.
    pub fn from_files(model_path: PathBuf, ellipsoid_path: PathBuf) -> Result<Self> {
        let session = Session::load(&model_path, &ellipsoid_path)?;
        let mut state = Self::new(session);
        state.sources = Some(Arc::new((model_path, ellipsoid_path)));
        Ok(state)
    }

    pub fn snapshot(&self) -> Arc<Session> {
        self.current.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn replace(&self, session: Session) {
        *self.current.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(session);
    }

    pub fn has_sources(&self) -> bool {
        self.sources.is_some()
    }

    /// Re-reads the launch files. On failure the current session stays.
    pub fn reload_from_sources(&self) -> Result<()> {
        let (m, e) = self
            .sources
            .as_deref()
            .ok_or_else(|| Error::Config("session was not loaded from files".into()))?;
        self.replace(Session::load(m, e)?);
        Ok(())
    }
}
