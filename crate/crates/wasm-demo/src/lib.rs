//! Browser bindings over one model and its Rashomon ellipsoid.
//!
//! Vectors crossing the boundary are ellipsoid coordinates: the intercept
//! followed by one value per step, feature blocks in order. Structured
//! results go out as JSON strings so the page needs no glue beyond
//! `JSON.parse`.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use rashgam_core::apps::{monotone_fit, project_edit, ChainConstraint, Direction, MonotoneResult, Projection};
use rashgam_core::ellipsoid::Ellipsoid;
use rashgam_core::io::{EllipsoidDoc, ModelDoc, ShapeFunction};
use rashgam_core::{Error, Result};

pub const DEMO_MODEL: &str = include_str!("../assets/model.json");
pub const DEMO_ELLIPSOID: &str = include_str!("../assets/ellipsoid.json");

#[derive(Debug, Serialize)]
pub struct View {
    pub feature_names: Vec<String>,
    pub blocks: Vec<(usize, usize)>,
    pub params: Vec<f64>,
    pub center: Vec<f64>,
    pub theta: f64,
    pub shape_functions: Vec<ShapeFunction>,
}

/// Step values of one feature for a few sampled models.
#[derive(Debug, Serialize)]
pub struct Band {
    pub feature: usize,
    pub curves: Vec<Vec<f64>>,
}

/// Plain-Rust core of the demo, usable without a browser.
pub struct DemoCore {
    model: ModelDoc,
    ellipsoid: Ellipsoid,
    theta: f64,
    blocks: Vec<Range<usize>>,
}

impl DemoCore {
    pub fn from_json(model_json: &str, ellipsoid_json: &str) -> Result<Self> {
        let model: ModelDoc = serde_json::from_str(model_json)?;
        let edoc: EllipsoidDoc = serde_json::from_str(ellipsoid_json)?;
        let support = model.support()?;
        model.model()?;
        let ellipsoid = edoc.ellipsoid()?;
        if ellipsoid.dim() != support.size() + 1 {
            return Err(Error::DimensionMismatch {
                expected: support.size() + 1,
                got: ellipsoid.dim(),
            });
        }
        let blocks = support.blocks().into_iter().map(|b| b.start + 1..b.end + 1).collect();
        Ok(Self {
            model,
            ellipsoid,
            theta: edoc.theta,
            blocks,
        })
    }

    pub fn demo() -> Self {
        Self::from_json(DEMO_MODEL, DEMO_ELLIPSOID).expect("bundled demo artifacts are valid")
    }

    pub fn view(&self) -> Result<View> {
        Ok(View {
            feature_names: self.model.feature_names.clone(),
            blocks: self.blocks.iter().map(|b| (b.start, b.end)).collect(),
            params: self.model.reduced_params()?,
            center: self.ellipsoid.center().as_slice().to_vec(),
            theta: self.theta,
            shape_functions: self.model.shape_functions()?,
        })
    }

    fn block(&self, feature: usize) -> Result<Range<usize>> {
        self.blocks.get(feature).cloned().ok_or(Error::DimensionMismatch {
            expected: self.blocks.len(),
            got: feature + 1,
        })
    }

    pub fn contains(&self, omega: &[f64]) -> Result<(f64, bool)> {
        self.ellipsoid.contains(omega)
    }

    pub fn project(&self, omega: &[f64]) -> Result<Projection> {
        project_edit(&self.ellipsoid, omega)
    }

    /// Closest model to the center (ellipsoid metric) that is monotone on
    /// `feature`.
    pub fn monotone(&self, feature: usize, increasing: bool) -> Result<MonotoneResult> {
        let chain = ChainConstraint {
            block: self.block(feature)?,
            direction: if increasing { Direction::Increasing } else { Direction::Decreasing },
        };
        monotone_fit(&self.ellipsoid, &[chain], &[])
    }

    pub fn band(&self, feature: usize, n: usize, seed: u64) -> Result<Band> {
        let b = self.block(feature)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curves = (0..n)
            .map(|_| {
                let w = self.ellipsoid.sample(&mut rng);
                w.as_slice()[b.clone()].to_vec()
            })
            .collect();
        Ok(Band { feature, curves })
    }
}

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> std::result::Result<String, JsError> {
    serde_json::to_string(v).map_err(js)
}

#[wasm_bindgen]
pub struct Demo {
    core: DemoCore,
}

#[wasm_bindgen]
impl Demo {
    /// Session over caller-supplied `model.json` / `ellipsoid.json` text.
    #[wasm_bindgen(constructor)]
    pub fn new(model_json: &str, ellipsoid_json: &str) -> std::result::Result<Demo, JsError> {
        Ok(Demo {
            core: DemoCore::from_json(model_json, ellipsoid_json).map_err(js)?,
        })
    }

    /// Session over the bundled Diabetes model.
    pub fn bundled() -> Demo {
        Demo { core: DemoCore::demo() }
    }

    pub fn view(&self) -> std::result::Result<String, JsError> {
        to_json(&self.core.view().map_err(js)?)
    }

    /// `[q, inside]` with `inside` as 0 or 1.
    pub fn contains(&self, omega: &[f64]) -> std::result::Result<Vec<f64>, JsError> {
        let (q, inside) = self.core.contains(omega).map_err(js)?;
        Ok(vec![q, f64::from(u8::from(inside))])
    }

    pub fn project(&self, omega: &[f64]) -> std::result::Result<String, JsError> {
        to_json(&self.core.project(omega).map_err(js)?)
    }

    pub fn monotone(&self, feature: usize, increasing: bool) -> std::result::Result<String, JsError> {
        to_json(&self.core.monotone(feature, increasing).map_err(js)?)
    }

    pub fn band(&self, feature: usize, n: usize, seed: u32) -> std::result::Result<String, JsError> {
        to_json(&self.core.band(feature, n, u64::from(seed)).map_err(js)?)
    }
}
