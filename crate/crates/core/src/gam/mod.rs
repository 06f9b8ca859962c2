//! Binned logistic GAMs: data, binning, supports, losses and ERM.

pub mod binning;
pub mod dataset;
pub mod fit;
pub mod loss;
pub mod model;
pub mod support;

pub use binning::{bin, make_quantile_spec, BinnedDataset, BinningSpec};
pub use dataset::RawDataset;
pub use fit::{fit_erm, fit_reduced};
pub use loss::{GamObjective, QuadraticLoss, SmoothLoss};
pub use model::{
    classification_loss, gradient, hessian, penalty_l2, penalty_steps, total_loss, GamModel,
    LossBreakdown,
};
pub use support::Support;
