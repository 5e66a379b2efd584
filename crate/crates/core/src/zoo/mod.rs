//! Mean-estimation algorithms whose test error the estimators target.

mod cart;
mod design;
mod eb;
mod glm;
mod lasso;
mod pspline;
mod simple;
mod tv;

pub use cart::{cart_poisson, PoissonTree};
pub use design::DesignMatrix;
pub use eb::{eb_one_step, EbOneStep};
pub use glm::{poisson_irls, GlmFit, PoissonGlm};
pub use lasso::{lasso_poisson_cv, lasso_poisson_path, LassoPath, LassoPoissonCv, LassoSettings};
pub use pspline::{
    bspline_basis, lindsey_pspline, BinGrid, LindseyFit, LindseyPSpline, Penalty, SplineBasisSpec,
};
pub use simple::{
    linear_shrinkage, threshold, Constant, Identity, LinearShrinkage, Threshold, ThresholdKind,
};
pub use tv::{phantom, tv_denoise, tv_objective, ImageGrid, TvDenoiser, TvResult, TvSettings};
