//! Maps between the simplex and Euclidean coordinates: log-ratio transforms,
//! the centered/isometric α-transformations and their inverse and Jacobian,
//! plus two comparison transforms (closure-based α and ALR Box-Cox).

mod basis;
mod forward;
mod inverse;
mod jacobian;

pub use basis::TransformBasis;
pub use forward::{
    alpha_ct, alpha_it, alpha_it_or_ilr, alr_boxcox, clr, ilr, tsagris_alpha, EuclideanScores,
    ILR_SWITCH,
};
pub use inverse::{
    alpha_it_inverse, alpha_it_inverse_with, alpha_it_or_ilr_inverse, codomain_excess,
    in_codomain, inverse_residual, InverseOptions, InverseSolution,
};
pub use jacobian::{alpha_it_jacobian, alpha_it_jacobian_logdet};

pub(crate) use jacobian::{finite_logdet, ilr_logdet_with, logdet_with};
