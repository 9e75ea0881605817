//! Discriminative dictionary learning with learned αβ-log-det divergences.
//!
//! A sample `X` is encoded by its divergences to a dictionary of SPD atoms,
//! `vₖ = D(X ‖ Bₖ; αₖ, βₖ)`, and a ridge classifier `W` maps encodings to
//! one-hot class targets. [`fit`] minimizes
//!
//! ```text
//! Σᵢ ½‖hᵢ − W vᵢ‖² + γ‖W‖²_F
//! ```
//!
//! by block-coordinate descent over the atoms, the divergence parameters and
//! `W`.

mod fit;
mod gradient;
mod init;
mod model;
mod prepared;
mod serialize;

pub use fit::{fit, FitConfig, ParamInit};
pub use gradient::{
    encode, grad_alpha_beta, grad_atom, grad_atom_airm, grad_atom_direct, objective, solve_ridge, solve_w, zeta,
    ParamGradient,
};
pub use init::{init_dictionary, init_params, KMEANS_MAX_ITERS, KMEANS_TOL};
pub use model::{default_gamma, Dictionary, Encoding, IddlModel, OuterRecord};
pub use prepared::SpectralCache;
pub use serialize::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
