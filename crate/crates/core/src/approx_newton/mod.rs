//! Low-dimensional inference engines: stochastic Newton steps with SGD inner
//! solves, the SVRG point-track variant, growing inner loops and averaged
//! iterates.

mod config;
mod engine;
mod run;
pub mod schedule;
mod svrg;

pub use config::{NewtonInferConfig, StepCap};
#[allow(unused_imports)]
pub(crate) use engine::{run_engine, sample_inner_batch, OuterSampling, PointTrack};
pub use engine::{estimate_max_curvature, resolve_step_cap, run_inference, solve_newton_step_sgd, NewtonStep};
pub use run::{averaged_estimate, Algorithm, InferenceRun, Replicate};
pub use schedule::{hvp_delta, inner_len, inner_step, outer_step};
pub use svrg::{
    run_inference_svrg, svrg_defaults, svrg_point_estimate, warm_start, SvrgDefaults, DENSE_CURVATURE_LIMIT,
    WARM_START_EPOCHS,
};
