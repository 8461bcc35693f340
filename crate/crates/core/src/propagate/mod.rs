//! Time evolution: the exact free flow, the forced linear equation, the
//! defocusing quintic NLS and its Duhamel-Picard formulation, plus the
//! space-time norms used to measure them.

mod linear;
mod nls;
mod norms;
mod picard;
mod time;

pub use linear::{forced_linear_solve, free_flow};
pub use nls::{nls_solve, NlsOptions, BLOWUP_THRESHOLD};
pub use norms::{check_admissible, mixed_norm, Admissibility, AdmissiblePair, NormBundle};
pub use picard::{picard_solve, power_nonlinearity, PicardOptions, PicardOutcome};
pub use time::{Direction, TimeGrid, Trajectory};
