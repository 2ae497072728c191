//! Time stepping for `−x′ ∈ A(t, x) + F(t, x, λ)`: implicit Euler in `A`
//! with selections of `F`, solution-set sampling, the Gronwall a-priori
//! bound and the Filippov successive-approximation construction with its
//! error certificate.

mod filippov;
mod grid;
mod multimap;
mod solver;

pub use filippov::{
    beta_n, certificate_bound, factorial_envelope, filippov_construct, tau_values, FilippovCertificate,
    FilippovOptions, FilippovOutcome,
};
pub use grid::{trajectory_norms, TimeGrid, Trajectory};
pub use multimap::{validate_multimap, MultiMap, MultiMapReport, SetShape};
pub use solver::{
    apriori_bound, apriori_bound_with_growth, contraction_check, radial_retract, sample_solution_set, solve_forced,
    step_implicit, ContractionReport, SelectionStrategy, SolutionSample,
};

#[allow(unused_imports)]
pub(crate) use solver::{selection_tol, StepContext, Target};
