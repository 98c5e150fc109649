use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("closed disks {0} and {1} intersect")]
    OverlappingDisks(usize, usize),

    #[error("generator {generator} does not carry the boundary of disk {generator} onto disk {target} (deviation {deviation:.3e})")]
    MappingMismatch {
        generator: usize,
        target: usize,
        deviation: f64,
    },

    #[error("generator {0} has determinant {1}, expected 1")]
    NonUnitDeterminant(usize, f64),

    #[error("point is the pole of the Möbius map")]
    PoleHit,

    #[error("branch of log(cz + d) for letter {letter} is not defined on disk {disk}")]
    BranchObstruction { letter: usize, disk: usize },

    #[error("enumeration of {requested} items exceeds the cap of {cap}")]
    SizeLimit { requested: u128, cap: u128 },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("pressure does not change sign on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("weight {0} is not positive")]
    NegativeWeight(f64),

    #[error("multiplication table violates the group axioms: {0}")]
    NotClosed(String),

    #[error("group closure exceeds {0} elements")]
    TooLarge(usize),

    #[error("irreducible decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("representation has a trivial component of norm {0:.3e}")]
    TrivialComponentPresent(f64),

    #[error("representation is not irreducible (<chi, chi> = {0:.6})")]
    NotIrreducible(f64),

    #[error("I - L is numerically singular at s = {0}")]
    SingularAtPoint(num_complex::Complex64),

    #[error("closest eigenvalue {eigenvalue} is too far from 1 (residual {residual:.3e})")]
    NoUnitEigenvalue {
        eigenvalue: num_complex::Complex64,
        residual: f64,
    },

    #[error("Re s = {re} is below the Euler product convergence bound {bound}")]
    ConvergenceDomain { re: f64, bound: f64 },

    #[error("winding number {0} is not integer-stable")]
    ContourAmbiguity(f64),

    #[error("Newton iteration diverged from {0}")]
    NewtonDivergence(num_complex::Complex64),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::OverlappingDisks(..) => "overlapping_disks",
            Error::MappingMismatch { .. } => "mapping_mismatch",
            Error::NonUnitDeterminant(..) => "non_unit_determinant",
            Error::PoleHit => "pole_hit",
            Error::BranchObstruction { .. } => "branch_obstruction",
            Error::SizeLimit { .. } => "size_limit",
            Error::NoConvergence(_) => "no_convergence",
            Error::BracketFailure { .. } => "bracket_failure",
            Error::NegativeWeight(_) => "negative_weight",
            Error::NotClosed(_) => "not_closed",
            Error::TooLarge(_) => "too_large",
            Error::DecompositionFailure(_) => "decomposition_failure",
            Error::TrivialComponentPresent(_) => "trivial_component_present",
            Error::NotIrreducible(_) => "not_irreducible",
            Error::SingularAtPoint(_) => "singular_at_point",
            Error::NoUnitEigenvalue { .. } => "no_unit_eigenvalue",
            Error::ConvergenceDomain { .. } => "convergence_domain",
            Error::ContourAmbiguity(_) => "contour_ambiguity",
            Error::NewtonDivergence(_) => "newton_divergence",
            Error::InvalidInput(_) => "invalid_input",
        }
    }
}
