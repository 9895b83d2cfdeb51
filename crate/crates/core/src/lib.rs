//! Numerical laboratory for Riemannian polytope-type domains.
//!
//! Defining functions and metric entries are written in a small expression
//! language ([`dsl`]) and differentiated exactly with second-order dual
//! numbers ([`jet`]). On top of that sit the pointwise Riemannian toolbox
//! ([`riemann`]), domains and their hypothesis checks ([`domain`]), the
//! exponentially smoothed boundary ([`surface`]), Morrey functionals
//! ([`morrey`]), Clifford boundary operators ([`clifford`]) and the
//! rotationally symmetric exterior pipeline ([`imcf`]). Scenario files and
//! subcommands live in [`scenario`] and [`runner`].

pub mod clifford;
pub mod domain;
pub mod dsl;
pub mod error;
pub mod imcf;
pub mod jet;
pub mod linalg;
pub mod morrey;
pub mod riemann;
pub mod runner;
pub mod scenario;
pub mod surface;

pub use domain::{BoundaryClassification, Comparison, FaceData, PointKind, PolytopeDomain};
pub use dsl::{Expression, Params};
pub use error::{Error, Result};
pub use jet::{Dual1, Jet2};
pub use riemann::{MetricField, MetricJet};
pub use clifford::{ChiOperator, CliffordRep};
pub use imcf::{ExteriorReport, FlowTrace, RotSymExterior};
pub use morrey::{MorreyConfig, MorreyReport};
pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use surface::{NormalWeights, SmoothedSurface, SurfaceOptions, SurfaceSample};
