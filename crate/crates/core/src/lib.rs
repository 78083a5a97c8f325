//! Bihermitian metrics on Del Pezzo surfaces built from the Hamiltonian flow
//! of `f = log‖σ‖²`, together with numerical verifiers for the identities the
//! construction satisfies.

pub mod bihermitian;
pub mod ellcurve;
pub mod error;
pub mod flow;
pub mod geom;
pub mod ode;
pub mod quadrature;
pub mod sampling;
pub mod surface;

pub use bihermitian::{BihermitianData, Tolerances, VerificationReport};
pub use ellcurve::{CurvePoint, ResidueForm, TranslationReport};
pub use error::{Error, Result};
pub use flow::FlowState;
pub use geom::{ComplexStructure, PointMetric, QuaternionPackage, RealLinearMap, Tangent, TwoForm, C64};
pub use ode::IntegratorConfig;
pub use surface::{AnticanonicalSection, ChartPoint, DelPezzo, KstarMetric, SurfaceKind, SurfaceModel};
