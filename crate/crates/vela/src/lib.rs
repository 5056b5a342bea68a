//! Periodic-box pseudo-spectral simulator for 3D incompressible isotropic
//! viscoelastic dynamics in perturbation form, together with a verification
//! harness for the constitutive tensors, the shear-wave null condition,
//! constraint preservation, generalized energies, weighted dispersive norms,
//! local-energy-decay ratios, pressure bounds, and weighted Sobolev/Hardy
//! inequalities.

pub mod constitutive;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod nullcheck;
pub mod rng;
pub mod tensor;

pub use constitutive::{MaterialModel, MaterialParams, ModelKind, StrainEnergy};
pub use diagnostics::{DecayReport, EnergyReport, TheoremReport};
pub use dynamics::{SolverConfig, State};
pub use error::{Error, Result};
pub use fields::{CutoffParams, Grid, MatrixField, ScalarField, VectorField};
pub use tensor::{Mat3, Rank4Tensor, Rank6Tensor, Vec3};
