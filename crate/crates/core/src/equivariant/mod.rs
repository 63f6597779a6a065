//! O(3)-equivariant building blocks: irreps bookkeeping, real spherical
//! harmonics, Clebsch–Gordan tensor products, radial basis, per-irrep linear
//! maps and gates. Every kernel is generic over [`crate::real::Real`].

pub mod cg;
pub mod gate;
pub mod harmonics;
pub mod irreps;
pub mod linear;
pub mod radial;
pub mod tensor_product;
mod wigner;

pub use cg::{clebsch_gordan, CGCache, CgTensor};
pub use gate::gated_nonlinearity;
pub use harmonics::spherical_harmonics;
pub use irreps::{EquivariantTensor, Irrep, Irreps, MulIrrep, Parity};
pub use linear::{linear_per_irrep, LinearMap};
pub use radial::bessel_rbf;
pub use tensor_product::{tensor_product, TensorProduct};
pub use wigner::{gauss_legendre, wigner_d};
