pub mod cheb;
pub mod cover;
pub mod dynamics;
pub mod error;
pub mod interface;
pub mod interpolant;
pub mod roots;

pub use cover::{build_adaptive, Cover, CoverParams, Rect};
pub use error::{Error, Result};
pub use interpolant::PUInterpolant;
