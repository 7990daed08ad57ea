//! Min-max optimization laboratory: a synthetic two-mode GAN with closed-form
//! gradients, the SGDA / nSGDA / Adam-for-games / Ada-nSGDA / AdaDir
//! steppers, exact-expectation oracles, and a seeded experiment harness.

pub mod analysis;
pub mod checks;
pub mod distributions;
pub mod error;
pub mod gradients;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod optimizers;
pub mod par;

pub use error::{LabError, Result};
