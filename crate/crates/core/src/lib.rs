//! Infinite-horizon linear-quadratic control of mean-field stochastic
//! differential equations.
//!
//! The state obeys
//! `dX = (AX + ĀE[X] + Bu + B̄E[u])dt + (CX + C̄E[X] + Du + D̄E[u])dW`
//! with a scalar Brownian motion, and the cost is
//! `E∫ ⟨QX,X⟩ + ⟨Q̄E[X],E[X]⟩ + ⟨Ru,u⟩ + ⟨R̄E[u],E[u]⟩ dt`.
//!
//! Modules, bottom-up: [`matkit`] dense kernels, [`sdp`] block-LMI solver,
//! [`model`] problem data, [`stability`] uncontrolled analysis,
//! [`stabilize`] LMI stabilizers, [`riccati`] coupled AREs, [`simulate`]
//! Monte-Carlo, [`control`] end-to-end synthesis, [`cli`] the command line.

pub mod cli;
pub mod control;
pub mod error;
pub mod matkit;
pub mod model;
pub mod sdp;
pub mod riccati;
pub mod simulate;
pub mod stability;
pub mod stabilize;

pub use error::{Error, Result};

use serde::Serialize;

/// Three-valued verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }

    pub fn is_true(self) -> bool {
        self == Verdict::True
    }
}
