//! Weibull cumulative exposure model with a stress threshold for
//! multiple-step step-stress life tests on specimens with prior use.

pub mod error;
pub mod model;
pub mod params;
pub mod quadrature;
pub mod moments;
pub mod likelihood;
pub mod newton;
pub mod estimator;
pub mod simulate;
pub mod io;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/moments.md")]
    mod moments {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
