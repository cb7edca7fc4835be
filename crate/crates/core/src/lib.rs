pub mod agent;
pub mod error;
pub mod fdtgs;
pub mod glcm;
pub mod image;
pub mod io;
pub mod metrics;
pub mod multirate;
pub mod twin;
pub mod patching;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/texture.md")]
    mod texture {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    mod thresholds {}
    #[doc = include_str!("../../../book/src/twin.md")]
    mod twin {}
    #[doc = include_str!("../../../book/src/agent.md")]
    mod agent {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/link.md")]
    mod link {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
