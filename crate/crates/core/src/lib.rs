//! Coded caching for shared-cache broadcast networks whose cache sizes follow
//! the expected user load.
//!
//! A server holding `N` files serves `K` users through `Λ` shared caches.
//! Users associate with caches at random according to intensities `p`, and
//! the caches share a total budget of `t` library copies. The crate covers
//! the full pipeline:
//!
//! * [`model`]: configurations, the expected/base population vectors and the
//!   virtual-cache layout, multinomial population sampling;
//! * [`placement`]: storage allocation, subpacketization and placement;
//! * [`partition`]: splitting a realized population into delivery rounds;
//! * [`delivery`]: XOR transmissions per round and the closed-form delivery
//!   time;
//! * [`codec`]: byte-level execution of a delivery to check that every user
//!   decodes its file;
//! * [`evaluate`]: exact and sampled average delay, the uniform-cache
//!   baseline, and the virtual-user trade-off.
//!
//! ```
//! use shardcache::{delivery, model::SystemConfig};
//!
//! let cfg = SystemConfig::from_strs(10, 10, 2, &["2/5", "1/5", "1/5", "1/5"]).unwrap();
//! let layout = cfg.layout();
//! assert_eq!(layout.base(), &[2, 1, 1, 1]);
//! let delay = delivery::delay_formula(&[6, 2, 1, 1], &layout, cfg.budget());
//! assert_eq!(shardcache::exact::format_fraction(&delay), "20/9");
//! ```

pub mod codec;
pub mod config;
pub mod delivery;
pub mod error;
pub mod evaluate;
pub mod exact;
pub mod model;
pub mod partition;
pub mod placement;

pub use error::{Error, Result};

// The guide's code listings are compiled and run as doc tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/layout.md")]
    mod layout {}
    #[doc = include_str!("../../../book/src/placement.md")]
    mod placement {}
    #[doc = include_str!("../../../book/src/delivery.md")]
    mod delivery {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
