//! Experiment orchestration for disturbance response control: noise models,
//! hindsight comparators, end-to-end runs, scaling studies and artifacts.

pub mod config;
mod error;
pub mod experiment;
pub mod hindsight;
pub mod noise;
pub mod output;
pub mod scaling;

pub use error::{HarnessError, Result};

/// Global rayon pool capped by `DRC_THREADS` when set.
pub fn init_thread_pool() {
    if let Some(n) = std::env::var("DRC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().is_err() {
            log::debug!("rayon pool already initialised");
        }
    }
}
