//! Continuous-time collision-risk bounds for waypoint trajectories tracked in
//! open loop under Brownian disturbances, with Monte Carlo ground truth.

pub mod gaussian;
pub mod geometry;
pub mod montecarlo;
pub mod process;
pub mod risk;

/// Runs `job` on a dedicated pool of `threads` workers, or on the global pool.
pub(crate) fn in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(job),
        None => job(),
    }
}
