use lorasim_core::experiment::{
    adr_jobs, baseline_jobs, beacon_jobs, run_adr_trial, run_baseline_trial, run_beacon_trial, AdrSpoofRow,
    BaselineRow, BeaconRow, RunError, Scenario,
};
use rayon::prelude::*;

/// Command-line adjustments applied on top of a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub trials: Option<u32>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(self, sc: &mut Scenario) {
        if let Some(t) = self.trials {
            sc.trials = t;
        }
        if let Some(s) = self.seed {
            sc.seed = s;
        }
    }
}

/// Runs independent jobs on `parallel` worker threads (0 picks the number of
/// cores). Results keep job order, so output does not depend on scheduling.
pub fn run_jobs<J, R, F>(jobs: &[J], parallel: usize, f: F) -> Result<Vec<R>, RunError>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> Result<R, RunError> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallel).build().expect("thread pool");
    pool.install(|| jobs.par_iter().map(&f).collect())
}

pub fn baseline(sc: &Scenario, parallel: usize) -> Result<Vec<BaselineRow>, RunError> {
    let jobs = baseline_jobs(sc)?;
    run_jobs(&jobs, parallel, |j| run_baseline_trial(sc, j))
}

pub fn adr_spoof(sc: &Scenario, parallel: usize) -> Result<Vec<AdrSpoofRow>, RunError> {
    let jobs = adr_jobs(sc)?;
    run_jobs(&jobs, parallel, |j| run_adr_trial(sc, j))
}

pub fn beacon_spoof(sc: &Scenario, parallel: usize) -> Result<Vec<BeaconRow>, RunError> {
    let jobs = beacon_jobs(sc)?;
    let per_trial = run_jobs(&jobs, parallel, |j| run_beacon_trial(sc, j))?;
    Ok(per_trial.into_iter().flatten().collect())
}
