//! `stoloc selftest`: the fast subset of the acceptance criteria.

use stoloc::criteria::{fast_ids, run_criteria, Fault, RunOptions};

use crate::error::{CliError, CliResult};

pub fn run(seed: Option<u64>, fault: Fault) -> CliResult<()> {
    let mut opts = RunOptions { fault, ..RunOptions::default() };
    if let Some(s) = seed {
        opts.seed = s;
    }
    let outcomes = run_criteria(&fast_ids(), &opts)?;
    for o in &outcomes {
        println!("{o}");
        for line in &o.info {
            println!("    {line}");
        }
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.id).collect();
    if failed.is_empty() {
        println!("selftest: {} of {} criteria passed", outcomes.len(), outcomes.len());
        Ok(())
    } else {
        Err(CliError::Failed(format!("selftest: criteria {failed:?} failed")))
    }
}
