//! Acceptance gate: every criterion at full scale, one PASS/FAIL line each.

use std::process::ExitCode;
use std::time::Instant;

use tplab_cli::suite::{criteria, run_criterion, Cache, SuiteConfig};
use tplab_core::Status;

fn main() -> ExitCode {
    let cfg = SuiteConfig::full(SuiteConfig::DEFAULT_SEED);
    let mut cache = Cache::default();
    let start = Instant::now();
    let mut failures = 0;
    let total = criteria().count();
    for (id, _) in criteria() {
        let r = run_criterion(id, &cfg, &mut cache);
        let secs = r.elapsed_ms.unwrap_or(0) as f64 / 1000.0;
        let verdict = if r.status == Status::Pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {id:>2} ({secs:.1}s): {}", r.title);
        for c in &r.checks {
            let shown = match c.status {
                Status::Fail => "fail",
                Status::Skipped => "skipped",
                _ => continue,
            };
            println!("    {shown}: {} {} -> {}", c.check_name, c.parameters, c.actual);
        }
        failures += (r.status != Status::Pass) as usize;
    }
    println!("{} of {} criteria passed in {:.1}s", total - failures, total, start.elapsed().as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
