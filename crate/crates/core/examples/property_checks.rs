//! Seeded property suites for the convex kernel and the field layer.

use sdhom::checks::run_checks;

fn main() -> sdhom::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20261016);
    let r = run_checks(seed, 50)?;
    for s in &r.suites {
        println!("{:<24} {:>4} cases {:>3} failures, worst ratio {:.3e}", s.name, s.cases, s.failures, s.worst_ratio);
    }
    println!("passed: {}", r.passed());
    Ok(())
}
