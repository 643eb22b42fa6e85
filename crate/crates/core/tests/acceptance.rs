//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N ... PASS|FAIL` line and then asserts.
//!
//! Run with `cargo test --release -p oddcf --test acceptance -- --nocapture`.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use oddcf::verify::{self, id, CheckResult, VerifyConfig};

// Wall-clock budgets are part of several criteria; run one at a time.
static SERIAL: Mutex<()> = Mutex::new(());

fn config() -> VerifyConfig {
    VerifyConfig::default()
}

fn checks(ids: &[&str], cfg: &VerifyConfig) -> (Vec<CheckResult>, Duration) {
    let start = Instant::now();
    let mut out = Vec::new();
    for check in ids {
        out.extend(verify::run_check(check, cfg).expect("known check id"));
    }
    (out, start.elapsed())
}

fn report(n: u32, name: &str, results: &[CheckResult], elapsed: Duration, budget: Option<Duration>) {
    let in_budget = budget.is_none_or(|b| elapsed <= b);
    let pass = !results.is_empty() && results.iter().all(|c| c.pass) && in_budget;
    let budget_note = budget.map(|b| format!(" (budget {}s)", b.as_secs())).unwrap_or_default();
    println!(
        "criterion {n:>2} {name}: {} [{} results, {:.1}s{budget_note}]",
        if pass { "PASS" } else { "FAIL" },
        results.len(),
        elapsed.as_secs_f64()
    );
    for c in results.iter().filter(|c| !c.pass) {
        println!(
            "    failed: {} alpha={} {} value={} target={} tol={} {}",
            c.check_id,
            c.alpha,
            c.quantity,
            c.value,
            c.target,
            c.tolerance,
            c.detail.as_deref().unwrap_or("")
        );
    }
    assert!(in_budget, "criterion {n}: {:.1}s exceeds the time budget", elapsed.as_secs_f64());
    assert!(pass, "criterion {n} failed");
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

#[test]
fn criterion_01_determinant_identity() {
    let _g = lock();
    let (r, t) = checks(&[id::DETERMINANT], &config());
    report(1, "determinant identity on 1000 expansions", &r, t, Some(Duration::from_secs(10)));
}

#[test]
fn criterion_02_reconstruction() {
    let _g = lock();
    let (r, t) = checks(&[id::RECONSTRUCTION], &config());
    report(2, "round-trip residual below 2^-128", &r, t, None);
}

#[test]
fn criterion_03_denominator_growth() {
    let _g = lock();
    let (r, t) = checks(&[id::DENOMINATOR_GROWTH], &config());
    report(3, "q_n >= q B^n and five-ratio bound", &r, t, None);
}

#[test]
fn criterion_04_approximation_bounds() {
    let _g = lock();
    let (r, t) = checks(&[id::APPROXIMATION], &config());
    // the stated lower bound and the decay bound; the sandwich and c1 rows
    // are diagnostics
    let r: Vec<CheckResult> = r
        .into_iter()
        .filter(|c| c.quantity == "lower-bound-violations" || c.quantity == "decay-sup")
        .collect();
    report(4, "1/(q_n q_n+1) <= |x - p_n/q_n| and bounded C^n decay", &r, t, None);
}

#[test]
fn criterion_05_product_bounds() {
    let _g = lock();
    let cfg = VerifyConfig {
        product_samples: 100_000,
        ..config()
    };
    let (r, t) = checks(&[id::PRODUCT_BOUND], &cfg);
    report(5, "witness k <= 5 for 1e5 points per alpha", &r, t, None);
}

#[test]
fn criterion_06_domain_partition() {
    let _g = lock();
    let cfg = VerifyConfig {
        partition_samples: 1_000_000,
        ..config()
    };
    let (r, t) = checks(&[id::PARTITION], &cfg);
    let r: Vec<CheckResult> = r
        .into_iter()
        .filter(|c| c.quantity == "image-outside-domain" || c.quantity == "subregion-target-failures")
        .collect();
    report(6, "image membership and subregion targets, 1e6 points per alpha", &r, t, None);
}

#[test]
fn criterion_07_mu_omega() {
    let _g = lock();
    let (r, t) = checks(&[id::MU_OMEGA], &config());
    report(7, "mu(Omega) = 3 log G on 34 alphas", &r, t, Some(Duration::from_secs(5)));
}

#[test]
fn criterion_08_density_and_invariance() {
    let _g = lock();
    let (r, t) = checks(&[id::DENSITY, id::INVARIANCE], &config());
    report(8, "integral of h = 1 and invariance residual", &r, t, None);
}

#[test]
fn criterion_09_j_integral() {
    let _g = lock();
    let (r, t) = checks(&[id::J_INTEGRAL], &config());
    report(9, "J(alpha) = -pi^2/(18 log G) within 1e-6", &r, t, Some(Duration::from_secs(60)));
}

#[test]
fn criterion_10_entropy() {
    let _g = lock();
    let cfg = VerifyConfig {
        entropy_n: 10_000,
        entropy_trials: 100,
        ..config()
    };
    let (r, t) = checks(&[id::ENTROPY], &cfg);
    for c in &r {
        println!("    {} = {:.6} (target {:.6}; {})", c.quantity, c.value, c.target, c.detail.as_deref().unwrap_or(""));
    }
    let r: Vec<CheckResult> = r.into_iter().filter(|c| !c.quantity.starts_with("birkhoff")).collect();
    report(10, "entropy and approximation exponent within 1%", &r, t, Some(Duration::from_secs(300)));
}

#[test]
fn criterion_11_exactness() {
    let _g = lock();
    let (r, t) = checks(&[id::EXACTNESS], &config());
    if let Some(d) = r.first().and_then(|c| c.detail.as_deref()) {
        println!("    {d}");
    }
    report(11, "preimage mass converges to 2 nu(A) by k = 8", &r, t, None);
}

#[test]
fn criterion_12_full_cylinders() {
    let _g = lock();
    let cfg = VerifyConfig {
        hitting_samples: 1000,
        hitting_depth: 40,
        tiling_rank: 8,
        non_full_rank: 12,
        ..config()
    };
    let (r, t) = checks(&[id::FULL_CYLINDERS], &cfg);
    report(12, "full-cylinder hits, rank-n tiling, |S_n| <= 2^n", &r, t, None);
}

#[test]
fn criterion_13_orbit_cloud() {
    let _g = lock();
    let cfg = VerifyConfig {
        cloud_grid: 2000,
        cloud_depth: 50,
        ..config()
    };
    let (r, t) = checks(&[id::ORBIT_CLOUD], &cfg);
    if let Some(c) = r.iter().find(|c| c.alpha == "0.9g") {
        println!("    escape fraction at 0.9g from Omega_g: {:.4} ({})", c.value, c.detail.as_deref().unwrap_or(""));
    }
    report(13, "cloud inside Omega for grid alphas, escapes at 0.9g", &r, t, None);
}
