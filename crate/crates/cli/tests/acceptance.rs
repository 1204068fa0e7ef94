//! Acceptance suite: the ten release criteria at their stated tolerances.
//!
//! Runs as a plain binary so every criterion prints one PASS/FAIL line even
//! when earlier ones fail. The two full pipelines write under a temporary
//! directory; the American-put pipeline dominates the runtime.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surrogate_cli::commands::bench::BenchReport;
use surrogate_cli::{run, Cli};
use surrogate_core::analytics::{bs_put, EuropeanQuote};
use surrogate_core::dataset::EvalReport;
use surrogate_core::fdsolver::{greeks_at, solve, ExerciseStyle, GridSpec, PayoffKind, PdeProblem};
use surrogate_core::gpr::{kernel, log_marginal_likelihood, Hyperparams, SearchSpec, TrainedGpr};
use surrogate_core::varswap::{fair_strike, VarSwapInputs};
use surrogate_core::volsurface::{term_factor, SurfaceParams, SviSlice};
use surrogate_core::Execution;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Check + 'a>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cli(args: &[&str]) -> Result<serde_json::Value, String> {
    let argv = std::iter::once("surrogate").chain(args.iter().copied());
    let parsed = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
    run(parsed).map_err(|e| e.error_line())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn within_budget(start: Instant, limit_s: f64) -> Result<f64, String> {
    let s = start.elapsed().as_secs_f64();
    ensure(s <= limit_s, || format!("took {s:.1}s, budget {limit_s}s"))?;
    Ok(s)
}

fn crr_american_put(s0: f64, k: f64, r: f64, vol: f64, t: f64, steps: usize) -> f64 {
    let dt = t / steps as f64;
    let u = (vol * dt.sqrt()).exp();
    let d = 1.0 / u;
    let disc = (-r * dt).exp();
    let p = ((r * dt).exp() - d) / (u - d);
    let mut v: Vec<f64> = (0..=steps)
        .map(|j| (k - s0 * u.powi(j as i32) * d.powi((steps - j) as i32)).max(0.0))
        .collect();
    for n in (0..steps).rev() {
        for j in 0..=n {
            let s = s0 * u.powi(j as i32) * d.powi((n - j) as i32);
            v[j] = (disc * (p * v[j + 1] + (1.0 - p) * v[j])).max(k - s);
        }
    }
    v[0]
}

fn flat_skew_identity() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = rng.random_range(0.001..0.02);
        let r = rng.random_range(0.0..0.06);
        let slice = SviSlice::new(a, 0.0, rng.random_range(-0.9..0.9), rng.random_range(-0.5..0.5), rng.random_range(0.05..1.0))
            .map_err(|e| e.to_string())?;
        let k = fair_strike(&VarSwapInputs::unit(slice, r)).map_err(|e| e.to_string())?;
        worst = worst.max((k - a).abs());
    }
    ensure(worst < 1e-6, || format!("max |K_var - a'| = {worst:e}"))?;
    let s = within_budget(start, 10.0)?;
    Ok(format!("max |K_var - a'| = {worst:.2e} over 100 draws, {s:.2}s"))
}

fn european_consistency() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let strike = rng.random_range(0.85..1.15);
        let rate = rng.random_range(0.0..0.06);
        let vol: f64 = rng.random_range(0.1..0.5);
        let grid = GridSpec::new(500, 500, strike, 1.0);
        let p = PdeProblem::flat(PayoffKind::Put, ExerciseStyle::European, strike, rate, vol * vol);
        let v = greeks_at(&solve(&p, &grid).map_err(|e| e.to_string())?, 1.0).map_err(|e| e.to_string())?.value;
        let q = EuropeanQuote {
            spot: 1.0,
            strike,
            rate,
            vol,
            maturity: 1.0,
        };
        worst = worst.max((v - bs_put(&q).map_err(|e| e.to_string())?).abs());
    }
    ensure(worst < 1e-3, || format!("max |V_fd - P_bs| = {worst:e}"))?;
    let s = within_budget(start, 300.0)?;
    Ok(format!("max |V_fd - P_bs| = {worst:.2e} over 50 puts at 500^2, {s:.1}s"))
}

fn american_degeneracies() -> Check {
    let start = Instant::now();
    let mut worst_call = 0.0f64;
    let mut worst_put = 0.0f64;
    for (strike, rate, var) in [(1.0, 0.05, 0.04), (0.9, 0.03, 0.09), (1.1, 0.06, 0.02)] {
        let grid = GridSpec::new(200, 200, strike, 1.0);
        let price = |kind, style, r| -> Result<Vec<f64>, String> {
            let sol = solve(&PdeProblem::flat(kind, style, strike, r, var), &grid).map_err(|e| e.to_string())?;
            Ok(sol.level(0).to_vec())
        };
        let max_diff = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst_call = worst_call.max(max_diff(
            price(PayoffKind::Call, ExerciseStyle::American, rate)?,
            price(PayoffKind::Call, ExerciseStyle::European, rate)?,
        ));
        worst_put = worst_put.max(max_diff(
            price(PayoffKind::Put, ExerciseStyle::American, 0.0)?,
            price(PayoffKind::Put, ExerciseStyle::European, 0.0)?,
        ));
    }
    ensure(worst_call < 1e-6 && worst_put < 1e-6, || {
        format!("call gap {worst_call:e}, zero-rate put gap {worst_put:e}")
    })?;
    let s = within_budget(start, 120.0)?;
    Ok(format!("call gap {worst_call:.1e}, zero-rate put gap {worst_put:.1e} over all nodes, {s:.1}s"))
}

fn american_put_vs_tree() -> Check {
    let (var, rate, strike) = (0.03, 0.05, 1.0);
    let grid = GridSpec::new(500, 500, strike, 1.0);
    let p = PdeProblem::flat(PayoffKind::Put, ExerciseStyle::American, strike, rate, var);
    let v = greeks_at(&solve(&p, &grid).map_err(|e| e.to_string())?, 1.0).map_err(|e| e.to_string())?.value;
    let tree = crr_american_put(1.0, strike, rate, f64::sqrt(var), 1.0, 5000);
    let gap = (v - tree).abs();
    ensure(gap < 5e-4, || format!("FD {v} vs tree {tree}"))?;
    Ok(format!("FD {v:.6} vs 5000-step tree {tree:.6}, gap {gap:.1e}"))
}

fn pipeline(dir: &str, mode: &str) -> Result<EvalReport, String> {
    for cmd in ["gen", "train", "eval"] {
        cli(&[cmd, "--mode", mode, "--seed", "42", "--out", dir])?;
    }
    read_json(&Path::new(dir).join("reports").join(format!("{mode}_report.json")))
}

fn varswap_accuracy(dir: &str) -> Check {
    let start = Instant::now();
    let report = pipeline(dir, "varswap")?;
    let err = report.err["K_var"];
    ensure(report.n_train == 2000 && report.n_test == 2000, || {
        format!("row counts {} / {}", report.n_train, report.n_test)
    })?;
    ensure(err <= 0.01, || format!("Err(K_var) = {:.3}%", 100.0 * err))?;
    let s = within_budget(start, 600.0)?;
    Ok(format!("Err(K_var) = {:.3}% on 2000/2000 rows, {s:.0}s", 100.0 * err))
}

fn amput_accuracy(dir: &str) -> Check {
    let start = Instant::now();
    let report = pipeline(dir, "amput")?;
    let e = |t: &str| report.err[t];
    ensure(report.n_train == 5000 && report.n_test == 2000, || {
        format!("row counts {} / {}", report.n_train, report.n_test)
    })?;
    let summary = format!(
        "Err V {:.2}%, delta {:.2}%, theta {:.2}%, gamma {:.2}% (unbounded)",
        100.0 * e("V"),
        100.0 * e("delta"),
        100.0 * e("theta"),
        100.0 * e("gamma")
    );
    ensure(e("V") <= 0.03 && e("delta") <= 0.06 && e("theta") <= 0.06, || summary.clone())?;
    let s = within_budget(start, 7200.0)?;
    Ok(format!("{summary} on 5000/2000 rows, {s:.0}s"))
}

fn speedup(dir: &str) -> Check {
    cli(&["bench", "--mode", "amput", "--out", dir, "--grid", "200x200", "--grid", "500x500", "--budget", "60"])?;
    let b: BenchReport = read_json(&Path::new(dir).join("reports").join("amput_bench.json"))?;
    let at = |n: usize| {
        b.reference
            .iter()
            .find(|r| r.grid.is_some_and(|g| g.n_s == n))
            .ok_or_else(|| format!("no {n}^2 row"))
    };
    let (coarse, fine) = (at(200)?, at(500)?);
    ensure(b.n_test == 2000, || format!("{} queries", b.n_test))?;
    ensure(fine.estimated_seconds > coarse.estimated_seconds, || {
        "Crank-Nicolson time does not grow with the grid".into()
    })?;
    ensure(fine.speedup >= 500.0, || format!("speedup at 500^2 is {:.0}x", fine.speedup))?;
    Ok(format!(
        "GPR {:.3}s for 2000 rows x 4 targets; CN 500^2 {:.0}s ({} solved, scaled); speedup {:.0}x (200^2: {:.0}x)",
        b.gpr_seconds, fine.estimated_seconds, fine.solved, fine.speedup, coarse.speedup
    ))
}

fn halton(i: usize, base: usize) -> f64 {
    let (mut f, mut r, mut k) = (1.0, 0.0, i);
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

fn gpr_units() -> Check {
    let rows: Vec<f64> = (1..=60).flat_map(|i| [2.0 * halton(i, 2) - 1.0, 2.0 * halton(i, 3) - 1.0]).collect();
    let y: Vec<f64> = rows
        .chunks(2)
        .map(|x| (4.0 * x[0]).sin() * (3.0 * x[1]).cos() + x[0] * x[1])
        .collect();
    let (m, _) = TrainedGpr::fit(&rows, 2, &y, &SearchSpec::pinned_noise(), Execution::Parallel).map_err(|e| e.to_string())?;
    let mut interp = 0.0f64;
    for (x, t) in rows.chunks(2).zip(&y) {
        interp = interp.max((m.predict_mean(x).map_err(|e| e.to_string())? - t).abs());
    }
    ensure(m.hyperparams().noise == 0.0 && interp < 1e-8, || format!("interpolation error {interp:e}"))?;

    let noisy = TrainedGpr::with_hyperparams(&rows, 2, &y, Hyperparams::new(0.7, 1e-3).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let prior = noisy.output_scaler().scale[0].powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let q = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let v = noisy.predict(&q).map_err(|e| e.to_string())?.variance;
        ensure(v >= 0.0 && v <= prior * (1.0 + 1e-12), || format!("variance {v} above prior {prior}"))?;
    }

    // Closed-form 2x2 log marginal likelihood, including the 1e-10 diagonal jitter.
    let mut lml_gap = 0.0f64;
    for _ in 0..500 {
        let a = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let b = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let yy = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let l = rng.random_range(0.2..5.0);
        let noise = rng.random_range(0.0..1.0);
        let k12 = kernel(&a, &b, l).map_err(|e| e.to_string())?;
        if k12 > 0.99 {
            continue;
        }
        let d = 1.0 + noise * noise + 1e-10;
        let det = d * d - k12 * k12;
        let quad = (d * yy[0] * yy[0] - 2.0 * k12 * yy[0] * yy[1] + d * yy[1] * yy[1]) / det;
        let want = -0.5 * quad - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln();
        let hp = Hyperparams::new(l, noise).map_err(|e| e.to_string())?;
        let got = log_marginal_likelihood(&[a[0], a[1], b[0], b[1]], 2, &yy, &hp).map_err(|e| e.to_string())?;
        lml_gap = lml_gap.max((got - want).abs());
    }
    ensure(lml_gap < 1e-10, || format!("LML gap {lml_gap:e}"))?;
    Ok(format!(
        "interpolation {interp:.1e}, 10^4 variances <= prior, LML 2x2 gap {lml_gap:.1e}"
    ))
}

fn surface_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rel = |fd: f64, an: f64, scale: f64| (fd - an).abs() / an.abs().max(scale);
    let (mut worst, mut calendar_breaks) = (0.0f64, 0);
    for _ in 0..1000 {
        let slice = SviSlice::new(
            rng.random_range(0.0..0.02),
            rng.random_range(0.0..0.3),
            rng.random_range(-0.4..0.8),
            rng.random_range(-0.2..0.6),
            rng.random_range(0.01..1.0),
        )
        .map_err(|e| e.to_string())?;
        let p = SurfaceParams::new(slice, rng.random_range(0.0..1.0)).map_err(|e| e.to_string())?;
        let k = rng.random_range(-1.0..1.0);
        let t = rng.random_range(0.05..0.95);
        let d = p.derivatives(k, t);
        let w = |k: f64, t: f64| p.total_variance(k, t).unwrap();
        let h = 1e-3 * ((k - slice.m()).powi(2) + slice.sigma().powi(2)).sqrt();
        let c1 = |h: f64| (w(k + h, t) - w(k - h, t)) / (2.0 * h);
        let c2 = |h: f64| (w(k + h, t) - 2.0 * w(k, t) + w(k - h, t)) / (h * h);
        let ct = |h: f64| (w(k, t + h) - w(k, t - h)) / (2.0 * h);
        let scale = slice.b() * (1.0 + 1.0 / slice.sigma()) * term_factor(t, p.lambda()).unwrap();
        worst = worst
            .max(rel((4.0 * c1(h) - c1(2.0 * h)) / 3.0, d.dw_dk, scale))
            .max(rel((4.0 * c2(h) - c2(2.0 * h)) / 3.0, d.d2w_dk2, scale))
            .max(rel((4.0 * ct(1e-3) - ct(2e-3)) / 3.0, d.dw_dt, d.w));
        let (t1, t2): (f64, f64) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        if w(k, t1.min(t2)) > w(k, t1.max(t2)) {
            calendar_breaks += 1;
        }
    }
    ensure(worst < 1e-6, || format!("worst relative derivative gap {worst:e}"))?;
    ensure(calendar_breaks == 0, || format!("{calendar_breaks} calendar violations"))?;
    Ok(format!("worst relative derivative gap {worst:.1e}; calendar monotone on 1000 draws"))
}

fn determinism(first: &str, second: &str) -> Check {
    let again = pipeline(second, "varswap")?;
    let before: EvalReport = read_json(&Path::new(first).join("reports").join("varswap_report.json"))?;
    for split in ["train", "test"] {
        let name = format!("varswap_{split}.csv");
        let a = std::fs::read(Path::new(first).join("data").join(&name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(Path::new(second).join("data").join(&name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs between runs"))?;
    }
    ensure(before.same_results(&again), || "EvalReport differs beyond wall-clock".into())?;
    Ok("datasets byte-identical; EvalReport identical apart from wall-clock".into())
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = |name: &str| tmp.path().join(name).display().to_string();
    let (vs, vs2, ap) = (dir("varswap"), dir("varswap-rerun"), dir("amput"));

    let criteria: Vec<Criterion> = vec![
        ("flat-skew variance-swap identity", Box::new(flat_skew_identity)),
        ("European consistency", Box::new(european_consistency)),
        ("American degeneracies", Box::new(american_degeneracies)),
        ("American put vs binomial tree", Box::new(american_put_vs_tree)),
        ("variance-swap surrogate accuracy", Box::new(|| varswap_accuracy(&vs))),
        ("American-put surrogate accuracy", Box::new(|| amput_accuracy(&ap))),
        ("speedup at 500^2", Box::new(|| speedup(&ap))),
        ("GPR unit correctness", Box::new(gpr_units)),
        ("surface correctness", Box::new(surface_correctness)),
        ("determinism", Box::new(|| determinism(&vs, &vs2))),
    ];

    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
