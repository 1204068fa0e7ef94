use std::path::PathBuf;

use surrogate_core::dataset::{value_record, Mode};
use surrogate_core::fdsolver::{solve, ExerciseStyle, PayoffKind, PdeProblem};
use surrogate_core::volsurface::{SurfaceParams, SviSlice};

use super::{csv_writer, num};
use crate::config::RunConfig;
use crate::{io_err, CliError, Result, SweepKind};

const SVI_FACTORS: [&str; 5] = ["a_prime", "b", "rho", "m", "sigma"];
/// Log-moneyness axis for w(k) sweeps.
const K_POINTS: usize = 101;
const K_RANGE: (f64, f64) = (-1.0, 1.0);
/// Share of time levels next to expiry left out of the Γ heatmap, where Γ blows up.
const GAMMA_CUTOFF: f64 = 0.02;

/// Default baselines in the mode's column order.
pub fn default_baseline(mode: Mode) -> Vec<f64> {
    match mode {
        Mode::VarSwap => vec![0.01, 0.15, -0.1, 0.2, 0.2, 0.03],
        Mode::AmPut => vec![0.01, 0.15, 0.2, 0.2, 0.5, 0.5, 1.0, 0.03],
    }
}

fn baseline(cfg: &RunConfig, mode: Mode) -> Result<Vec<f64>> {
    let mut x = default_baseline(mode);
    for (name, value) in &cfg.sensitivity.baseline {
        if let Some(i) = mode.input_names().iter().position(|n| n == name) {
            x[i] = *value;
        }
    }
    for (name, v) in mode.input_names().iter().zip(&x) {
        let r = cfg.ranges.get(name).expect("mode factors have ranges").train;
        if !(*v >= r.lo && *v <= r.hi) {
            return Err(CliError::Config(format!(
                "baseline {name} = {v} lies outside the train range [{}, {}]",
                r.lo, r.hi
            )));
        }
    }
    Ok(x)
}

/// Cell midpoints over the factor's train range, so open endpoints such as σ = 0 are never hit.
fn sweep_values(cfg: &RunConfig, factor: &str) -> Vec<f64> {
    let r = cfg.ranges.get(factor).expect("validated factor").train;
    let p = cfg.sensitivity.points;
    (0..p).map(|i| r.lo + (r.hi - r.lo) * (i as f64 + 0.5) / p as f64).collect()
}

fn factors(cfg: &RunConfig, kind: SweepKind) -> Result<Vec<String>> {
    let all: Vec<String> = match kind {
        SweepKind::Surface => SVI_FACTORS.iter().map(|s| s.to_string()).collect(),
        _ => cfg.mode.input_names().iter().map(|s| s.to_string()).collect(),
    };
    let chosen = cfg.sensitivity.factors.clone().unwrap_or(all);
    if kind == SweepKind::Surface {
        if let Some(f) = chosen.iter().find(|f| !SVI_FACTORS.contains(&f.as_str())) {
            return Err(CliError::Config(format!("`{f}` does not shape w(k); choose among {SVI_FACTORS:?}")));
        }
    }
    Ok(chosen)
}

fn target_sweeps(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mode = cfg.mode;
    let base = baseline(cfg, mode)?;
    let mut files = Vec::new();
    for factor in factors(cfg, SweepKind::Target)? {
        let i = mode.input_names().iter().position(|n| *n == factor).expect("validated factor");
        let xs: Vec<Vec<f64>> = sweep_values(cfg, &factor)
            .into_iter()
            .map(|v| {
                let mut x = base.clone();
                x[i] = v;
                x
            })
            .collect();
        let ys = cfg.exec().map(&xs, |x| value_record(mode, x, &cfg.solver));
        let path = cfg.sensitivity_dir().join(format!("{mode}_{factor}.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record(std::iter::once(factor.as_str()).chain(mode.target_names().iter().copied()))?;
        for (x, y) in xs.iter().zip(ys) {
            let (y, _) = y?;
            w.write_record(std::iter::once(num(x[i])).chain(y.into_iter().map(num)))?;
        }
        w.flush().map_err(io_err(&path))?;
        files.push(path);
    }
    Ok(files)
}

fn surface_sweeps(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let base = baseline(cfg, cfg.mode)?;
    let ks: Vec<f64> = (0..K_POINTS)
        .map(|j| K_RANGE.0 + (K_RANGE.1 - K_RANGE.0) * j as f64 / (K_POINTS - 1) as f64)
        .collect();
    let mut files = Vec::new();
    for factor in factors(cfg, SweepKind::Surface)? {
        let i = SVI_FACTORS.iter().position(|n| *n == factor).expect("validated factor");
        let path = cfg.sensitivity_dir().join(format!("surface_{factor}.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record([factor.as_str(), "k", "w"])?;
        for v in sweep_values(cfg, &factor) {
            let mut p = [base[0], base[1], base[2], base[3], base[4]];
            p[i] = v;
            let slice = SviSlice::new(p[0], p[1], p[2], p[3], p[4]).map_err(CliError::from)?;
            for &k in &ks {
                w.write_record([num(v), num(k), num(slice.total_variance(k))])?;
            }
        }
        w.flush().map_err(io_err(&path))?;
        files.push(path);
    }
    Ok(files)
}

/// Value, Greeks and exercise boundary of the baseline American put over the whole grid.
fn pde_maps(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.mode != Mode::AmPut {
        return Err(CliError::Config("pde maps need --mode amput".into()));
    }
    let x = baseline(cfg, Mode::AmPut)?;
    let (lambda, strike, r) = (x[5], x[6], x[7]);
    let surface = SurfaceParams::new(SviSlice::new(x[0], x[1], x[2], x[3], x[4])?, lambda)?;
    let grid = cfg.solver.grid(strike);
    let problem = PdeProblem::with_surface(
        PayoffKind::Put,
        ExerciseStyle::American,
        strike,
        r,
        cfg.solver.spot,
        &surface,
        &grid,
        cfg.solver.dupire_policy,
    )?;
    let sol = solve(&problem, &grid)?;
    let dir = cfg.sensitivity_dir();
    let levels = sol.t_nodes.len();

    let value_path = dir.join("pde_value.csv");
    let mut w = csv_writer(&value_path)?;
    w.write_record(["t", "S", "V"])?;
    for (n, t) in sol.t_nodes.iter().enumerate() {
        for (s, v) in sol.s_nodes.iter().zip(sol.level(n)) {
            w.write_record([num(*t), num(*s), num(*v)])?;
        }
    }
    w.flush().map_err(io_err(&value_path))?;

    let cut = ((levels - 1) as f64 * GAMMA_CUTOFF).ceil() as usize;
    let greeks_path = dir.join("pde_greeks.csv");
    let mut w = csv_writer(&greeks_path)?;
    w.write_record(["t", "S", "delta", "gamma"])?;
    for n in 0..levels - cut {
        let (delta, gamma) = sol.nodal_delta_gamma(n);
        for (j, (d, g)) in delta.iter().zip(&gamma).enumerate() {
            w.write_record([num(sol.t_nodes[n]), num(sol.s_nodes[j + 1]), num(*d), num(*g)])?;
        }
    }
    w.flush().map_err(io_err(&greeks_path))?;

    let boundary_path = dir.join("pde_boundary.csv");
    let mut w = csv_writer(&boundary_path)?;
    w.write_record(["t", "S_b"])?;
    for (t, b) in sol.t_nodes.iter().zip(&sol.exercise_boundary) {
        if let Some(b) = b {
            w.write_record([num(*t), num(*b)])?;
        }
    }
    w.flush().map_err(io_err(&boundary_path))?;
    Ok(vec![value_path, greeks_path, boundary_path])
}

pub fn run(cfg: &RunConfig, kind: SweepKind) -> Result<serde_json::Value> {
    let files = match kind {
        SweepKind::Target => target_sweeps(cfg)?,
        SweepKind::Surface => surface_sweeps(cfg)?,
        SweepKind::Pde => pde_maps(cfg)?,
    };
    Ok(serde_json::json!({ "command": "sensitivity", "mode": cfg.mode, "files": files }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baselines_sit_inside_the_train_ranges() {
        for mode in [Mode::VarSwap, Mode::AmPut] {
            let cfg = RunConfig::defaults(mode);
            assert_eq!(baseline(&cfg, mode).unwrap(), default_baseline(mode));
        }
        let mut cfg = RunConfig::defaults(Mode::VarSwap);
        cfg.sensitivity.baseline.insert("rho".into(), 0.95);
        assert!(matches!(baseline(&cfg, Mode::VarSwap), Err(CliError::Config(_))));
    }

    #[test]
    fn sweep_points_avoid_open_endpoints() {
        let cfg = RunConfig::defaults(Mode::AmPut);
        let v = sweep_values(&cfg, "sigma");
        assert_eq!(v.len(), 50);
        assert!(v[0] > 0.0 && v[49] < 1.0);
    }
}
