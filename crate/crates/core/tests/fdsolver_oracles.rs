use surrogate_core::analytics::{bs_put, EuropeanQuote};
use surrogate_core::fdsolver::{
    build_operator, greeks_at, psor, solve, step_system, ExerciseStyle, GridSpec, PayoffKind, PdeProblem,
    PsorConfig,
};
use surrogate_core::volsurface::{DupirePolicy, SurfaceParams, SviSlice};

const VAR: f64 = 0.03;

fn american_put(r: f64) -> PdeProblem {
    PdeProblem::flat(PayoffKind::Put, ExerciseStyle::American, 1.0, r, VAR)
}

/// Cox–Ross–Rubinstein tree for an American put.
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
            let cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            v[j] = cont.max(k - s);
        }
    }
    v[0]
}

/// Dense policy iteration for `min(M x − b, x − Φ) = 0`.
fn policy_iteration(m: &[Vec<f64>], b: &[f64], phi: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut exercise = vec![false; n];
    for _ in 0..200 {
        let mut a = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            if exercise[i] {
                a[i][i] = 1.0;
                rhs[i] = phi[i];
            } else {
                a[i].clone_from(&m[i]);
                rhs[i] = b[i];
            }
        }
        let x = gauss(a, rhs);
        let next: Vec<bool> = (0..n)
            .map(|i| {
                let mx: f64 = (0..n).map(|j| m[i][j] * x[j]).sum::<f64>() - b[i];
                x[i] - phi[i] < mx
            })
            .collect();
        if next == exercise {
            return x;
        }
        exercise = next;
    }
    panic!("policy iteration did not settle");
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            let pivot = a[c].clone();
            for (x, p) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * p;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn psor_step_matches_policy_iteration() {
    let problem = american_put(0.05);
    let grid = GridSpec::new(65, 64, 1.0, 1.0);
    let interior = grid.interior_nodes();
    assert_eq!(interior.len(), 64);
    let var = vec![VAR; 64];
    let dt = 1.0 / 64.0;
    let old = build_operator(&problem, &grid, 1.0, &var);
    let new = build_operator(&problem, &grid, 1.0 - dt, &var);
    let phi: Vec<f64> = interior.iter().map(|s| (1.0 - s).max(0.0)).collect();
    let (m, rhs) = step_system(&phi, &old, &new, dt, 0.5);

    let mut dense = vec![vec![0.0; 64]; 64];
    for i in 0..64 {
        dense[i][i] = m.diag[i];
        if i > 0 {
            dense[i][i - 1] = m.lower[i];
        }
        if i < 63 {
            dense[i][i + 1] = m.upper[i];
        }
    }
    let oracle = policy_iteration(&dense, &rhs, &phi);

    let mut x = phi.clone();
    let mut binding = vec![false; 64];
    psor(&m, &rhs, &phi, &mut x, &mut binding, &PsorConfig::default()).unwrap();
    let worst = x.iter().zip(&oracle).map(|(a, e)| (a - e).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
    assert!(x.iter().zip(&phi).all(|(v, p)| v >= p));
}

#[test]
fn american_put_matches_binomial_tree() {
    let sol = solve(&american_put(0.05), &GridSpec::new(500, 500, 1.0, 1.0)).unwrap();
    let v = greeks_at(&sol, 1.0).unwrap().value;
    let tree = crr_american_put(1.0, 1.0, 0.05, VAR.sqrt(), 1.0, 5000);
    assert!((v - tree).abs() < 5e-4, "pde {v} tree {tree}");
}

#[test]
fn european_put_on_reference_grid() {
    let problem = PdeProblem::flat(PayoffKind::Put, ExerciseStyle::European, 1.0, 0.05, VAR);
    let sol = solve(&problem, &GridSpec::new(500, 500, 1.0, 1.0)).unwrap();
    let exact = bs_put(&EuropeanQuote {
        spot: 1.0,
        strike: 1.0,
        rate: 0.05,
        vol: VAR.sqrt(),
        maturity: 1.0,
    })
    .unwrap();
    assert!((greeks_at(&sol, 1.0).unwrap().value - exact).abs() < 1e-3);
}

#[test]
fn zero_rate_american_put_is_european() {
    let grid = GridSpec::new(200, 200, 1.0, 1.0);
    let am = solve(&american_put(0.0), &grid).unwrap();
    let eu = solve(&PdeProblem::flat(PayoffKind::Put, ExerciseStyle::European, 1.0, 0.0, VAR), &grid).unwrap();
    let worst = am.values.iter().zip(&eu.values).map(|(a, e)| (a - e).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
    assert!(am.exercise_boundary[..grid.n_t].iter().all(Option::is_none));
}

#[test]
fn exercise_boundary_sits_below_strike_and_rises_toward_expiry() {
    let grid = GridSpec::new(400, 400, 1.0, 1.0);
    let sol = solve(&american_put(0.05), &grid).unwrap();
    let b = &sol.exercise_boundary;
    assert!(b[grid.n_t].is_none());
    let levels: Vec<f64> = b[..grid.n_t].iter().map(|x| x.expect("boundary at every level")).collect();
    assert!(levels.iter().all(|s| *s < 1.0));
    for w in levels.windows(2) {
        assert!(w[1] >= w[0], "boundary falls in calendar time: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn gamma_jumps_at_the_exercise_boundary() {
    let sol = solve(&american_put(0.05), &GridSpec::new(500, 500, 1.0, 1.0)).unwrap();
    let (_, gamma) = sol.nodal_delta_gamma(0);
    let mut jumps: Vec<f64> = gamma.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let largest = jumps.iter().cloned().fold(0.0, f64::max);
    jumps.sort_by(f64::total_cmp);
    let median = jumps[jumps.len() / 2];
    assert!(largest > 10.0 * median, "largest {largest} median {median}");
    // The jump sits at the boundary, not at the strike.
    let at = gamma.windows(2).position(|w| (w[1] - w[0]).abs() == largest).unwrap();
    let s_at = sol.s_nodes[at + 1];
    let boundary = sol.exercise_boundary[0].unwrap();
    assert!((s_at - boundary).abs() <= 2.0 * sol.ds(), "{s_at} vs {boundary}");
}

#[test]
fn theta_non_positive_in_continuation_region() {
    let sol = solve(&american_put(0.05), &GridSpec::new(300, 300, 1.0, 1.0)).unwrap();
    let (v0, v1) = (sol.level(0), sol.level(1));
    let dt = sol.dt();
    for (i, s) in sol.s_nodes.iter().enumerate().take(sol.s_nodes.len() - 1).skip(1) {
        if v0[i] > (1.0 - s).max(0.0) + 1e-10 {
            assert!((v1[i] - v0[i]) / dt <= 1e-9, "S = {s}");
        }
    }
}

#[test]
fn deep_itm_put_greeks() {
    let sol = solve(&american_put(0.05), &GridSpec::new(300, 300, 1.0, 1.0)).unwrap();
    let g = greeks_at(&sol, 0.5).unwrap();
    assert!((g.delta + 1.0).abs() < 1e-9);
    assert!(g.gamma.abs() < 1e-6);
    assert!((g.value - 0.5).abs() < 1e-12);
}

#[test]
fn grid_refinement_shrinks_the_change() {
    use rand::{RngExt, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let k = rng.random_range(0.85..1.15);
        let r = rng.random_range(0.0..0.06);
        let var = rng.random_range(0.01..0.09);
        let p = PdeProblem::flat(PayoffKind::Put, ExerciseStyle::American, k, r, var);
        let v = |n: usize| greeks_at(&solve(&p, &GridSpec::new(n, n, k, 1.0)).unwrap(), 1.0).unwrap().value;
        let (v2, v5, v10) = (v(200), v(500), v(1000));
        assert!((v5 - v10).abs() < (v2 - v5).abs(), "K={k} r={r} var={var}: {v2} {v5} {v10}");
    }
}

#[test]
fn surface_driven_put_is_finite_and_monotone_in_strike() {
    // This surface has a shallow butterfly violation in the far call wing
    // near expiry, so the cap substitution is exercised as well.
    let surface = SurfaceParams::new(SviSlice::new(0.01, 0.15, 0.2, 0.2, 0.5).unwrap(), 0.5).unwrap();
    let mut last = 0.0;
    for i in 0..=12 {
        let k = 0.85 + 0.025 * i as f64;
        let grid = GridSpec::new(200, 200, k, 1.0);
        let p = PdeProblem::with_surface(
            PayoffKind::Put,
            ExerciseStyle::American,
            k,
            0.03,
            1.0,
            &surface,
            &grid,
            DupirePolicy::Clamp,
        )
        .unwrap();
        if let surrogate_core::fdsolver::VarianceSource::Grid(table) = &p.variance {
            assert!(table.substituted() > 0);
        }
        let g = greeks_at(&solve(&p, &grid).unwrap(), 1.0).unwrap();
        assert!(g.value.is_finite() && g.delta.is_finite() && g.gamma.is_finite() && g.theta.is_finite());
        assert!(g.value > last, "K = {k}");
        last = g.value;
    }
}
