use mdla_lab::lattice::{LatticeSpec, Site};
use mdla_lab::mdla::{run, MdlaConfig, SeedGeometry};
use mdla_lab::particles::InitialLaw;
use mdla_lab::stefan::{
    compare_mdla_1d, jump_size, solve, weak_basket, weak_form_residual, Backend, InitialDensity, StefanSolution, WeakTest,
};
use mdla_lab::Error;
use proptest::prelude::*;

fn benchmark() -> InitialDensity {
    InitialDensity::indicator(1.0, 1.0, 2.0).unwrap()
}

/// Surviving mass in (Lambda, Lambda + x] at time index k.
fn profile(sol: &StefanSolution, k: usize) -> impl Fn(f64) -> f64 + '_ {
    move |x| {
        let top = sol.lambda[k] + x;
        (0..sol.cell_count())
            .map(|j| {
                let (lo, hi) = sol.cell_bounds(k, j);
                if hi <= lo || top <= lo {
                    0.0
                } else {
                    sol.masses[k][j] * ((top.min(hi) - lo) / (hi - lo))
                }
            })
            .sum()
    }
}

#[test]
fn jump_size_examples() {
    assert_eq!(jump_size(|x| 0.5 * x, 2.0, 0.01).unwrap(), 0.0);
    assert!((jump_size(|x: f64| (2.0 * x).min(1.0), 2.0, 0.01).unwrap() - 1.0).abs() < 1e-9);
    let j = jump_size(|x: f64| x.min(0.3), 2.0, 0.01).unwrap();
    assert!((j - 0.3).abs() <= 0.01, "{j}");
    assert!(matches!(jump_size(|x: f64| (x * 10.0).sin(), 2.0, 0.01), Err(Error::NonMonotoneProfile(_))));
}

#[test]
fn initial_density_validation() {
    assert!(matches!(InitialDensity::indicator(1.0, 0.0, 0.5), Err(Error::DensityMass(_))));
    assert!(InitialDensity::new(vec![(-1.0, 0.0, 1.0)]).is_err());
    assert!(InitialDensity::new(vec![(0.0, 1.0, 0.5), (0.5, 1.5, 0.5)]).is_err());
    let d = InitialDensity::new(vec![(0.0, 1.0, 0.5), (1.0, 2.0, 0.5)]).unwrap();
    assert!((d.cdf(1.5) - 0.75).abs() < 1e-15);
}

#[test]
fn full_absorption_at_time_zero() {
    let u0 = InitialDensity::indicator(2.0, 0.0, 0.5).unwrap();
    let sol = solve(&u0, 0.1, 0.001, &Backend::Grid { dx: 0.01 }).unwrap();
    assert!((sol.lambda[0] - 1.0).abs() <= 0.01);
    assert!(sol.surviving_mass(0).abs() < 1e-12);
    assert!(sol.lambda.iter().all(|&l| l == sol.lambda[0]));
    assert_eq!(sol.jumps.len(), 1);
    let mc = solve(&u0, 0.1, 0.001, &Backend::MonteCarlo { particles: 5000, dx: 0.01, seed: 1 }).unwrap();
    assert!((mc.lambda[0] - 1.0).abs() <= 1e-12);
}

#[test]
fn no_jump_when_support_is_away() {
    let sol = solve(&benchmark(), 0.05, 0.001, &Backend::Grid { dx: 0.01 }).unwrap();
    assert_eq!(sol.lambda[0], 0.0);
    assert!(sol.jumps.is_empty());
}

#[test]
fn benchmark_invariants() {
    let sol = solve(&benchmark(), 0.25, 0.001, &Backend::Grid { dx: 0.005 }).unwrap();
    for k in 0..sol.times.len() {
        assert!((sol.surviving_mass(k) + sol.lambda[k] - 1.0).abs() < 2e-3);
        assert!((sol.absorbed[k] - sol.lambda[k]).abs() < 1e-9);
        assert!(sol.masses[k].iter().all(|&m| m >= 0.0));
        for j in 0..sol.cell_count() {
            if (j as f64 + 1.0) * sol.dx <= sol.lambda[k] {
                assert_eq!(sol.masses[k][j], 0.0);
            }
        }
        if k > 0 {
            assert!(sol.lambda[k] >= sol.lambda[k - 1]);
        }
        // No further jump is admissible after the step.
        assert!(jump_size(profile(&sol, k), 3.0, sol.dx).unwrap() <= sol.dx);
    }
    assert!(sol.final_lambda() > 0.005 && sol.final_lambda() < 0.02);
}

#[test]
fn backends_agree() {
    let grid = solve(&benchmark(), 0.25, 0.001, &Backend::Grid { dx: 0.005 }).unwrap();
    let fine = solve(&benchmark(), 0.25, 0.0005, &Backend::Grid { dx: 0.0025 }).unwrap();
    let mc = solve(&benchmark(), 0.25, 0.001, &Backend::MonteCarlo { particles: 100_000, dx: 0.01, seed: 4 }).unwrap();
    let bound = (grid.final_lambda() - fine.final_lambda()).abs();
    let gap = (mc.final_lambda() - grid.final_lambda()).abs();
    assert!(gap < 3.0 * (mc.stderr() + bound), "gap {gap}, se {}, grid {bound}", mc.stderr());
}

#[test]
fn monte_carlo_is_reproducible() {
    let b = Backend::MonteCarlo { particles: 2000, dx: 0.01, seed: 9 };
    assert_eq!(solve(&benchmark(), 0.05, 0.001, &b).unwrap(), solve(&benchmark(), 0.05, 0.001, &b).unwrap());
}

#[test]
fn weak_residual_basics() {
    let sol = solve(&benchmark(), 0.1, 0.002, &Backend::Grid { dx: 0.01 }).unwrap();
    assert_eq!(weak_form_residual(&sol, &[WeakTest::zero()]).unwrap(), vec![0.0]);
    let far = WeakTest::bump(100.0, 1.0, 0.0);
    assert!(matches!(weak_form_residual(&sol, &[far]), Err(Error::TestFunctionSupport(_))));

    // All mass absorbed at t = 0: only the jump-interval quadrature remains.
    let u0 = InitialDensity::indicator(2.0, 0.0, 0.5).unwrap();
    let gone = solve(&u0, 0.1, 0.002, &Backend::Grid { dx: 0.01 }).unwrap();
    for r in weak_form_residual(&gone, &weak_basket()).unwrap() {
        assert!(r < 1e-12, "{r}");
    }
}

#[test]
fn weak_residual_refines() {
    let mut prev: Option<Vec<f64>> = None;
    for (dt, dx) in [(0.004, 0.02), (0.002, 0.01), (0.001, 0.005)] {
        let sol = solve(&benchmark(), 0.25, dt, &Backend::Grid { dx }).unwrap();
        let r = weak_form_residual(&sol, &weak_basket()).unwrap();
        if let Some(p) = prev {
            for (a, b) in p.iter().zip(&r) {
                assert!(a / b >= 2.0, "{p:?} -> {r:?}");
            }
        }
        prev = Some(r);
    }
}

#[test]
fn csv_headers() {
    let sol = solve(&benchmark(), 0.01, 0.005, &Backend::Grid { dx: 0.05 }).unwrap();
    assert!(sol.solution_csv().starts_with("t,lambda,absorbed_mass\n0,0,0\n"));
    let d = sol.density_csv(1);
    assert!(d.starts_with("t,x,u\n"));
    assert_eq!(d.lines().count(), 1 + sol.times.len() * sol.cell_count());
}

fn mdla_1d(n: u32, law: InitialLaw, seed: SeedGeometry) -> MdlaConfig {
    let spec = LatticeSpec::new(1, n).unwrap();
    let mut cfg = MdlaConfig::new(spec, seed, law, 0.1);
    cfg.rng_seed = 3;
    cfg
}

#[test]
fn compare_with_mdla_edge_cases() {
    let half = SeedGeometry::HalfSpace { axis: 0, max: 0 };
    let none = run(&mdla_1d(50, InitialLaw::Sites(vec![]), half.clone())).unwrap();
    let empty = solve(&InitialDensity::empty(), 0.1, 0.01, &Backend::Grid { dx: 0.01 }).unwrap();
    assert_eq!(compare_mdla_1d(&none, &empty, &[0.0, 0.05, 0.1]).unwrap(), 0.0);

    let other = run(&mdla_1d(50, InitialLaw::Sites(vec![]), SeedGeometry::Cubes(vec![Site::d1(0)]))).unwrap();
    assert!(matches!(compare_mdla_1d(&other, &empty, &[0.1]), Err(Error::MismatchedSeeds(_))));

    let dense = solve(&InitialDensity::indicator(2.0, 0.0, 0.5).unwrap(), 0.1, 0.01, &Backend::Grid { dx: 0.01 }).unwrap();
    let err = compare_mdla_1d(&none, &dense, &[0.1]).unwrap_err();
    assert!(err.to_string().starts_with("exclusion-infeasible density"));
}

proptest! {
    #[test]
    fn jump_size_matches_direct_scan(heights in proptest::collection::vec(0.0f64..3.0, 1..20)) {
        // F has density heights[i] on (i/10, (i+1)/10]; breakpoints lie on
        // the solver grid, so its answer is exact up to rounding.
        let w = 0.1;
        let f = |x: f64| {
            heights.iter().enumerate().map(|(i, h)| h * (x - i as f64 * w).clamp(0.0, w)).sum::<f64>()
        };
        let got = jump_size(f, 5.0, w).unwrap();
        let step = 1e-4;
        let oracle = (1..=60_000).map(|k| k as f64 * step).find(|&x| f(x) < x - 1e-9).unwrap();
        prop_assert!((got - oracle).abs() <= 2.0 * step, "{} vs {}", got, oracle);
    }
}
