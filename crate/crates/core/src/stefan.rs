//! One-dimensional supercooled Stefan problem in probabilistic form:
//! Lambda_t = P(tau <= t) for tau the first time X0 + B hits (-inf, Lambda],
//! with the minimal jump rule at times when the boundary cannot advance
//! continuously.
//!
//! Both solvers take Lambda frozen over a time step, kill the mass that
//! crosses it, then move the boundary by the smallest advance that absorbs
//! exactly as much mass as the boundary moved:
//! `Delta = inf{x > 0 : x - F(x) > m}` with `m` the mass killed in the step
//! and `F(x)` the surviving mass in `(Lambda, Lambda + x]`. With `m = 0` this
//! is the jump size of the minimality condition.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::mdla::{MdlaRun, SeedGeometry};
use crate::rng::stream;

/// Piecewise-constant density on (0, inf), total mass 1, or the empty
/// density (no mass at all).
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDensity {
    /// (a, b, height) on (a, b], sorted and disjoint.
    pieces: Vec<(f64, f64, f64)>,
}

impl InitialDensity {
    pub fn new(mut pieces: Vec<(f64, f64, f64)>) -> Result<Self> {
        pieces.retain(|p| p.2 != 0.0);
        pieces.sort_by(|p, q| p.0.total_cmp(&q.0));
        for (i, &(a, b, h)) in pieces.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && h.is_finite()) || a < 0.0 || b <= a || h < 0.0 {
                return Err(Error::Config(format!("bad density piece ({a}, {b}] height {h}")));
            }
            if i > 0 && a < pieces[i - 1].1 {
                return Err(Error::Config("density pieces overlap".into()));
            }
        }
        let d = InitialDensity { pieces };
        let mass = d.mass();
        if !d.pieces.is_empty() && (mass - 1.0).abs() > 1e-6 {
            return Err(Error::DensityMass(mass));
        }
        Ok(d)
    }

    /// `height` on (a, b]; the mass must come out as 1.
    pub fn indicator(height: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b, height)])
    }

    pub fn empty() -> Self {
        InitialDensity { pieces: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[(f64, f64, f64)] {
        &self.pieces
    }

    pub fn mass(&self) -> f64 {
        self.pieces.iter().map(|&(a, b, h)| h * (b - a)).sum()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.pieces.iter().find(|p| x > p.0 && x <= p.1).map_or(0.0, |p| p.2)
    }

    /// Mass in (0, x].
    pub fn cdf(&self, x: f64) -> f64 {
        self.pieces.iter().map(|&(a, b, h)| h * (x.min(b) - a).max(0.0)).sum()
    }

    /// Largest value and a point where it is attained.
    pub fn max_value(&self) -> (f64, f64) {
        self.pieces.iter().fold((0.0, 0.0), |acc, p| if p.2 > acc.0 { (p.2, 0.5 * (p.0 + p.1)) } else { acc })
    }

    pub fn support_end(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.1)
    }

    /// Point with mass q below it, for q in [0, mass].
    pub fn quantile(&self, q: f64) -> f64 {
        let mut acc = 0.0;
        for &(a, b, h) in &self.pieces {
            let m = h * (b - a);
            if q <= acc + m {
                return (a + (q - acc) / h).clamp(a, b);
            }
            acc += m;
        }
        self.support_end()
    }

    /// Stratified sample of `count` points: one uniform draw inside each
    /// mass quantile, sorted.
    pub fn stratified(&self, count: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mass = self.mass();
        (0..count).map(|i| self.quantile(mass * (i as f64 + rng.gen::<f64>()) / count as f64)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Backend {
    /// Cell masses on a grid of spacing dx, exact Gaussian transfer.
    Grid { dx: f64 },
    /// `particles` independent Brownian particles; densities are reported
    /// as histograms on cells of width dx.
    MonteCarlo { particles: usize, dx: f64, seed: u64 },
}

/// Mass absorbed into the solid on (a, b] at `time`, spread uniformly
/// (a point mass when a == b).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiMass {
    pub time: f64,
    pub a: f64,
    pub b: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StefanSolution {
    pub u0: InitialDensity,
    pub dt: f64,
    pub dx: f64,
    pub times: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Cumulative absorbed mass at each time.
    pub absorbed: Vec<f64>,
    /// (time, increase of Lambda) for the t = 0 jump and for steps whose
    /// cascade absorbed more than one cell of mass.
    pub jumps: Vec<(f64, f64)>,
    /// Cell masses per time; cell j is (j dx, (j + 1) dx]
    /// intersected with (Lambda, inf).
    pub masses: Vec<Vec<f64>>,
    /// Where and when mass was absorbed: the indicator of the solid outside
    /// jump intervals and the absorbed-mass density on them.
    pub chi: Vec<ChiMass>,
    pub mc_particles: Option<usize>,
}

impl StefanSolution {
    pub fn cell_count(&self) -> usize {
        self.masses.first().map_or(0, Vec::len)
    }

    /// Effective bounds of cell j at time index k.
    pub fn cell_bounds(&self, k: usize, j: usize) -> (f64, f64) {
        let hi = (j as f64 + 1.0) * self.dx;
        let lo = (j as f64 * self.dx).max(self.lambda[k]).min(hi);
        (lo, hi)
    }

    /// Right end of the spatial window.
    pub fn right_edge(&self) -> f64 {
        self.cell_count() as f64 * self.dx
    }

    pub fn surviving_mass(&self, k: usize) -> f64 {
        self.masses[k].iter().sum()
    }

    pub fn final_lambda(&self) -> f64 {
        *self.lambda.last().expect("non-empty")
    }

    /// Lambda at the last grid time not after t.
    pub fn lambda_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t + 1e-12 * self.dt);
        if k == 0 {
            0.0
        } else {
            self.lambda[k - 1]
        }
    }

    /// Binomial standard error of Lambda_T for the Monte Carlo backend, 0
    /// for the grid.
    pub fn stderr(&self) -> f64 {
        match self.mc_particles {
            Some(m) => {
                let l = self.final_lambda().clamp(0.0, 1.0);
                (l * (1.0 - l) / m as f64).sqrt()
            }
            None => 0.0,
        }
    }

    /// `t,lambda,absorbed_mass`
    pub fn solution_csv(&self) -> String {
        let mut out = String::from("t,lambda,absorbed_mass\n");
        for k in 0..self.times.len() {
            let _ = writeln!(out, "{},{},{}", self.times[k], self.lambda[k], self.absorbed[k]);
        }
        out
    }

    /// `t,x,u` at every `every`-th time (and the last), one row per cell
    /// centre above Lambda.
    pub fn density_csv(&self, every: usize) -> String {
        let mut out = String::from("t,x,u\n");
        let every = every.max(1);
        let last = self.times.len() - 1;
        for k in (0..=last).filter(|k| k % every == 0 || *k == last) {
            for j in 0..self.cell_count() {
                let (lo, hi) = self.cell_bounds(k, j);
                if hi <= lo {
                    continue;
                }
                let u = self.masses[k][j] / (hi - lo);
                let _ = writeln!(out, "{},{},{}", self.times[k], 0.5 * (lo + hi), u);
            }
        }
        out
    }
}

/// P(x < Z <= y) for a standard normal Z, accurate in both tails.
fn gauss_mass(x: f64, y: f64) -> f64 {
    if y <= x {
        return 0.0;
    }
    if x >= 0.0 {
        0.5 * (erfc(x / SQRT_2) - erfc(y / SQRT_2))
    } else if y <= 0.0 {
        0.5 * (erfc(-y / SQRT_2) - erfc(-x / SQRT_2))
    } else {
        1.0 - 0.5 * (erfc(-x / SQRT_2) + erfc(y / SQRT_2))
    }
}

/// Smallest x > 0 with x - F(x) > m, for F piecewise linear with the given
/// (width, mass) pieces laid end to end from 0 and zero beyond them.
/// Returns the advance and the mass F(advance).
fn advance(pieces: &[(f64, f64)], m: f64) -> Result<(f64, f64)> {
    const EPS: f64 = 1e-12;
    let (mut x, mut g, mut f) = (0.0, 0.0, 0.0);
    for &(w, mass) in pieces {
        if mass < 0.0 || w < 0.0 {
            return Err(Error::NonMonotoneProfile(x));
        }
        if w == 0.0 {
            g -= mass;
            f += mass;
            continue;
        }
        let slope = 1.0 - mass / w;
        if slope > EPS && g + slope * w > m + EPS {
            let dx = ((m - g) / slope).clamp(0.0, w);
            return Ok((x + dx, f + mass * dx / w));
        }
        x += w;
        g += slope * w;
        f += mass;
    }
    Ok((x + (m - g).max(0.0), f))
}

/// Jump size inf{x > 0 : F(x) < x} of a mass profile, scanning F on the
/// grid x_k = k dx, k <= x_max / dx, with linear interpolation between grid
/// points. Resolution is one grid cell.
pub fn jump_size(f: impl Fn(f64) -> f64, x_max: f64, dx: f64) -> Result<f64> {
    if !(dx > 0.0) || !(x_max > 0.0) {
        return Err(Error::Config("jump_size needs positive dx and x_max".into()));
    }
    let steps = (x_max / dx).ceil() as usize;
    let mut prev = f(0.0);
    if prev.abs() > 1e-12 {
        return Err(Error::Config(format!("profile must vanish at 0, got {prev}")));
    }
    let mut pieces = Vec::with_capacity(steps);
    for k in 1..=steps {
        let x = k as f64 * dx;
        let v = f(x);
        if v < prev - 1e-12 || !v.is_finite() {
            return Err(Error::NonMonotoneProfile(x));
        }
        pieces.push((dx, (v - prev).max(0.0)));
        prev = v;
    }
    Ok(advance(&pieces, 0.0)?.0)
}

/// Cells of the grid solver above Lambda: index of the first cell meeting
/// (Lambda, inf) and its effective lower edge.
fn first_cell(lambda: f64, dx: f64) -> usize {
    // Cell j covers (j dx, (j + 1) dx].
    let j = (lambda / dx).floor().max(0.0) as usize;
    if (j as f64 + 1.0) * dx <= lambda {
        j + 1
    } else {
        j
    }
}

struct Cascade {
    advance: f64,
    cascade_mass: f64,
}

/// Moves Lambda for the grid solver and removes the absorbed mass.
fn grid_cascade(masses: &mut [f64], lambda: &mut f64, dx: f64, m: f64, t: f64, dt: f64, chi: &mut Vec<ChiMass>) -> Result<Cascade> {
    let j0 = first_cell(*lambda, dx);
    let edge = |j: usize| (j as f64 * dx).max(*lambda);
    let pieces: Vec<(f64, f64)> = (j0..masses.len()).map(|j| ((j as f64 + 1.0) * dx - edge(j), masses[j])).collect();
    let (delta, _) = advance(&pieces, m)?;
    let new_lambda = *lambda + delta;
    let mut taken = 0.0;
    for j in j0..masses.len() {
        let (lo, hi) = (edge(j), (j as f64 + 1.0) * dx);
        if lo >= new_lambda {
            break;
        }
        let part = if hi <= new_lambda { masses[j] } else { masses[j] * (new_lambda - lo) / (hi - lo) };
        if part > 0.0 {
            chi.push(ChiMass { time: t, a: lo, b: hi.min(new_lambda), mass: part });
            masses[j] -= part;
            taken += part;
        }
        if hi <= new_lambda {
            masses[j] = 0.0;
        }
    }
    if m > 0.0 {
        chi.push(ChiMass { time: (t - 0.5 * dt).max(0.0), a: *lambda, b: new_lambda, mass: m });
    }
    *lambda = new_lambda;
    Ok(Cascade { advance: delta, cascade_mass: taken })
}

fn check_step(k: usize, t: f64, lambda: f64, absorbed: f64, surviving: f64, total: f64) -> Result<()> {
    let ok = (-1e-12..=1.0 + 1e-9).contains(&lambda)
        && (lambda - absorbed).abs() <= 1e-9
        && (surviving + absorbed - total).abs() <= 1e-9
        && surviving >= -1e-12;
    if ok {
        Ok(())
    } else {
        Err(Error::Invariant(format!(
            "step {k} t={t}: lambda={lambda} absorbed={absorbed} surviving={surviving} total={total}"
        )))
    }
}

/// Solves on [0, T] with steps of size T / ceil(T / dt).
pub fn solve(u0: &InitialDensity, horizon: f64, dt: f64, backend: &Backend) -> Result<StefanSolution> {
    if !(horizon >= 0.0 && dt > 0.0) || !horizon.is_finite() {
        return Err(Error::Config("need T >= 0 and dt > 0".into()));
    }
    match backend {
        Backend::Grid { dx } => solve_grid(u0, horizon, dt, *dx),
        Backend::MonteCarlo { particles, dx, seed } => solve_mc(u0, horizon, dt, *particles, *dx, *seed),
    }
}

fn time_grid(horizon: f64, dt: f64) -> (usize, f64) {
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { dt } else { horizon / steps as f64 };
    (steps, h)
}

fn cell_total(horizon: f64, u0: &InitialDensity, dx: f64) -> usize {
    let right = u0.support_end().max(1.0) + 1.0 + 8.0 * horizon.sqrt();
    (right / dx).ceil() as usize + 1
}

fn solve_grid(u0: &InitialDensity, horizon: f64, dt: f64, dx: f64) -> Result<StefanSolution> {
    if !(dx > 0.0) {
        return Err(Error::Config("dx must be positive".into()));
    }
    let (steps, h) = time_grid(horizon, dt);
    // Rebinning to cell centres adds variance dx^2/12 per step.
    let var = h - dx * dx / 12.0;
    if steps > 0 && var <= 0.0 {
        return Err(Error::Config(format!("dt = {h} must exceed dx^2/12 = {}", dx * dx / 12.0)));
    }
    let sigma = var.max(0.0).sqrt();
    let cells = cell_total(horizon, u0, dx);
    let total = u0.mass();
    let mut masses: Vec<f64> = (0..cells)
        .map(|j| {
            let lo = (j as f64 * dx).max(0.0);
            let hi = (j as f64 + 1.0) * dx;
            (u0.cdf(hi) - u0.cdf(lo)).max(0.0)
        })
        .collect();
    // Any mass beyond the window sits in the last cell.
    masses[cells - 1] += (total - masses.iter().sum::<f64>()).max(0.0);

    let mut sol = StefanSolution {
        u0: u0.clone(),
        dt: h,
        dx,
        times: Vec::with_capacity(steps + 1),
        lambda: Vec::with_capacity(steps + 1),
        absorbed: Vec::with_capacity(steps + 1),
        jumps: Vec::new(),
        masses: Vec::with_capacity(steps + 1),
        chi: Vec::new(),
        mc_particles: None,
    };
    let mut lambda = 0.0;
    let c0 = grid_cascade(&mut masses, &mut lambda, dx, 0.0, 0.0, h, &mut sol.chi)?;
    if c0.advance > 0.0 {
        sol.jumps.push((0.0, c0.advance));
    }
    let mut absorbed = c0.cascade_mass;
    check_step(0, 0.0, lambda, absorbed, masses.iter().sum(), total)?;
    sol.times.push(0.0);
    sol.lambda.push(lambda);
    sol.absorbed.push(absorbed);
    sol.masses.push(masses.clone());

    // Transfer weights from a cell centre to cells at offset d.
    let reach = if sigma > 0.0 { ((8.0 * sigma) / dx).ceil() as i64 + 1 } else { 0 };
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|d| {
            let a = if d == -reach { f64::NEG_INFINITY } else { (d as f64 - 0.5) * dx / sigma };
            let b = if d == reach { f64::INFINITY } else { (d as f64 + 0.5) * dx / sigma };
            gauss_mass(a, b)
        })
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / ksum).collect();

    let mut next = vec![0.0; cells];
    for k in 1..=steps {
        let t = k as f64 * h;
        next.iter_mut().for_each(|v| *v = 0.0);
        let j0 = first_cell(lambda, dx);
        let mut killed = 0.0;
        for j in j0..cells {
            let mass = masses[j];
            if mass == 0.0 {
                continue;
            }
            let lo = (j as f64 * dx).max(lambda);
            let hi = (j as f64 + 1.0) * dx;
            let c = 0.5 * (lo + hi);
            if c - lambda > (reach as f64 + 1.0) * dx {
                for (i, w) in kernel.iter().enumerate() {
                    let dest = (j as i64 + i as i64 - reach).clamp(0, cells as i64 - 1) as usize;
                    next[dest] += mass * w;
                }
                continue;
            }
            // Near the boundary: Gaussian minus its image in Lambda.
            let image = 2.0 * lambda - c;
            let top = ((j as i64 + reach + 1) as usize).min(cells - 1);
            let mut moved = 0.0;
            for i in j0..=top {
                let a = (i as f64 * dx).max(lambda);
                let b = if i == top { f64::INFINITY } else { (i as f64 + 1.0) * dx };
                let frac = (gauss_mass((a - c) / sigma, (b - c) / sigma) - gauss_mass((a - image) / sigma, (b - image) / sigma)).max(0.0);
                next[i] += mass * frac;
                moved += mass * frac;
            }
            killed += (mass - moved).max(0.0);
        }
        std::mem::swap(&mut masses, &mut next);
        let c = grid_cascade(&mut masses, &mut lambda, dx, killed, t, h, &mut sol.chi)?;
        if c.cascade_mass > dx {
            sol.jumps.push((t, c.advance));
        }
        absorbed += killed + c.cascade_mass;
        check_step(k, t, lambda, absorbed, masses.iter().sum(), total)?;
        sol.times.push(t);
        sol.lambda.push(lambda);
        sol.absorbed.push(absorbed);
        sol.masses.push(masses.clone());
    }
    Ok(sol)
}

/// Number of particles taken by the cascade. Point masses make F vanish
/// just above Lambda, so a particle is taken when the front, advanced by
/// its own mass, reaches it; this is the particle analogue of absorbing a
/// walker one lattice cell away and biases Lambda by at most 1/M per step.
fn mc_cascade(sorted: &[f64], absorbed_before: usize, m: usize) -> usize {
    let mut j = 0;
    while j < sorted.len() && sorted[j] <= (absorbed_before + j + 1) as f64 / m as f64 {
        j += 1;
    }
    j
}

fn histogram(positions: &[f64], cells: usize, dx: f64, weight: f64) -> Vec<f64> {
    let mut out = vec![0.0; cells];
    for &x in positions {
        let j = ((x / dx).ceil() as usize).saturating_sub(1);
        out[j.min(cells - 1)] += weight;
    }
    out
}

fn solve_mc(u0: &InitialDensity, horizon: f64, dt: f64, particles: usize, dx: f64, seed: u64) -> Result<StefanSolution> {
    if particles == 0 || !(dx > 0.0) {
        return Err(Error::Config("need particles > 0 and dx > 0".into()));
    }
    let (steps, h) = time_grid(horizon, dt);
    let cells = cell_total(horizon, u0, dx);
    let mut rng = stream(seed, 0);
    let w = 1.0 / particles as f64;
    let mut alive: Vec<f64> = if u0.is_empty() { Vec::new() } else { u0.stratified(particles, &mut rng) };
    let total = if u0.is_empty() { 0.0 } else { 1.0 };
    alive.sort_by(f64::total_cmp);
    let mut sol = StefanSolution {
        u0: u0.clone(),
        dt: h,
        dx,
        times: Vec::with_capacity(steps + 1),
        lambda: Vec::with_capacity(steps + 1),
        absorbed: Vec::with_capacity(steps + 1),
        jumps: Vec::new(),
        masses: Vec::with_capacity(steps + 1),
        chi: Vec::new(),
        mc_particles: Some(particles),
    };
    let mut count = 0usize;
    let j = mc_cascade(&alive, 0, particles);
    for &x in &alive[..j] {
        sol.chi.push(ChiMass { time: 0.0, a: x, b: x, mass: w });
    }
    alive.drain(..j);
    count += j;
    let mut lambda = count as f64 * w;
    if j > 0 {
        sol.jumps.push((0.0, lambda));
    }
    let record = |sol: &mut StefanSolution, t: f64, lambda: f64, count: usize, alive: &[f64]| {
        sol.times.push(t);
        sol.lambda.push(lambda);
        sol.absorbed.push(count as f64 * w);
        sol.masses.push(histogram(alive, cells, dx, w));
    };
    record(&mut sol, 0.0, lambda, count, &alive);
    let sd = h.sqrt();
    for k in 1..=steps {
        let t = k as f64 * h;
        let mut killed = 0usize;
        alive.retain_mut(|x| {
            let z: f64 = rng.sample(StandardNormal);
            let y = *x + sd * z;
            let dead = y <= lambda || rng.gen::<f64>() < (-2.0 * (*x - lambda) * (y - lambda) / h).exp();
            *x = y;
            if dead {
                killed += 1;
            }
            !dead
        });
        alive.sort_by(f64::total_cmp);
        let before = lambda;
        let j = mc_cascade(&alive, count + killed, particles);
        for &x in &alive[..j] {
            sol.chi.push(ChiMass { time: t, a: x, b: x, mass: w });
        }
        alive.drain(..j);
        count += killed + j;
        lambda = count as f64 * w;
        if killed > 0 {
            sol.chi.push(ChiMass { time: t - 0.5 * h, a: before, b: lambda, mass: killed as f64 * w });
        }
        if j as f64 * w > dx {
            sol.jumps.push((t, lambda - before));
        }
        check_step(k, t, lambda, count as f64 * w, alive.len() as f64 * w, total)?;
        record(&mut sol, t, lambda, count, &alive);
    }
    Ok(sol)
}

/// Space-time test function `amplitude cos(omega s) (1 - r^2)^power` with
/// r = (x - center) / radius, zero for |r| >= 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakTest {
    pub center: f64,
    pub radius: f64,
    pub power: i32,
    pub omega: f64,
    pub amplitude: f64,
}

impl WeakTest {
    pub fn bump(center: f64, radius: f64, omega: f64) -> Self {
        WeakTest { center, radius, power: 3, omega, amplitude: 1.0 }
    }

    pub fn zero() -> Self {
        WeakTest { center: 0.0, radius: 1.0, power: 3, omega: 0.0, amplitude: 0.0 }
    }

    fn space(&self, x: f64) -> (f64, f64) {
        let r = (x - self.center) / self.radius;
        let q = 1.0 - r * r;
        if q <= 0.0 {
            return (0.0, 0.0);
        }
        let k = self.power as f64;
        let v = q.powi(self.power);
        let d2 = (-2.0 * k * q.powi(self.power - 1) + 4.0 * k * (k - 1.0) * r * r * q.powi(self.power - 2)) / (self.radius * self.radius);
        (v, d2)
    }

    pub fn value(&self, s: f64, x: f64) -> f64 {
        self.amplitude * (self.omega * s).cos() * self.space(x).0
    }

    /// d/ds + (1/2) d^2/dx^2.
    pub fn heat(&self, s: f64, x: f64) -> f64 {
        let (v, d2) = self.space(x);
        self.amplitude * (-self.omega * (self.omega * s).sin() * v + 0.5 * (self.omega * s).cos() * d2)
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }
}

/// The five-function basket used for refinement studies.
pub fn weak_basket() -> Vec<WeakTest> {
    vec![
        WeakTest::bump(0.6, 0.8, 0.0),
        WeakTest::bump(1.0, 0.7, 3.0),
        WeakTest::bump(1.5, 0.5, 0.0),
        WeakTest::bump(2.0, 0.6, 5.0),
        WeakTest { center: 1.2, radius: 1.2, power: 4, omega: 2.0, amplitude: 1.0 },
    ]
}

const GL_NODES: [f64; 6] = [
    -0.932_469_514_203_152,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152,
];
const GL_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_3,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691,
    0.467_913_934_572_691,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_3,
];

/// Integral of f over (a, b] with six-point Gauss-Legendre, split at the
/// support edges so polynomial pieces are integrated exactly.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, edges: (f64, f64)) -> f64 {
    let (lo, hi) = (a.max(edges.0), b.min(edges.1));
    if hi <= lo {
        return 0.0;
    }
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    half * GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
}

/// Residual of the weak identity at t = T for w = -u and the solid
/// (-inf, Lambda_t]. The (-inf, 0] part cancels identically and is left
/// out. The absorbed-mass record stands in for chi: the indicator where the
/// boundary moved continuously, the absorbed density on jump intervals.
pub fn weak_form_residual(sol: &StefanSolution, tests: &[WeakTest]) -> Result<Vec<f64>> {
    let last = sol.times.len() - 1;
    let horizon = sol.times[last];
    let right = sol.right_edge();
    tests
        .iter()
        .map(|phi| {
            if phi.amplitude == 0.0 {
                return Ok(0.0);
            }
            if !(3..=5).contains(&phi.power) || !(phi.radius > 0.0) {
                return Err(Error::TestFunctionSupport(format!("power {} radius {}", phi.power, phi.radius)));
            }
            let edges = phi.support();
            if edges.1 > right {
                return Err(Error::TestFunctionSupport(format!("support ends at {} beyond the window edge {right}", edges.1)));
            }
            let against_u = |k: usize, f: &dyn Fn(f64) -> f64| -> f64 {
                let mut acc = 0.0;
                for (j, &m) in sol.masses[k].iter().enumerate() {
                    if m == 0.0 {
                        continue;
                    }
                    let (lo, hi) = sol.cell_bounds(k, j);
                    if hi <= lo {
                        continue;
                    }
                    acc += m / (hi - lo) * integrate(f, lo, hi, edges);
                }
                acc
            };
            let mut r = 0.0;
            r -= against_u(last, &|x| phi.value(horizon, x));
            for &(a, b, h) in sol.u0.pieces() {
                r += h * integrate(|x| phi.value(0.0, x), a, b, edges);
            }
            for c in &sol.chi {
                r -= if c.b > c.a {
                    c.mass / (c.b - c.a) * integrate(|x| phi.value(c.time, x), c.a, c.b, edges)
                } else {
                    c.mass * phi.value(c.time, c.a)
                };
            }
            for k in 0..=last {
                let w = if k == 0 || k == last { 0.5 * sol.dt } else { sol.dt };
                if last == 0 {
                    break;
                }
                let s = sol.times[k];
                r += w * against_u(k, &|x| phi.heat(s, x));
            }
            Ok(r.abs())
        })
        .collect()
}

/// Sup over `times` of |attached cubes x spacing - Lambda_t| for a 1D MDLA
/// run grown from the half-line (-inf, 0].
pub fn compare_mdla_1d(run: &MdlaRun, sol: &StefanSolution, times: &[f64]) -> Result<f64> {
    let spec = &run.config.spec;
    if spec.dim != 1 || run.config.seed != (SeedGeometry::HalfSpace { axis: 0, max: 0 }) {
        return Err(Error::MismatchedSeeds(format!("need a d=1 run seeded with (-inf, 0], got {:?} in d={}", run.config.seed, spec.dim)));
    }
    let (peak, at) = sol.u0.max_value();
    if peak > 1.0 {
        return Err(Error::ExclusionInfeasible { x: at, value: peak });
    }
    let log = run.cumulative_log();
    let s = spec.spacing();
    let mut sup: f64 = 0.0;
    for &t in times {
        let i = log.partition_point(|e| e.0 <= t);
        let cubes = if i == 0 { 0 } else { log[i - 1].1 };
        sup = sup.max((cubes as f64 * s - sol.lambda_at(t)).abs());
    }
    Ok(sup)
}

/// Right end of the attached cubes in a 1D run seeded with (-inf, 0].
pub fn mdla_front(run: &MdlaRun, t: f64) -> f64 {
    let s = run.config.spec.spacing();
    run.aggregate.attached_until(t).iter().map(|k: &Site| k.0[0]).max().map_or(0.0, |k| k as f64 * s)
}
