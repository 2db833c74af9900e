//! Checks run on top of simulations: the finite-N growth identity, chaos and
//! tagged-particle diagnostics for the exclusion process, the continuous
//! interpolation of jump paths, and the mushy-region example.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::aggregate::{distance_field, GridSpec};
use crate::engine::{Dynamics, EventEngine};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, Domain, LatticeSpec, Point, Site};
use crate::mdla::{run, MdlaConfig, MdlaRun, SeedGeometry};
use crate::output::Manifest;
use crate::particles::{InitialLaw, ParticleSystem};
use crate::rng::{stream, substream};
use crate::winding::Polyline;

/// max |g'| for g(r) = (1 - r^2)^3, attained at r = 1/sqrt(5).
const BUMP_SLOPE: f64 = 1.717_300_846_271_587_2;

/// Nonnegative test functions with exact cube integrals.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    /// height * prod_i (1 - r_i^2)^3 with r_i = (x_i - c_i) / radius, on the
    /// box |r_i| < 1.
    Bump { center: Point, radius: f64, height: f64 },
    /// The constant `value` everywhere.
    Constant { value: f64 },
}

fn bump_1d(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - r * r).powi(3)
    }
}

/// Antiderivative of (1 - r^2)^3 clamped to [-1, 1].
fn bump_1d_primitive(r: f64) -> f64 {
    let r = r.clamp(-1.0, 1.0);
    let r2 = r * r;
    r * (1.0 - r2 + 0.6 * r2 * r2 - r2 * r2 * r2 / 7.0)
}

impl TestFunction {
    pub fn bump(center: Point, radius: f64, height: f64) -> Result<Self> {
        if !(radius > 0.0) || !(height >= 0.0) {
            return Err(Error::Config("bump needs radius > 0 and height >= 0".into()));
        }
        Ok(TestFunction::Bump { center, radius, height })
    }

    pub fn value(&self, p: &Point, dim: usize) -> f64 {
        match self {
            TestFunction::Bump { center, radius, height } => {
                height * (0..dim).map(|i| bump_1d((p[i] - center[i]) / radius)).product::<f64>()
            }
            TestFunction::Constant { value } => *value,
        }
    }

    /// Upper bound on sup |grad phi|.
    pub fn gradient_bound(&self, dim: usize) -> f64 {
        match self {
            TestFunction::Bump { radius, height, .. } => height * BUMP_SLOPE * (dim as f64).sqrt() / radius,
            TestFunction::Constant { .. } => 0.0,
        }
    }

    /// Exact integral over the cube of side h centred at c.
    pub fn cube_integral(&self, c: &Point, h: f64, dim: usize) -> f64 {
        match self {
            TestFunction::Bump { center, radius, height } => {
                height
                    * (0..dim)
                        .map(|i| {
                            let a = (c[i] - h / 2.0 - center[i]) / radius;
                            let b = (c[i] + h / 2.0 - center[i]) / radius;
                            radius * (bump_1d_primitive(b) - bump_1d_primitive(a))
                        })
                        .product::<f64>()
            }
            TestFunction::Constant { value } => value * h.powi(dim as i32),
        }
    }

    /// Closed support box, if bounded.
    pub fn support(&self) -> Option<(Point, Point)> {
        match self {
            TestFunction::Bump { center, radius, .. } => {
                Some((center.map(|c| c - radius), center.map(|c| c + radius)))
            }
            TestFunction::Constant { .. } => None,
        }
    }
}

fn domain_box(spec: &LatticeSpec) -> Option<(Point, Point)> {
    match spec.domain {
        Domain::Box { lo, hi } => {
            let s = spec.spacing();
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            for i in 0..spec.dim {
                a[i] = lo.0[i] as f64 * s - s / 2.0;
                b[i] = hi.0[i] as f64 * s + s / 2.0;
            }
            Some((a, b))
        }
        Domain::Unbounded => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthRow {
    pub time: f64,
    pub attached: usize,
    /// Integral of phi over the cubes attached by `time`.
    pub cube_side: f64,
    /// Cell volume times the sum of phi at the absorbed particles.
    pub particle_side: f64,
    /// sup|grad phi| * s sqrt(d) / 2 * max(1, attached volume).
    pub bound: f64,
}

impl GrowthRow {
    pub fn gap(&self) -> f64 {
        self.particle_side - self.cube_side
    }
}

/// Both sides of the finite-N growth identity at each time. Each absorbed
/// particle sits in the cube it added, so the sides differ only by the
/// midpoint error of each cube.
pub fn growth_check(run: &MdlaRun, phi: &TestFunction, times: &[f64]) -> Result<Vec<GrowthRow>> {
    let spec = run.aggregate.spec();
    let dim = spec.dim;
    if let (Some((a, b)), Some((lo, hi))) = (phi.support(), domain_box(spec)) {
        if (0..dim).any(|i| a[i] < lo[i] || b[i] > hi[i]) {
            return Err(Error::TestFunctionSupport("support leaves the simulated box".into()));
        }
    }
    let s = spec.spacing();
    let vol = spec.cell_volume();
    let slack = phi.gradient_bound(dim) * s * (dim as f64).sqrt() / 2.0;
    let log = run.aggregate.log();
    Ok(times
        .iter()
        .map(|&t| {
            let (mut cube_side, mut particle_side, mut attached) = (0.0, 0.0, 0usize);
            for e in log.iter().take_while(|e| e.time <= t) {
                for (c, &p) in e.cubes.iter().zip(&e.particles) {
                    cube_side += phi.cube_integral(&spec.center(*c), s, dim);
                    particle_side += phi.value(&spec.center(run.particles.position(p)), dim) * vol;
                    attached += 1;
                }
            }
            let bound = slack * (attached as f64 * vol).max(1.0);
            GrowthRow { time: t, attached, cube_side, particle_side, bound }
        })
        .collect())
}

/// Runs events up to `horizon`, calling `between(t0, t1, sys)` for every
/// interval on which the configuration is constant.
fn run_until(
    engine: &mut EventEngine,
    sys: &mut ParticleSystem,
    horizon: f64,
    mut between: impl FnMut(f64, f64, &ParticleSystem),
) -> Result<()> {
    let mut t = engine.clock();
    loop {
        let ev = engine.sample_event(sys);
        let next = ev.as_ref().map_or(horizon, |e| e.time.min(horizon));
        between(t, next, sys);
        match ev {
            Some(e) if e.time <= horizon => {
                engine.apply(sys, &e)?;
                t = e.time;
            }
            _ => break,
        }
    }
    engine.advance_to(horizon);
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChaosConfig {
    pub ns: Vec<u32>,
    pub dynamics: Dynamics,
    /// Fraction of the sites of the starting region that are occupied.
    pub crowd_density: f64,
    /// Particles start in the square [a, b]^2 inside the reflecting unit box.
    pub region: (f64, f64),
    pub horizon: f64,
    /// Window [T1, T2] for the neighbour occupation time.
    pub window: (f64, f64),
    pub replicas: usize,
    pub batches: usize,
    pub f: TestFunction,
    pub seed: u64,
}

impl ChaosConfig {
    pub fn new(ns: Vec<u32>, replicas: usize) -> Self {
        ChaosConfig {
            ns,
            dynamics: Dynamics::BondExclusion,
            crowd_density: 0.2,
            region: (0.0, 0.5),
            horizon: 0.05,
            window: (0.0, 0.05),
            replicas,
            batches: 20,
            f: TestFunction::Bump { center: [0.25, 0.25, 0.0], radius: 0.4, height: 1.0 },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChaosRow {
    pub n: u32,
    pub particles: usize,
    pub covariance: f64,
    pub covariance_se: f64,
    /// Fraction of [T1, T2] a given pair spends at distance one; bond mode only.
    pub occupation: Option<f64>,
    pub occupation_se: Option<f64>,
    pub replicas: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChaosReport {
    pub rows: Vec<ChaosRow>,
}

impl ChaosReport {
    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        for r in &self.rows {
            let k = format!("n{}", r.n);
            m.set(format!("{k}.particles"), r.particles);
            m.set(format!("{k}.covariance"), r.covariance);
            m.set(format!("{k}.covariance_se"), r.covariance_se);
            if let (Some(o), Some(se)) = (r.occupation, r.occupation_se) {
                m.set(format!("{k}.occupation"), o);
                m.set(format!("{k}.occupation_se"), se);
            }
            m.set(format!("{k}.replicas"), r.replicas);
        }
        m
    }

    /// `n,particles,covariance,covariance_se,occupation,occupation_se`
    pub fn csv(&self) -> String {
        let mut out = String::from("n,particles,covariance,covariance_se,occupation,occupation_se\n");
        for r in &self.rows {
            let o = r.occupation.map_or(String::new(), |v| v.to_string());
            let ose = r.occupation_se.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!("{},{},{},{},{},{}\n", r.n, r.particles, r.covariance, r.covariance_se, o, ose));
        }
        out
    }
}

struct ReplicaStats {
    sum: f64,
    sum_sq: f64,
    occupation: f64,
}

fn pooled_covariance(stats: &[ReplicaStats], n: usize) -> f64 {
    let pairs = (n * (n - 1)) as f64 * stats.len() as f64;
    let cross: f64 = stats.iter().map(|s| s.sum * s.sum - s.sum_sq).sum::<f64>() / pairs;
    let mean: f64 = stats.iter().map(|s| s.sum).sum::<f64>() / (n * stats.len()) as f64;
    cross - mean * mean
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    (m, (var / k).sqrt())
}

/// Covariance of f at two tagged particles and their neighbour occupation
/// time, across lattice sizes.
pub fn chaos_diagnostics(cfg: &ChaosConfig) -> Result<ChaosReport> {
    if cfg.ns.len() < 2 {
        return Err(Error::Config("chaos diagnostics need at least two lattice sizes".into()));
    }
    if cfg.batches < 2 || cfg.replicas < cfg.batches {
        return Err(Error::Config("need replicas >= batches >= 2".into()));
    }
    let (t1, t2) = cfg.window;
    if !(0.0 <= t1 && t1 < t2 && t2 <= cfg.horizon) {
        return Err(Error::Config("occupation window must lie in [0, horizon]".into()));
    }
    let rows = cfg.ns.iter().map(|&n| chaos_row(cfg, n)).collect::<Result<Vec<_>>>()?;
    Ok(ChaosReport { rows })
}

fn chaos_row(cfg: &ChaosConfig, n: u32) -> Result<ChaosRow> {
    let spec = LatticeSpec::with_box(2, n, Site::d2(0, 0), Site::d2(n as i32 - 1, n as i32 - 1), Boundary::Reflecting)?;
    let (a, b) = cfg.region;
    let region: Vec<Site> = spec
        .sites()
        .into_iter()
        .filter(|k| {
            let c = spec.center(*k);
            c[0] >= a && c[0] <= b && c[1] >= a && c[1] <= b
        })
        .collect();
    let count = ((cfg.crowd_density * region.len() as f64).round() as usize).max(2);
    if count > region.len() {
        return Err(Error::OverfullLattice { requested: count, available: region.len() });
    }
    let exclusive = cfg.dynamics == Dynamics::BondExclusion;
    let (t1, t2) = cfg.window;
    let stats: Vec<ReplicaStats> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<ReplicaStats> {
            let mut rng = stream(cfg.seed, substream(n, r));
            let sites: Vec<Site> = if exclusive {
                sample(&mut rng, region.len(), count).into_iter().map(|i| region[i]).collect()
            } else {
                (0..count).map(|_| region[rng.gen_range(0..region.len())]).collect()
            };
            let mut sys = ParticleSystem::new(&spec, sites, exclusive)?;
            let mut engine = EventEngine::new(&spec, cfg.dynamics, rng);
            let mut adjacent = 0.0;
            run_until(&mut engine, &mut sys, cfg.horizon, |u, v, s| {
                let (lo, hi) = (u.max(t1), v.min(t2));
                if hi > lo && exclusive {
                    adjacent += (hi - lo) * s.free_pairs() as f64;
                }
            })?;
            // Values relative to a fixed reference so constant f gives
            // exactly zero.
            let reference = cfg.f.value(&spec.center(Site::d2(0, 0)), 2);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for &k in sys.positions() {
                let g = cfg.f.value(&spec.center(k), 2) - reference;
                sum += g;
                sum_sq += g * g;
            }
            let pairs = (count * (count - 1) / 2) as f64;
            Ok(ReplicaStats { sum, sum_sq, occupation: adjacent / pairs / (t2 - t1) })
        })
        .collect::<Result<Vec<_>>>()?;
    let covariance = pooled_covariance(&stats, count);
    let per = stats.len() / cfg.batches;
    let batch_cov: Vec<f64> = stats.chunks(per).take(cfg.batches).map(|c| pooled_covariance(c, count)).collect();
    let (_, covariance_se) = mean_se(&batch_cov);
    let (occupation, occupation_se) = if exclusive {
        let occ: Vec<f64> = stats.iter().map(|s| s.occupation).collect();
        let (m, se) = mean_se(&occ);
        (Some(m), Some(se))
    } else {
        (None, None)
    };
    Ok(ChaosRow { n, particles: count, covariance, covariance_se, occupation, occupation_se, replicas: cfg.replicas })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggedConfig {
    pub n: u32,
    pub horizon: f64,
    pub crowd_density: f64,
    pub replicas: usize,
    /// Histogram bins are blocks of block x block sites.
    pub block: u32,
    pub permutations: usize,
    pub seed: u64,
}

impl TaggedConfig {
    pub fn new(n: u32, horizon: f64, replicas: usize) -> Self {
        TaggedConfig { n, horizon, crowd_density: 0.2, replicas, block: 8, permutations: 999, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggedReport {
    pub tv: f64,
    pub p_value: f64,
    pub replicas: usize,
    pub bins: usize,
    pub crowd: usize,
    /// Set when fewer than 1000 replicas were run.
    pub low_replicas: bool,
}

impl TaggedReport {
    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.set("tv", self.tv).set("p_value", self.p_value).set("replicas", self.replicas);
        m.set("bins", self.bins).set("crowd", self.crowd).set("low_replicas", self.low_replicas);
        m
    }
}

fn tv_distance(a: &[usize], b: &[usize], na: usize, nb: usize) -> f64 {
    0.5 * a.iter().zip(b).map(|(&x, &y)| (x as f64 / na as f64 - y as f64 / nb as f64).abs()).sum::<f64>()
}

/// Compares the law at time t of a tagged particle started at the centre
/// of a reflecting n x n box among a crowd with that of a lone walker from
/// the same site.
pub fn tagged_law_test(cfg: &TaggedConfig) -> Result<TaggedReport> {
    let n = cfg.n as i32;
    if cfg.n < 2 || cfg.block == 0 || cfg.replicas == 0 {
        return Err(Error::Config("need n >= 2, block >= 1, replicas >= 1".into()));
    }
    let spec = LatticeSpec::with_box(2, cfg.n, Site::d2(0, 0), Site::d2(n - 1, n - 1), Boundary::Reflecting)?;
    let start = Site::d2(n / 2, n / 2);
    let others: Vec<Site> = spec.sites().into_iter().filter(|k| *k != start).collect();
    let crowd = ((cfg.crowd_density * (n * n) as f64).round() as usize).saturating_sub(1).min(others.len());
    let per_axis = (cfg.n).div_ceil(cfg.block) as usize;
    let bin = |k: Site| (k.0[0] as u32 / cfg.block) as usize + per_axis * (k.0[1] as u32 / cfg.block) as usize;

    let finals: Vec<(usize, usize)> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<(usize, usize)> {
            let mut rng = stream(cfg.seed, substream(1, r));
            let mut sites = vec![start];
            sites.extend(sample(&mut rng, others.len(), crowd).into_iter().map(|i| others[i]));
            let mut sys = ParticleSystem::new(&spec, sites, true)?;
            let mut engine = EventEngine::new(&spec, Dynamics::BondExclusion, rng);
            run_until(&mut engine, &mut sys, cfg.horizon, |_, _, _| {})?;
            let tagged = sys.position(0);

            let mut solo = ParticleSystem::new(&spec, vec![start], true)?;
            let mut engine = EventEngine::new(&spec, Dynamics::Independent, stream(cfg.seed, substream(2, r)));
            run_until(&mut engine, &mut solo, cfg.horizon, |_, _, _| {})?;
            Ok((bin(tagged), bin(solo.position(0))))
        })
        .collect::<Result<Vec<_>>>()?;

    let bins = per_axis * per_axis;
    let count = |xs: &mut dyn Iterator<Item = usize>| {
        let mut h = vec![0usize; bins];
        xs.for_each(|b| h[b] += 1);
        h
    };
    let ha = count(&mut finals.iter().map(|p| p.0));
    let hb = count(&mut finals.iter().map(|p| p.1));
    let r = cfg.replicas;
    let tv = tv_distance(&ha, &hb, r, r);

    // Permutation test on the pooled labels.
    let mut pooled: Vec<usize> = finals.iter().flat_map(|p| [p.0, p.1]).collect();
    let mut rng = stream(cfg.seed, substream(3, 0));
    let mut exceed = 0usize;
    for _ in 0..cfg.permutations {
        pooled.shuffle(&mut rng);
        let a = count(&mut pooled[..r].iter().copied());
        let b = count(&mut pooled[r..].iter().copied());
        if tv_distance(&a, &b, r, r) >= tv - 1e-15 {
            exceed += 1;
        }
    }
    let p_value = (1 + exceed) as f64 / (1 + cfg.permutations) as f64;
    Ok(TaggedReport { tv, p_value, replicas: r, bins, crowd, low_replicas: r < 1000 })
}

fn planar(p: Point) -> [f64; 2] {
    [p[0], p[1]]
}

/// Continuous version of a jump path on [0, T + 1]: constant until the
/// first jump, then each segment between consecutive visited sites is
/// traversed during the holding interval that follows, one jump late.
pub fn interpolate_path(spec: &LatticeSpec, initial: Site, jumps: &[(f64, Site)], horizon: f64) -> Result<Polyline> {
    let end = horizon + 1.0;
    let mut prev = 0.0;
    for &(t, _) in jumps {
        if !(t > prev && t < end) {
            return Err(Error::Path(format!("jump times must increase inside (0, T + 1); got {t} after {prev}")));
        }
        prev = t;
    }
    let x0 = planar(spec.center(initial));
    let mut times = vec![0.0];
    let mut points = vec![x0];
    // The vertex at jump j carries the site reached at jump j - 1.
    let mut carried = x0;
    for &(t, site) in jumps {
        times.push(t);
        points.push(carried);
        carried = planar(spec.center(site));
    }
    times.push(end);
    points.push(carried);
    Polyline::new(times, points)
}

/// Position of the jump path at time t.
pub fn jump_path_at(spec: &LatticeSpec, initial: Site, jumps: &[(f64, Site)], t: f64) -> [f64; 2] {
    let i = jumps.partition_point(|j| j.0 <= t);
    planar(spec.center(if i == 0 { initial } else { jumps[i - 1].1 }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example58Report {
    pub r: u32,
    pub n: u32,
    pub particles: usize,
    pub column_particles: usize,
    pub absorbed_at_zero: usize,
    pub sup_distance: f64,
    /// R^2 / (2n) plus one cell.
    pub distance_bound: f64,
    pub attached_area: f64,
    pub square_area: f64,
    pub seed: u64,
}

impl Example58Report {
    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.set("R", self.r).set("n", self.n).set("seed", self.seed);
        m.set("particles", self.particles).set("column_particles", self.column_particles);
        m.set("absorbed_at_zero", self.absorbed_at_zero);
        m.set("sup_distance", self.sup_distance).set("distance_bound", self.distance_bound);
        m.set("attached_area", self.attached_area).set("square_area", self.square_area);
        m
    }
}

/// The mushy-region example: n^2 particles in an R x R square hole of the
/// seed, most of them in full columns every R^2 sites. The columns touch
/// the seed, so the t = 0 cascade takes them all, leaving the square within
/// R^2 / (2n) of the aggregate while only about one unit of area is filled.
pub fn example58_harness(r: u32, n: u32, seed: u64) -> Result<(Example58Report, MdlaRun)> {
    if r < 2 {
        return Err(Error::Config("R must be an integer > 1".into()));
    }
    if r * r > n {
        return Err(Error::ColumnsExceedSquare { r2: r * r, n });
    }
    let side = (r * n) as i32;
    let spec = LatticeSpec::new(2, n)?;
    let step = (r * r) as i32;
    let columns: Vec<i32> = (1..=(n / r) as i32).map(|j| j * step).collect();
    let mut sites: Vec<Site> = columns.iter().flat_map(|&k1| (0..side).map(move |k2| Site::d2(k1, k2))).collect();
    let column_particles = sites.len();
    let total = (n * n) as usize;
    let rest: Vec<Site> = (0..side)
        .flat_map(|k1| (0..side).map(move |k2| Site::d2(k1, k2)))
        .filter(|k| k.0[0] % step != 0 || k.0[0] == 0)
        .collect();
    let mut rng = stream(seed, substream(58, 0));
    let extra = total.saturating_sub(column_particles);
    sites.extend(sample(&mut rng, rest.len(), extra).into_iter().map(|i| rest[i]));

    let mut cfg = MdlaConfig::new(
        spec.clone(),
        SeedGeometry::BoxComplement { lo: Site::d2(0, 0), hi: Site::d2(side - 1, side - 1) },
        InitialLaw::Sites(sites),
        0.0,
    );
    cfg.rng_seed = seed;
    let out = run(&cfg)?;
    let s = spec.spacing();
    let lo = -s / 2.0;
    let hi = r as f64 - s / 2.0;
    let nodes = 2 * side as usize + 1;
    let grid = GridSpec { lo: [lo, lo, 0.0], hi: [hi, hi, 0.0], counts: [nodes, nodes, 1] };
    let sup_distance = distance_field(&out.aggregate, &grid)?.into_iter().fold(0.0, f64::max);
    let absorbed = out.particles.absorbed_count();
    let report = Example58Report {
        r,
        n,
        particles: total,
        column_particles,
        absorbed_at_zero: absorbed,
        sup_distance,
        distance_bound: (r * r) as f64 / (2.0 * n as f64) + s,
        attached_area: out.aggregate.attached_count() as f64 * spec.cell_volume(),
        square_area: (r * r) as f64,
        seed,
    };
    Ok((report, out))
}
