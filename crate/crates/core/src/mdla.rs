//! MDLA runs: the exclusion engine coupled to the aggregate through
//! absorption on face contact and cascade attachment.

use std::collections::HashSet;

use crate::aggregate::{Aggregate, Seed};
use crate::engine::{Dynamics, EventEngine, EventKind, PathLog, PathPolicy};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, Connectivity, LatticeSpec, Point, Site};
use crate::particles::{available_site_count, sample_initial, InitialLaw, ParticleSystem};
use crate::rng::stream;

/// Largest run for which full paths are kept by default.
pub const FULL_PATH_LIMIT: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub enum SeedGeometry {
    HalfSpace { axis: usize, max: i32 },
    BoxComplement { lo: Site, hi: Site },
    Ball { center: Point, radius: f64 },
    BallComplement { center: Point, radius: f64 },
    Cubes(Vec<Site>),
}

impl SeedGeometry {
    pub fn build(&self, spec: &LatticeSpec) -> Seed {
        match self {
            SeedGeometry::HalfSpace { axis, max } => Seed::half_space(*axis, *max),
            SeedGeometry::BoxComplement { lo, hi } => Seed::box_complement(*lo, *hi),
            SeedGeometry::Ball { center, radius } => Seed::ball(spec, *center, *radius),
            SeedGeometry::BallComplement { center, radius } => Seed::ball_complement(spec, *center, *radius),
            SeedGeometry::Cubes(list) => Seed::cubes(list.iter().copied()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdlaConfig {
    pub spec: LatticeSpec,
    pub seed: SeedGeometry,
    pub law: InitialLaw,
    /// Keep initial particles off the sites face-adjacent to the seed.
    pub exclude_adjacent: bool,
    pub horizon: f64,
    pub connectivity: Connectivity,
    pub snapshot_times: Vec<f64>,
    pub rng_seed: u64,
    pub stream: u64,
    /// `None` keeps full paths up to [`FULL_PATH_LIMIT`] particles.
    pub path_policy: Option<PathPolicy>,
    /// Reject seeds with a component of smaller diameter.
    pub min_component_diameter: Option<f64>,
    /// Run the full exclusion check every this many events.
    pub verify_every: Option<u64>,
}

impl MdlaConfig {
    pub fn new(spec: LatticeSpec, seed: SeedGeometry, law: InitialLaw, horizon: f64) -> Self {
        MdlaConfig {
            spec,
            seed,
            law,
            exclude_adjacent: false,
            horizon,
            connectivity: Connectivity::ClosedCube,
            snapshot_times: Vec::new(),
            rng_seed: 0,
            stream: 0,
            path_policy: None,
            min_component_diameter: None,
            verify_every: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub cubes_attached: usize,
    pub particles_absorbed: usize,
}

pub struct MdlaRun {
    pub config: MdlaConfig,
    pub aggregate: Aggregate,
    pub particles: ParticleSystem,
    pub initial_positions: Vec<Site>,
    pub paths: PathLog,
    pub events: u64,
    pub snapshots: Vec<Snapshot>,
}

impl MdlaRun {
    pub fn particle_count(&self) -> usize {
        self.particles.len()
    }

    /// Cumulative (time, cubes attached, particles absorbed) after each
    /// hitting time.
    pub fn cumulative_log(&self) -> Vec<(f64, usize, usize)> {
        let mut cubes = 0;
        let mut parts = 0;
        self.aggregate
            .log()
            .iter()
            .map(|e| {
                cubes += e.cubes.len();
                parts += e.particles.len();
                (e.time, cubes, parts)
            })
            .collect()
    }

    /// Cubes attached equals particles absorbed at every log entry, and the
    /// absorbed particles are exactly those frozen in the particle system.
    pub fn check_conservation(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for (i, e) in self.aggregate.log().iter().enumerate() {
            if e.cubes.len() != e.particles.len() {
                return Err(Error::Invariant(format!("log entry {i}: {} cubes, {} particles", e.cubes.len(), e.particles.len())));
            }
            for (c, p) in e.cubes.iter().zip(&e.particles) {
                if !ids.insert(*p) || self.particles.position(*p) != *c || self.particles.absorbed_at(*p) != Some(e.time) {
                    return Err(Error::Invariant(format!("particle {p} inconsistent with log entry {i}")));
                }
            }
        }
        if ids.len() != self.particles.absorbed_count() || self.aggregate.attached_count() != ids.len() {
            return Err(Error::Invariant("absorbed particles and attached cubes disagree".into()));
        }
        Ok(())
    }
}

fn absorb_entry(agg: &Aggregate, sys: &mut ParticleSystem) -> Result<()> {
    let entry = agg.log().last().expect("cascade produced an entry");
    for &id in &entry.particles {
        sys.absorb(id, entry.time)?;
    }
    if agg.attached_count() != sys.absorbed_count() {
        return Err(Error::Invariant(format!(
            "{} cubes attached but {} particles absorbed",
            agg.attached_count(),
            sys.absorbed_count()
        )));
    }
    Ok(())
}

/// Free sites touching the aggregate under `conn` (sorted).
fn touching_sites(agg: &Aggregate, sys: &ParticleSystem, conn: Connectivity) -> Vec<Site> {
    let mut out: Vec<Site> = sys
        .free_ids()
        .iter()
        .map(|&id| sys.position(id))
        .filter(|k| agg.touches(*k, conn))
        .collect();
    out.sort();
    out
}

/// Absorb, at time `t`, everything that must be absorbed before the
/// dynamics can start. Returns the number of cascades performed.
pub fn time_zero_cascade(agg: &mut Aggregate, sys: &mut ParticleSystem, conn: Connectivity, t: f64) -> Result<usize> {
    let mut cascades = 0;
    loop {
        let touching = touching_sites(agg, sys, conn);
        let Some(&trigger) = touching.iter().find(|k| agg.is_face_adjacent(**k)) else { break };
        agg.attach_from(|k| sys.occupant(k), trigger, &touching, t, conn)?;
        absorb_entry(agg, sys)?;
        cascades += 1;
    }
    Ok(cascades)
}

/// Simulate MDLA up to the configured horizon.
pub fn run(config: &MdlaConfig) -> Result<MdlaRun> {
    let spec = &config.spec;
    spec.validate()?;
    if !(config.horizon >= 0.0) {
        return Err(Error::Config("horizon must be non-negative".into()));
    }
    let seed = config.seed.build(spec);
    if let Some(bound) = config.min_component_diameter {
        let d = seed.min_component_diameter(spec);
        if d < bound {
            return Err(Error::Config(format!("seed component of diameter {d} below {bound}")));
        }
    }
    let mut agg = Aggregate::new(spec, seed);
    let mut rng = stream(config.rng_seed, config.stream);
    let mut sys = sample_initial(spec, &agg, &config.law, config.exclude_adjacent, &mut rng)?;
    let initial_positions = sys.positions().to_vec();
    let policy = config.path_policy.unwrap_or(if sys.len() <= FULL_PATH_LIMIT { PathPolicy::Full } else { PathPolicy::Counts });
    let mut paths = PathLog::new(policy, &initial_positions);
    let conn = config.connectivity;

    let mut snapshot_times = config.snapshot_times.clone();
    snapshot_times.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
    let mut snapshots = Vec::new();
    let mut next_snap = 0;

    time_zero_cascade(&mut agg, &mut sys, conn, 0.0)?;
    let mut touching: HashSet<Site> = match conn {
        Connectivity::ClosedCube => touching_sites(&agg, &sys, conn).into_iter().collect(),
        Connectivity::FaceOnly => HashSet::new(),
    };
    let mut engine = EventEngine::new(spec, Dynamics::BondExclusion, rng);

    loop {
        let Some(event) = engine.sample_event(&sys) else { break };
        if event.time > config.horizon {
            break;
        }
        while next_snap < snapshot_times.len() && snapshot_times[next_snap] < event.time {
            snapshots.push(snapshot(&agg, &sys, snapshot_times[next_snap]));
            next_snap += 1;
        }
        engine.apply(&mut sys, &event)?;
        paths.record_event(&sys, &event);
        if let EventKind::Hop { from, to, .. } = event.kind {
            touching.remove(&from);
            if agg.is_face_adjacent(to) {
                let mut candidates: Vec<Site> = touching.iter().copied().collect();
                candidates.sort();
                agg.attach_from(|k| sys.occupant(k), to, &candidates, event.time, conn)?;
                absorb_entry(&agg, &mut sys)?;
                touching.retain(|k| sys.occupant(*k).is_some());
            } else if conn == Connectivity::ClosedCube && agg.touches(to, conn) {
                touching.insert(to);
            }
        }
        if let Some(period) = config.verify_every {
            if engine.events().is_multiple_of(period) {
                sys.verify()?;
            }
        }
    }
    engine.advance_to(config.horizon);
    while next_snap < snapshot_times.len() {
        let t = snapshot_times[next_snap];
        if t <= config.horizon {
            snapshots.push(snapshot(&agg, &sys, t));
        }
        next_snap += 1;
    }
    sys.verify()?;
    let run = MdlaRun {
        config: config.clone(),
        aggregate: agg,
        particles: sys,
        initial_positions,
        paths,
        events: engine.events(),
        snapshots,
    };
    run.check_conservation()?;
    Ok(run)
}

fn snapshot(agg: &Aggregate, sys: &ParticleSystem, t: f64) -> Snapshot {
    Snapshot { time: t, cubes_attached: agg.attached_count(), particles_absorbed: sys.absorbed_count() }
}

/// Admissible (particle count, horizon) pairs for the Figure 2 experiment.
pub const FIGURE2_VARIANTS: [(usize, f64); 4] = [(9900, 0.01), (9900, 0.015), (61875, 0.01), (61875, 0.015)];

/// Seed ball radius for Figure 2, in units of length (box side 2).
pub const FIGURE2_BALL_RADIUS: f64 = 0.25;

/// Initial occupancy fraction for Figure 2.
pub const FIGURE2_OCCUPANCY: f64 = 0.2;

/// Grid chosen for a Figure 2 particle count.
#[derive(Clone, Debug, PartialEq)]
pub struct Figure2Layout {
    /// Sites per side of the 2x2 box.
    pub m: i32,
    pub spec: LatticeSpec,
    pub ball_radius: f64,
    pub ball_cubes: usize,
    pub available: usize,
    pub particles: usize,
}

fn figure2_spec(m: i32) -> Result<LatticeSpec> {
    LatticeSpec::with_box(2, (m / 2) as u32, Site::d2(0, 0), Site::d2(m - 1, m - 1), Boundary::Reflecting)
}

fn figure2_seed() -> SeedGeometry {
    SeedGeometry::Ball { center: [1.0, 1.0, 0.0], radius: FIGURE2_BALL_RADIUS }
}

/// Even side m whose available-site count times the occupancy is closest to
/// the requested particle count.
pub fn figure2_layout(particles: usize) -> Result<Figure2Layout> {
    let ball_cubes = |m: i32| -> Result<usize> {
        let spec = figure2_spec(m)?;
        Ok(figure2_seed().build(&spec).cubes.len())
    };
    let target = particles as f64 / FIGURE2_OCCUPANCY;
    let guess = (target / (1.0 - std::f64::consts::PI * FIGURE2_BALL_RADIUS * FIGURE2_BALL_RADIUS / 4.0)).sqrt();
    let mut best: Option<(f64, i32)> = None;
    let start = ((guess as i32 - 8) / 2 * 2).max(2);
    for m in (start..start + 20).step_by(2) {
        let avail = (m * m) as usize - ball_cubes(m)?;
        let err = (FIGURE2_OCCUPANCY * avail as f64 - particles as f64).abs();
        if best.is_none_or(|(e, _)| err < e) {
            best = Some((err, m));
        }
    }
    let m = best.expect("non-empty search").1;
    let spec = figure2_spec(m)?;
    let bc = ball_cubes(m)?;
    let available = (m * m) as usize - bc;
    if particles > available {
        return Err(Error::OverfullLattice { requested: particles, available });
    }
    Ok(Figure2Layout { m, spec, ball_radius: FIGURE2_BALL_RADIUS, ball_cubes: bc, available, particles })
}

/// Configuration for one Figure 2 variant.
pub fn figure2_config(particles: usize, horizon: f64, rng_seed: u64) -> Result<(MdlaConfig, Figure2Layout)> {
    if !FIGURE2_VARIANTS.iter().any(|(p, t)| *p == particles && (*t - horizon).abs() < 1e-12) {
        let admissible = FIGURE2_VARIANTS.iter().map(|(p, t)| format!("N={p} T={t}")).collect::<Vec<_>>().join(", ");
        return Err(Error::UnknownVariant { requested: particles, admissible });
    }
    let layout = figure2_layout(particles)?;
    let mut config = MdlaConfig::new(layout.spec.clone(), figure2_seed(), InitialLaw::Uniform { count: particles }, horizon);
    config.rng_seed = rng_seed;
    config.snapshot_times = vec![horizon];
    let agg = Aggregate::new(&layout.spec, config.seed.build(&layout.spec));
    debug_assert_eq!(available_site_count(&layout.spec, &agg, false)?, layout.available);
    Ok((config, layout))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure2_layouts_hit_requested_counts() {
        for n in [9900, 61875] {
            let layout = figure2_layout(n).unwrap();
            let occ = n as f64 / layout.available as f64;
            assert!((occ - 0.2).abs() < 0.002, "occupancy {occ} for m={}", layout.m);
            assert_eq!(layout.m % 2, 0);
        }
    }

    #[test]
    fn unknown_variant_lists_admissible() {
        let err = figure2_config(1234, 0.01, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("9900") && msg.contains("61875"), "{msg}");
    }
}
