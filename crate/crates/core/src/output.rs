//! Plain-text artifacts: manifests, CSV tables and PGM snapshots.

use std::fmt::Write as _;

use crate::aggregate::Aggregate;
use crate::error::{Error, Result};
use crate::lattice::{Domain, Site};
use crate::mdla::{Figure2Layout, MdlaRun, FIGURE2_OCCUPANCY};

/// Ordered `key = value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        let key = key.into();
        let value = value.to_string();
        if let Some(e) = self.entries.iter_mut().find(|(k, _)| *k == key) {
            e.1 = value;
        } else {
            self.entries.push((key, value));
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Greyscale P2 image of a 2D aggregate at time t: one pixel per cube,
/// 0 for aggregate cubes and 255 otherwise; the top row is the largest k2.
pub fn pgm_snapshot(agg: &Aggregate, t: f64) -> Result<String> {
    let spec = agg.spec();
    let Domain::Box { lo, hi } = spec.domain else {
        return Err(Error::Config("snapshots need a finite domain".into()));
    };
    if spec.dim != 2 {
        return Err(Error::Config("snapshots are two-dimensional".into()));
    }
    let member = agg.membership_at(t);
    let w = (hi.0[0] - lo.0[0] + 1) as usize;
    let h = (hi.0[1] - lo.0[1] + 1) as usize;
    let mut out = String::with_capacity(w * h * 4 + 32);
    let _ = write!(out, "P2\n{w} {h}\n255\n");
    for k2 in (lo.0[1]..=hi.0[1]).rev() {
        let row: Vec<&str> = (lo.0[0]..=hi.0[0]).map(|k1| if member(Site::d2(k1, k2)) { "0" } else { "255" }).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// `time,cubes_attached,particles_absorbed`, one row per hitting time.
pub fn log_csv(run: &MdlaRun) -> String {
    let mut out = String::from("time,cubes_attached,particles_absorbed\n");
    for (t, c, p) in run.cumulative_log() {
        let _ = writeln!(out, "{t:.12e},{c},{p}");
    }
    out
}

/// Resolved configuration and outcome of an MDLA run.
pub fn run_manifest(run: &MdlaRun) -> Manifest {
    let c = &run.config;
    let spec = &c.spec;
    let mut m = Manifest::new();
    m.set("lattice.dim", spec.dim).set("lattice.n", spec.n).set("lattice.spacing", spec.spacing());
    match spec.domain {
        Domain::Unbounded => m.set("lattice.domain", "unbounded"),
        Domain::Box { lo, hi } => m
            .set("lattice.domain", "box")
            .set("lattice.lo", format!("{:?}", lo.coords(spec.dim)))
            .set("lattice.hi", format!("{:?}", hi.coords(spec.dim))),
    };
    m.set("lattice.boundary", format!("{:?}", spec.boundary).to_lowercase());
    m.set("seed_geometry", format!("{:?}", c.seed));
    m.set("connectivity", format!("{:?}", c.connectivity));
    m.set("exclude_adjacent", c.exclude_adjacent);
    m.set("horizon", c.horizon).set("rng_seed", c.rng_seed).set("rng_stream", c.stream);
    m.set("particles", run.particle_count()).set("events", run.events);
    m.set("cubes_attached", run.aggregate.attached_count());
    m.set("particles_absorbed", run.particles.absorbed_count());
    m
}

/// Run manifest plus the quantities derived for a Figure 2 variant.
pub fn figure2_manifest(run: &MdlaRun, layout: &Figure2Layout) -> Manifest {
    let mut m = run_manifest(run);
    m.set("figure2.particles", layout.particles).set("figure2.horizon", run.config.horizon);
    m.set("figure2.grid_side_m", layout.m).set("figure2.ball_radius", layout.ball_radius);
    m.set("figure2.ball_cubes", layout.ball_cubes).set("figure2.available_sites", layout.available);
    m.set("figure2.occupancy", FIGURE2_OCCUPANCY);
    m
}
