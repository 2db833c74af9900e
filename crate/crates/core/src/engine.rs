//! Continuous-time event engine for bond exclusion and independent walks.

use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Site, MAX_DIM};
use crate::particles::ParticleSystem;
use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Dynamics {
    /// Each bond rings at rate n^2/2 and exchanges the contents of its ends.
    #[default]
    BondExclusion,
    /// Particles ignore each other; each present bond direction rings at n^2/2.
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    Hop { particle: u32, from: Site, to: Site },
    Swap { a: u32, b: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

pub struct EventEngine {
    spec: LatticeSpec,
    dynamics: Dynamics,
    rate_per_bond: f64,
    clock: f64,
    rng: SimRng,
    offsets: Vec<[i32; MAX_DIM]>,
    events: u64,
}

impl EventEngine {
    pub fn new(spec: &LatticeSpec, dynamics: Dynamics, rng: SimRng) -> Self {
        EventEngine {
            spec: spec.clone(),
            dynamics,
            rate_per_bond: spec.rate_per_bond(),
            clock: 0.0,
            rng,
            offsets: spec.face_offsets(),
            events: 0,
        }
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn rng(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// Total jump rate of the current configuration.
    pub fn total_rate(&self, sys: &ParticleSystem) -> f64 {
        let bonds = match self.dynamics {
            Dynamics::BondExclusion => sys.active_bond_count(),
            Dynamics::Independent => sys.degree_sum(),
        };
        bonds as f64 * self.rate_per_bond
    }

    /// Draw the next event without applying it; `None` when nothing can move.
    pub fn sample_event(&mut self, sys: &ParticleSystem) -> Option<Event> {
        let rate = self.total_rate(sys);
        if rate <= 0.0 || sys.free_count() == 0 {
            return None;
        }
        let wait: f64 = self.rng.sample::<f64, _>(Exp1) / rate;
        let time = self.clock + wait;
        let free = sys.free_ids();
        // Propose (free particle, direction) uniformly and thin. Bonds with two
        // free ends are proposed twice as often, so they are kept with prob 1/2.
        loop {
            let id = free[self.rng.gen_range(0..free.len())];
            let from = sys.position(id);
            let to = from.shifted(&self.offsets[self.rng.gen_range(0..self.offsets.len())]);
            if !self.spec.has_bond(from, to) {
                continue;
            }
            if self.dynamics == Dynamics::BondExclusion {
                if let Some(other) = sys.occupant(to) {
                    if self.rng.gen::<bool>() {
                        return Some(Event { time, kind: EventKind::Swap { a: id, b: other } });
                    }
                    continue;
                }
            }
            return Some(Event { time, kind: EventKind::Hop { particle: id, from, to } });
        }
    }

    /// Apply a sampled event and advance the clock to its time.
    pub fn apply(&mut self, sys: &mut ParticleSystem, event: &Event) -> Result<()> {
        if event.time < self.clock {
            return Err(Error::Invariant("event time runs backwards".into()));
        }
        match event.kind {
            EventKind::Hop { particle, to, .. } => sys.hop(particle, to)?,
            EventKind::Swap { a, b } => sys.swap(a, b)?,
        }
        self.clock = event.time;
        self.events += 1;
        Ok(())
    }

    pub fn next_event(&mut self, sys: &mut ParticleSystem) -> Result<Option<Event>> {
        let Some(event) = self.sample_event(sys) else { return Ok(None) };
        self.apply(sys, &event)?;
        Ok(Some(event))
    }

    /// Move the clock forward without an event (used at the horizon).
    pub fn advance_to(&mut self, t: f64) {
        self.clock = self.clock.max(t);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathPolicy {
    /// Every jump of every particle.
    Full,
    /// Jump counts only.
    Counts,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpRecord {
    pub particle: u32,
    pub time: f64,
    pub from: Site,
    pub to: Site,
}

/// Per-particle jump history. A swap is recorded as two jumps.
#[derive(Clone, Debug)]
pub struct PathLog {
    pub policy: PathPolicy,
    pub initial: Vec<Site>,
    pub records: Vec<JumpRecord>,
    pub counts: Vec<u64>,
}

impl PathLog {
    pub fn new(policy: PathPolicy, initial: &[Site]) -> Self {
        PathLog { policy, initial: initial.to_vec(), records: Vec::new(), counts: vec![0; initial.len()] }
    }

    pub fn record(&mut self, particle: u32, time: f64, from: Site, to: Site) {
        self.counts[particle as usize] += 1;
        if self.policy == PathPolicy::Full {
            self.records.push(JumpRecord { particle, time, from, to });
        }
    }

    pub fn record_event(&mut self, sys: &ParticleSystem, event: &Event) {
        match event.kind {
            EventKind::Hop { particle, from, to } => self.record(particle, event.time, from, to),
            EventKind::Swap { a, b } => {
                // Called after the swap was applied.
                let (sa, sb) = (sys.position(a), sys.position(b));
                self.record(a, event.time, sb, sa);
                self.record(b, event.time, sa, sb);
            }
        }
    }

    /// Jump times and post-jump sites of one particle (full logs only).
    pub fn jumps_of(&self, particle: u32) -> Vec<(f64, Site)> {
        self.records.iter().filter(|r| r.particle == particle).map(|r| (r.time, r.to)).collect()
    }

    /// `particle_id,time,from_x,from_y,to_x,to_y`; missing coordinates are 0.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "particle_id,time,from_x,from_y,to_x,to_y")?;
        for r in &self.records {
            writeln!(w, "{},{:.12e},{},{},{},{}", r.particle, r.time, r.from.0[0], r.from.0[1], r.to.0[0], r.to.0[1])?;
        }
        Ok(())
    }
}

/// Run the engine up to `horizon`, logging paths. A horizon of 0 yields an
/// empty log.
pub fn run_iid(engine: &mut EventEngine, sys: &mut ParticleSystem, horizon: f64, policy: PathPolicy) -> Result<PathLog> {
    let mut log = PathLog::new(policy, sys.positions());
    loop {
        let Some(event) = engine.sample_event(sys) else { break };
        if event.time > horizon {
            break;
        }
        engine.apply(sys, &event)?;
        log.record_event(sys, &event);
    }
    engine.advance_to(horizon);
    Ok(log)
}
