//! Aggregates: a seed set of cubes plus the cubes attached by cascades.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::lattice::{Connectivity, LatticeSpec, Point, Site, MAX_DIM};

/// Unbounded part of a seed, described analytically.
#[derive(Clone, Debug, PartialEq)]
pub enum Bulk {
    /// All sites with `k[axis] <= max`.
    HalfSpace { axis: usize, max: i32 },
    /// All sites outside the inclusive box `lo..=hi`.
    OutsideBox { lo: Site, hi: Site },
}

impl Bulk {
    fn contains(&self, site: Site, dim: usize) -> bool {
        match self {
            Bulk::HalfSpace { axis, max } => site.0[*axis] <= *max,
            Bulk::OutsideBox { lo, hi } => (0..dim).any(|i| site.0[i] < lo.0[i] || site.0[i] > hi.0[i]),
        }
    }

    /// Euclidean distance from p to the union of the bulk cubes.
    fn distance(&self, p: &Point, dim: usize, s: f64) -> f64 {
        match self {
            Bulk::HalfSpace { axis, max } => (p[*axis] - (*max as f64 + 0.5) * s).max(0.0),
            Bulk::OutsideBox { lo, hi } => {
                let mut best = f64::INFINITY;
                for i in 0..dim {
                    let low = p[i] - (lo.0[i] as f64 - 0.5) * s;
                    let high = (hi.0[i] as f64 + 0.5) * s - p[i];
                    if low <= 0.0 || high <= 0.0 {
                        return 0.0;
                    }
                    best = best.min(low).min(high);
                }
                best
            }
        }
    }
}

/// Initial aggregate: an optional analytic bulk plus finitely many cubes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Seed {
    pub bulk: Option<Bulk>,
    pub cubes: HashSet<Site>,
}

impl Seed {
    pub fn half_space(axis: usize, max: i32) -> Self {
        Seed { bulk: Some(Bulk::HalfSpace { axis, max }), cubes: HashSet::new() }
    }

    pub fn box_complement(lo: Site, hi: Site) -> Self {
        Seed { bulk: Some(Bulk::OutsideBox { lo, hi }), cubes: HashSet::new() }
    }

    pub fn cubes(cubes: impl IntoIterator<Item = Site>) -> Self {
        Seed { bulk: None, cubes: cubes.into_iter().collect() }
    }

    /// Cubes whose centres lie in the closed ball.
    pub fn ball(spec: &LatticeSpec, center: Point, radius: f64) -> Self {
        let (lo, hi) = ball_box(spec, center, radius);
        let cubes = box_sites(spec.dim, lo, hi)
            .into_iter()
            .filter(|k| dist2(&spec.center(*k), &center, spec.dim) <= radius * radius)
            .collect();
        Seed { bulk: None, cubes }
    }

    /// Cubes whose centres lie strictly outside the closed ball.
    pub fn ball_complement(spec: &LatticeSpec, center: Point, radius: f64) -> Self {
        let (lo, hi) = ball_box(spec, center, radius);
        let cubes = box_sites(spec.dim, lo, hi)
            .into_iter()
            .filter(|k| dist2(&spec.center(*k), &center, spec.dim) > radius * radius)
            .collect();
        Seed { bulk: Some(Bulk::OutsideBox { lo, hi }), cubes }
    }

    #[inline]
    pub fn contains(&self, site: Site, dim: usize) -> bool {
        self.bulk.as_ref().is_some_and(|b| b.contains(site, dim)) || self.cubes.contains(&site)
    }

    pub fn is_empty(&self) -> bool {
        self.bulk.is_none() && self.cubes.is_empty()
    }

    /// Smallest diameter among the closed-cube components of the seed.
    /// Components touching the unbounded bulk have infinite diameter.
    pub fn min_component_diameter(&self, spec: &LatticeSpec) -> f64 {
        let dim = spec.dim;
        let s = spec.spacing();
        let offsets = spec.touching_offsets();
        let mut seen: HashSet<Site> = HashSet::new();
        let mut best = f64::INFINITY;
        let mut sorted: Vec<Site> = self.cubes.iter().copied().collect();
        sorted.sort();
        for start in sorted {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            let mut unbounded = false;
            while let Some(c) = queue.pop_front() {
                for d in &offsets {
                    let nb = c.shifted(d);
                    if self.bulk.as_ref().is_some_and(|b| b.contains(nb, dim)) {
                        unbounded = true;
                    }
                    if self.cubes.contains(&nb) && seen.insert(nb) {
                        comp.push(nb);
                        queue.push_back(nb);
                    }
                }
            }
            if !unbounded {
                best = best.min(union_diameter(&comp, dim, s));
            }
        }
        best
    }
}

fn dist2(a: &Point, b: &Point, dim: usize) -> f64 {
    (0..dim).map(|i| (a[i] - b[i]).powi(2)).sum()
}

fn ball_box(spec: &LatticeSpec, center: Point, radius: f64) -> (Site, Site) {
    let n = spec.n as f64;
    let mut lo = [0; MAX_DIM];
    let mut hi = [0; MAX_DIM];
    for i in 0..spec.dim {
        lo[i] = ((center[i] - radius) * n).floor() as i32 - 1;
        hi[i] = ((center[i] + radius) * n).ceil() as i32 + 1;
    }
    (Site(lo), Site(hi))
}

pub(crate) fn box_sites(dim: usize, lo: Site, hi: Site) -> Vec<Site> {
    let mut out = Vec::new();
    let mut cur = lo;
    loop {
        out.push(cur);
        let mut axis = 0;
        loop {
            if axis == dim {
                return out;
            }
            if cur.0[axis] < hi.0[axis] {
                cur.0[axis] += 1;
                break;
            }
            cur.0[axis] = lo.0[axis];
            axis += 1;
        }
    }
}

/// Diameter of a union of closed cubes, via the corner points.
fn union_diameter(cubes: &[Site], dim: usize, s: f64) -> f64 {
    let h = s / 2.0;
    match dim {
        1 => {
            let lo = cubes.iter().map(|c| c.0[0]).min().unwrap_or(0);
            let hi = cubes.iter().map(|c| c.0[0]).max().unwrap_or(0);
            (hi - lo) as f64 * s + s
        }
        2 => {
            let mut pts: Vec<(f64, f64)> = Vec::with_capacity(cubes.len() * 4);
            for c in cubes {
                let (x, y) = (c.0[0] as f64 * s, c.0[1] as f64 * s);
                for (dx, dy) in [(-h, -h), (-h, h), (h, -h), (h, h)] {
                    pts.push((x + dx, y + dy));
                }
            }
            let hull = convex_hull(pts);
            let mut best: f64 = 0.0;
            for i in 0..hull.len() {
                for j in i + 1..hull.len() {
                    best = best.max(((hull[i].0 - hull[j].0).powi(2) + (hull[i].1 - hull[j].1).powi(2)).sqrt());
                }
            }
            best
        }
        _ => {
            let mut best: f64 = 0.0;
            for a in cubes {
                for b in cubes {
                    let d: f64 = (0..dim).map(|i| ((a.0[i] - b.0[i]).abs() as f64 * s + s).powi(2)).sum();
                    best = best.max(d.sqrt());
                }
            }
            best
        }
    }
}

fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// One hitting time: the cubes attached and the particles absorbed.
#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub time: f64,
    pub cubes: Vec<Site>,
    pub particles: Vec<u32>,
}

const BUCKET: i32 = 8;

/// Spatial hash of the finitely many aggregate cubes, for nearest-cube queries.
#[derive(Clone, Debug, Default)]
struct CubeIndex {
    buckets: HashMap<[i32; MAX_DIM], Vec<Site>>,
    lo: [i32; MAX_DIM],
    hi: [i32; MAX_DIM],
}

impl CubeIndex {
    fn bucket_of(site: Site, dim: usize) -> [i32; MAX_DIM] {
        let mut b = [0; MAX_DIM];
        for i in 0..dim {
            b[i] = site.0[i].div_euclid(BUCKET);
        }
        b
    }

    fn insert(&mut self, site: Site, dim: usize) {
        let b = Self::bucket_of(site, dim);
        if self.buckets.is_empty() {
            self.lo = b;
            self.hi = b;
        } else {
            for i in 0..dim {
                self.lo[i] = self.lo[i].min(b[i]);
                self.hi[i] = self.hi[i].max(b[i]);
            }
        }
        self.buckets.entry(b).or_default().push(site);
    }

    /// Distance from p to the nearest indexed cube, or `upper` if none is closer.
    fn nearest(&self, p: &Point, spec: &LatticeSpec, upper: f64) -> f64 {
        if self.buckets.is_empty() {
            return upper;
        }
        let dim = spec.dim;
        let s = spec.spacing();
        let centre = Self::bucket_of(spec.site_of(p), dim);
        let mut max_ring = 0;
        for i in 0..dim {
            max_ring = max_ring.max((centre[i] - self.lo[i]).abs()).max((self.hi[i] - centre[i]).abs());
        }
        let mut best = upper;
        for r in 0..=max_ring {
            if r >= 1 && (r - 1) as f64 * BUCKET as f64 * s >= best {
                break;
            }
            for_each_shell(dim, r, &mut |off| {
                let mut key = [0; MAX_DIM];
                for i in 0..dim {
                    key[i] = centre[i] + off[i];
                }
                if let Some(cubes) = self.buckets.get(&key) {
                    for c in cubes {
                        best = best.min(cube_distance(p, &spec.center(*c), dim, s / 2.0));
                    }
                }
            });
        }
        best
    }
}

/// Visit all integer offsets with Chebyshev norm exactly r.
fn for_each_shell(dim: usize, r: i32, f: &mut dyn FnMut(&[i32; MAX_DIM])) {
    if r == 0 {
        f(&[0; MAX_DIM]);
        return;
    }
    // The first axis (in order) reaching |x| = r is `lead`.
    for lead in 0..dim {
        let mut off = [0; MAX_DIM];
        fn rec(axis: usize, lead: usize, dim: usize, r: i32, off: &mut [i32; MAX_DIM], f: &mut dyn FnMut(&[i32; MAX_DIM])) {
            if axis == dim {
                f(off);
                return;
            }
            if axis == lead {
                for v in [-r, r] {
                    off[axis] = v;
                    rec(axis + 1, lead, dim, r, off, f);
                }
            } else {
                let (a, b) = if axis < lead { (-r + 1, r - 1) } else { (-r, r) };
                for v in a..=b {
                    off[axis] = v;
                    rec(axis + 1, lead, dim, r, off, f);
                }
            }
        }
        rec(0, lead, dim, r, &mut off, f);
    }
}

/// Euclidean distance from p to the closed cube of half-side h centred at c.
#[inline]
pub fn cube_distance(p: &Point, c: &Point, dim: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..dim {
        let d = ((p[i] - c[i]).abs() - h).max(0.0);
        acc += d * d;
    }
    acc.sqrt()
}

/// The growing set Γ: seed plus attached cubes, with the attachment log.
#[derive(Clone, Debug)]
pub struct Aggregate {
    spec: LatticeSpec,
    seed: Seed,
    attached: HashSet<Site>,
    /// Membership of seed and attached cubes inside a finite domain.
    mask: Option<Vec<bool>>,
    index: CubeIndex,
    log: Vec<LogEntry>,
}

impl Aggregate {
    pub fn new(spec: &LatticeSpec, seed: Seed) -> Self {
        let mut index = CubeIndex::default();
        let mut cubes: Vec<Site> = seed.cubes.iter().copied().collect();
        cubes.sort();
        for c in cubes {
            index.insert(c, spec.dim);
        }
        let mask = spec.site_count().map(|_| spec.sites().iter().map(|k| seed.contains(*k, spec.dim)).collect());
        Aggregate { spec: spec.clone(), seed, attached: HashSet::new(), mask, index, log: Vec::new() }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn seed(&self) -> &Seed {
        &self.seed
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn attached_count(&self) -> usize {
        self.attached.len()
    }

    pub fn is_attached(&self, site: Site) -> bool {
        self.attached.contains(&site)
    }

    #[inline]
    pub fn contains(&self, site: Site) -> bool {
        if let Some(mask) = &self.mask {
            if let Some(i) = self.spec.dense_index(site) {
                return mask[i];
            }
        }
        self.seed.contains(site, self.spec.dim) || self.attached.contains(&site)
    }

    /// Whether the site is outside the aggregate and shares a face with it,
    /// i.e. its centre is at distance exactly s/2.
    #[inline]
    pub fn is_face_adjacent(&self, site: Site) -> bool {
        if self.contains(site) {
            return false;
        }
        let dim = self.spec.dim;
        for i in 0..dim {
            for sgn in [1, -1] {
                let mut nb = site;
                nb.0[i] += sgn;
                if self.contains(nb) {
                    return true;
                }
            }
        }
        false
    }

    /// Whether the closed cube at `site` meets the aggregate under `conn`.
    pub fn touches(&self, site: Site, conn: Connectivity) -> bool {
        match conn {
            Connectivity::FaceOnly => self.is_face_adjacent(site),
            Connectivity::ClosedCube => {
                !self.contains(site) && self.spec.touching_offsets().iter().any(|d| self.contains(site.shifted(d)))
            }
        }
    }

    /// Attach every component of occupied cubes that meets the aggregate.
    ///
    /// `trigger` must be occupied and face-adjacent. `candidates` must
    /// contain every other occupied site that already touches the aggregate
    /// under `conn`; extra entries are ignored. Components are grown from
    /// these starts, so cubes reached through newly attached cubes are taken
    /// up to the fixpoint.
    pub fn attach_from<F>(&mut self, occupant: F, trigger: Site, candidates: &[Site], t: f64, conn: Connectivity) -> Result<&LogEntry>
    where
        F: Fn(Site) -> Option<u32>,
    {
        if occupant(trigger).is_none() {
            return Err(Error::CascadePrecondition(format!("trigger {:?} is not occupied", trigger)));
        }
        if !self.is_face_adjacent(trigger) {
            return Err(Error::CascadePrecondition(format!("trigger {:?} is not face-adjacent", trigger)));
        }
        let offsets = self.spec.offsets(conn);
        let mut visited: HashSet<Site> = HashSet::new();
        let mut queue: VecDeque<Site> = VecDeque::new();
        visited.insert(trigger);
        queue.push_back(trigger);
        for &c in candidates {
            if occupant(c).is_some() && !visited.contains(&c) && self.touches(c, conn) {
                visited.insert(c);
                queue.push_back(c);
            }
        }
        while let Some(c) = queue.pop_front() {
            for d in &offsets {
                let nb = c.shifted(d);
                if !visited.contains(&nb) && occupant(nb).is_some() && !self.contains(nb) {
                    visited.insert(nb);
                    queue.push_back(nb);
                }
            }
        }
        let mut cubes: Vec<Site> = visited.into_iter().collect();
        cubes.sort();
        let particles = cubes.iter().map(|c| occupant(*c).expect("visited sites are occupied")).collect();
        for &c in &cubes {
            self.attached.insert(c);
            if let (Some(mask), Some(i)) = (self.mask.as_mut(), self.spec.dense_index(c)) {
                mask[i] = true;
            }
            self.index.insert(c, self.spec.dim);
        }
        self.log.push(LogEntry { time: t, cubes, particles });
        Ok(self.log.last().expect("just pushed"))
    }

    /// Cascade with the touching candidates found by scanning `occupied`.
    pub fn cascade_attach(&mut self, occupied: &HashMap<Site, u32>, trigger: Site, t: f64, conn: Connectivity) -> Result<&LogEntry> {
        let mut candidates: Vec<Site> = occupied.keys().copied().filter(|k| self.touches(*k, conn)).collect();
        candidates.sort();
        self.attach_from(|k| occupied.get(&k).copied(), trigger, &candidates, t, conn)
    }

    /// Distance from p to the aggregate (0 inside), computed exactly.
    pub fn distance(&self, p: &Point) -> Result<f64> {
        if self.seed.is_empty() && self.attached.is_empty() {
            return Err(Error::EmptyAggregate);
        }
        let s = self.spec.spacing();
        let upper = self.seed.bulk.as_ref().map_or(f64::INFINITY, |b| b.distance(p, self.spec.dim, s));
        if upper == 0.0 {
            return Ok(0.0);
        }
        Ok(self.index.nearest(p, &self.spec, upper))
    }

    /// Attached cubes with log time <= t, in log order.
    pub fn attached_until(&self, t: f64) -> Vec<Site> {
        self.log.iter().take_while(|e| e.time <= t).flat_map(|e| e.cubes.iter().copied()).collect()
    }

    /// Whether a site belongs to the aggregate as it stood at time t.
    pub fn membership_at(&self, t: f64) -> impl Fn(Site) -> bool + '_ {
        let later: HashSet<Site> = self.log.iter().filter(|e| e.time > t).flat_map(|e| e.cubes.iter().copied()).collect();
        move |k| self.contains(k) && !later.contains(&k)
    }
}

/// Regular grid of query points, `counts[i]` nodes from `lo[i]` to `hi[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: Point,
    pub hi: Point,
    pub counts: [usize; MAX_DIM],
}

impl GridSpec {
    pub fn node(&self, idx: &[usize; MAX_DIM], dim: usize) -> Point {
        let mut p = [0.0; MAX_DIM];
        for i in 0..dim {
            p[i] = if self.counts[i] <= 1 {
                self.lo[i]
            } else {
                self.lo[i] + (self.hi[i] - self.lo[i]) * idx[i] as f64 / (self.counts[i] - 1) as f64
            };
        }
        p
    }

    pub fn len(&self, dim: usize) -> usize {
        self.counts[..dim].iter().product()
    }

    pub fn is_empty(&self, dim: usize) -> bool {
        self.len(dim) == 0
    }
}

/// Distances at every grid node, axis 0 varying fastest.
pub fn distance_field(agg: &Aggregate, grid: &GridSpec) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let spec = agg.spec();
    let dim = spec.dim;
    if let crate::lattice::Domain::Box { lo, hi } = spec.domain {
        let s = spec.spacing();
        for i in 0..dim {
            let a = (lo.0[i] as f64 - 0.5) * s;
            let b = (hi.0[i] as f64 + 0.5) * s;
            let eps = 1e-12;
            if grid.lo[i] < a - eps || grid.hi[i] > b + eps {
                return Err(Error::GridOutsideRegion(format!(
                    "axis {i}: grid [{}, {}] not inside [{a}, {b}]",
                    grid.lo[i], grid.hi[i]
                )));
            }
        }
    }
    let total = grid.len(dim);
    (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut idx = [0; MAX_DIM];
            let mut rest = flat;
            for i in 0..dim {
                idx[i] = rest % grid.counts[i];
                rest /= grid.counts[i];
            }
            agg.distance(&grid.node(&idx, dim))
        })
        .collect()
}
