//! Winding numbers of planar polylines about a point, built from the
//! stopping times at which the curve meets the axis rays through the point.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::RngCore;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::stream;

pub type P2 = [f64; 2];

/// Snap tolerance, relative to the local coordinate scale. Points closer
/// than this to an axis line through z are treated as lying on it.
pub const SNAP: f64 = 1e-12;

/// Piecewise-linear path with strictly increasing vertex times.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    times: Vec<f64>,
    points: Vec<P2>,
}

impl Polyline {
    pub fn new(times: Vec<f64>, points: Vec<P2>) -> Result<Self> {
        if times.len() != points.len() || times.len() < 2 {
            return Err(Error::Path("need at least two vertices, one time per point".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Path("vertex times must be strictly increasing".into()));
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Path("non-finite vertex".into()));
        }
        Ok(Polyline { times, points })
    }

    /// Vertices at times 0, 1, 2, ...
    pub fn from_points(points: Vec<P2>) -> Result<Self> {
        Self::new((0..points.len()).map(|i| i as f64).collect(), points)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[P2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn is_closed(&self) -> bool {
        self.points[0] == *self.points.last().expect("non-empty")
    }

    /// Position at time t (clamped to the time range).
    pub fn at(&self, t: f64) -> P2 {
        if t <= self.times[0] {
            return self.points[0];
        }
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            return self.points[last];
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        if self.times[i] == t {
            return self.points[i];
        }
        let u = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        lerp(self.points[i], self.points[i + 1], u)
    }

    /// Sub-segments covering [t1, t2] as (time_a, a, time_b, b).
    fn pieces(&self, t1: f64, t2: f64) -> Vec<(f64, P2, f64, P2)> {
        let mut out = Vec::new();
        if t2 <= t1 {
            return out;
        }
        let mut ta = t1;
        let mut a = self.at(t1);
        for (i, &tv) in self.times.iter().enumerate() {
            if tv <= t1 {
                continue;
            }
            if tv >= t2 {
                break;
            }
            out.push((ta, a, tv, self.points[i]));
            ta = tv;
            a = self.points[i];
        }
        out.push((ta, a, t2, self.at(t2)));
        out
    }

    /// The same image traversed backwards over the same time interval.
    pub fn reversed(&self) -> Polyline {
        let (t0, t1) = (self.start_time(), self.end_time());
        let times = self.times.iter().rev().map(|t| t0 + t1 - t).collect();
        let points = self.points.iter().rev().copied().collect();
        Polyline { times, points }
    }

    pub fn map_points(&self, f: impl Fn(P2) -> P2) -> Polyline {
        Polyline { times: self.times.clone(), points: self.points.iter().map(|p| f(*p)).collect() }
    }

    fn check_window(&self, t1: f64, t2: f64) -> Result<()> {
        if !(t1 <= t2) || t1 < self.start_time() || t2 > self.end_time() {
            return Err(Error::Path(format!(
                "window [{t1}, {t2}] outside [{}, {}]",
                self.start_time(),
                self.end_time()
            )));
        }
        Ok(())
    }
}

fn lerp(a: P2, b: P2, u: f64) -> P2 {
    [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]
}

fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

/// Signed angle in [-pi, pi) from the ray z->x to the ray z->y.
pub fn arg_about(z: P2, x: P2, y: P2) -> Result<f64> {
    if x == z || y == z {
        return Err(Error::CoincidentPoints);
    }
    Ok(angle_between(sub(x, z), sub(y, z)))
}

fn angle_between(a: P2, b: P2) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    let th = cross.atan2(dot);
    if th >= PI {
        -PI
    } else {
        th
    }
}

fn segment_distance(z: P2, a: P2, b: P2) -> f64 {
    let ab = sub(b, a);
    let az = sub(z, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let u = if len2 > 0.0 { ((az[0] * ab[0] + az[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let p = lerp(a, b, u);
    ((p[0] - z[0]).powi(2) + (p[1] - z[1]).powi(2)).sqrt()
}

fn scale_of(z: P2, a: P2, b: P2) -> f64 {
    1.0_f64.max(z[0].abs()).max(z[1].abs()).max(a[0].abs()).max(a[1].abs()).max(b[0].abs()).max(b[1].abs())
}

fn check_off_curve(z: P2, pieces: &[(f64, P2, f64, P2)]) -> Result<()> {
    for &(_, a, _, b) in pieces {
        if segment_distance(z, a, b) <= SNAP * scale_of(z, a, b) {
            return Err(Error::PointOnCurve);
        }
    }
    Ok(())
}

/// Axis ray through z: 0 = +x, 1 = +y, 2 = -x, 3 = -y.
type Ray = u8;

fn ray_of(rel: P2, tol: f64) -> Option<Ray> {
    if rel[1].abs() <= tol {
        Some(if rel[0] > 0.0 { 0 } else { 2 })
    } else if rel[0].abs() <= tol {
        Some(if rel[1] > 0.0 { 1 } else { 3 })
    } else {
        None
    }
}

/// Earliest u in (u0, 1] at which a + u (b - a) lies on an axis ray other
/// than `excluded`; coordinates are relative to z. The hit point is
/// returned with the on-axis coordinate set to exactly 0.
fn first_ray_hit(a: P2, b: P2, u0: f64, excluded: Option<Ray>, tol: f64) -> Option<(f64, P2, Ray)> {
    let mut best: Option<(f64, P2, Ray)> = None;
    for axis in 0..2 {
        let other = 1 - axis;
        let (va, vb) = (a[axis], b[axis]);
        let za = va.abs() <= tol;
        let zb = vb.abs() <= tol;
        let u = if za && zb {
            // Segment runs along the axis line; its ray is the one the
            // previous stopping point already lies on.
            continue;
        } else if zb {
            1.0
        } else if za {
            0.0
        } else if (va > 0.0) != (vb > 0.0) {
            va / (va - vb)
        } else {
            continue;
        };
        if u <= u0 || u > 1.0 {
            continue;
        }
        let mut p = lerp(a, b, u);
        p[axis] = 0.0;
        let ray = match (axis, p[other] > 0.0) {
            (1, true) => 0,
            (1, false) => 2,
            (0, true) => 1,
            (_, _) => 3,
        };
        if Some(ray) == excluded {
            continue;
        }
        if best.is_none_or(|(bu, _, _)| u < bu) {
            best = Some((u, p, ray));
        }
    }
    best
}

/// Stopping times and angle increments of the winding number.
#[derive(Clone, Debug, PartialEq)]
pub struct WindingTrace {
    /// tau^(0) = t1, tau^(1), ..., ending with t2.
    pub stopping_times: Vec<f64>,
    /// theta^(n) for n >= 1, one per stopping time after the first.
    pub increments: Vec<f64>,
    pub total: f64,
}

impl WindingTrace {
    /// Total divided by 2 pi, rounded; meaningful for closed arcs.
    pub fn turns(&self) -> i64 {
        (self.total / (2.0 * PI)).round() as i64
    }
}

/// Winding number of the path about z over [t1, t2].
pub fn winding_number(z: P2, path: &Polyline, t1: f64, t2: f64) -> Result<WindingTrace> {
    path.check_window(t1, t2)?;
    let start = path.at(t1);
    if t1 == t2 {
        if start == z {
            return Err(Error::PointOnCurve);
        }
        return Ok(WindingTrace { stopping_times: vec![t1], increments: vec![], total: 0.0 });
    }
    let pieces = path.pieces(t1, t2);
    check_off_curve(z, &pieces)?;

    let mut stopping_times = vec![t1];
    let mut increments = Vec::new();
    let mut prev = sub(start, z);
    let mut excluded = ray_of(prev, SNAP * scale_of(z, start, start));
    for &(ta, a, tb, b) in &pieces {
        let (ra, rb) = (sub(a, z), sub(b, z));
        let tol = SNAP * scale_of(z, a, b);
        let mut u0 = 0.0;
        while let Some((u, p, ray)) = first_ray_hit(ra, rb, u0, excluded, tol) {
            increments.push(angle_between(prev, p));
            stopping_times.push(ta + u * (tb - ta));
            prev = p;
            excluded = Some(ray);
            u0 = u;
        }
    }
    let end = sub(path.at(t2), z);
    increments.push(angle_between(prev, end));
    stopping_times.push(t2);
    let total = increments.iter().sum();
    Ok(WindingTrace { stopping_times, increments, total })
}

/// Contour form: sum of the signed angles subtended by each segment. Only
/// defined for closed paths.
pub fn winding_oracle(z: P2, path: &Polyline) -> Result<f64> {
    if !path.is_closed() {
        return Err(Error::NotClosed);
    }
    let pieces = path.pieces(path.start_time(), path.end_time());
    check_off_curve(z, &pieces)?;
    Ok(pieces.iter().map(|&(_, a, _, b)| angle_between(sub(a, z), sub(b, z))).sum())
}

fn point_key(p: P2) -> (u64, u64) {
    // +0.0 and -0.0 are the same vertex.
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

/// Latest visit of a vertex position and the latest visit in a different
/// winding class (classes differ by whole turns of the accumulated angle).
#[derive(Clone, Copy)]
struct Visits {
    class: i64,
    index: usize,
    other: Option<usize>,
}

impl Visits {
    fn earlier_with_other_class(&self, class: i64) -> Option<usize> {
        if class != self.class {
            Some(self.index)
        } else {
            self.other
        }
    }

    fn update(&mut self, class: i64, index: usize) {
        if class != self.class {
            self.other = Some(self.index);
            self.class = class;
        }
        self.index = index;
    }
}

/// Smallest vertex time t in [t1, t2] such that an earlier vertex time
/// s >= t1 has the same position and a nonzero winding number over [s, t].
/// Only vertex coincidences are detected.
pub fn first_enclosing_time(z: P2, path: &Polyline, t1: f64, t2: f64) -> Result<Option<f64>> {
    path.check_window(t1, t2)?;
    let pieces = path.pieces(t1, t2);
    check_off_curve(z, &pieces)?;
    if pieces.is_empty() {
        return Ok(None);
    }
    let mut verts: Vec<(f64, P2)> = vec![(pieces[0].0, pieces[0].1)];
    verts.extend(pieces.iter().map(|&(_, _, tb, b)| (tb, b)));

    let mut seen: HashMap<(u64, u64), Visits> = HashMap::new();
    let mut theta = 0.0;
    for (i, &(t, p)) in verts.iter().enumerate() {
        if i > 0 {
            theta += angle_between(sub(verts[i - 1].1, z), sub(p, z));
        }
        let rel = sub(p, z);
        let class = ((theta - rel[1].atan2(rel[0])) / (2.0 * PI)).round() as i64;
        let key = point_key(p);
        match seen.get_mut(&key) {
            Some(v) => {
                if let Some(j) = v.earlier_with_other_class(class) {
                    let w = winding_number(z, path, verts[j].0, t)?;
                    if w.total.abs() > PI {
                        return Ok(Some(t));
                    }
                }
                v.update(class, i);
            }
            None => {
                seen.insert(key, Visits { class, index: i, other: None });
            }
        }
    }
    Ok(None)
}

/// Like [`first_enclosing_time`] but also detects crossings in the middle of
/// segments. Quadratic in the number of segments.
pub fn first_enclosing_time_general(z: P2, path: &Polyline, t1: f64, t2: f64) -> Result<Option<f64>> {
    path.check_window(t1, t2)?;
    let pieces = path.pieces(t1, t2);
    check_off_curve(z, &pieces)?;
    for j in 0..pieces.len() {
        let (tc, c, td, d) = pieces[j];
        let mut best: Option<f64> = None;
        for &(ta, a, tb, b) in pieces.iter().take(j) {
            for (u, v) in segment_intersections(a, b, c, d) {
                let s = ta + u * (tb - ta);
                let t = tc + v * (td - tc);
                if t <= s || best.is_some_and(|bt| t >= bt) {
                    continue;
                }
                let w = winding_number(z, path, s, t)?;
                if w.total.abs() > PI {
                    best = Some(t);
                }
            }
        }
        if best.is_some() {
            return Ok(best);
        }
    }
    Ok(None)
}

/// Parameters (u on ab, v on cd) of intersection points; collinear overlaps
/// report their endpoints.
fn segment_intersections(a: P2, b: P2, c: P2, d: P2) -> Vec<(f64, f64)> {
    let r = sub(b, a);
    let s = sub(d, c);
    let denom = r[0] * s[1] - r[1] * s[0];
    let ca = sub(c, a);
    let scale = r[0].abs().max(r[1].abs()).max(s[0].abs()).max(s[1].abs()).max(1e-300);
    if denom.abs() > SNAP * scale * scale {
        let u = (ca[0] * s[1] - ca[1] * s[0]) / denom;
        let v = (ca[0] * r[1] - ca[1] * r[0]) / denom;
        if (-SNAP..=1.0 + SNAP).contains(&u) && (-SNAP..=1.0 + SNAP).contains(&v) {
            return vec![(u.clamp(0.0, 1.0), v.clamp(0.0, 1.0))];
        }
        return vec![];
    }
    if (ca[0] * r[1] - ca[1] * r[0]).abs() > SNAP * scale * scale {
        return vec![];
    }
    // Collinear: project the endpoints of each segment onto the other.
    let rr = r[0] * r[0] + r[1] * r[1];
    let ss = s[0] * s[0] + s[1] * s[1];
    let mut out = Vec::new();
    let proj = |p: P2, o: P2, dir: P2, len2: f64| if len2 > 0.0 { ((p[0] - o[0]) * dir[0] + (p[1] - o[1]) * dir[1]) / len2 } else { 0.0 };
    for (p, v) in [(c, 0.0), (d, 1.0)] {
        let u = proj(p, a, r, rr);
        if (0.0..=1.0).contains(&u) {
            out.push((u, v));
        }
    }
    for (p, u) in [(a, 0.0), (b, 1.0)] {
        let v = proj(p, c, s, ss);
        if (0.0..=1.0).contains(&v) {
            out.push((u, v));
        }
    }
    out
}

/// Whether z lies in a bounded component of the complement of a closed
/// path, by flood filling a raster from its border. Curve cells are marked
/// conservatively; the cell size is at most a third of the distance from z to
/// the curve so z's own cell is never marked.
pub fn enclosure_check(z: P2, path: &Polyline) -> Result<bool> {
    if !path.is_closed() {
        return Err(Error::NotClosed);
    }
    let pieces = path.pieces(path.start_time(), path.end_time());
    check_off_curve(z, &pieces)?;
    let d0 = pieces.iter().map(|&(_, a, _, b)| segment_distance(z, a, b)).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (z, z);
    for p in path.points() {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    const MAX_CELLS: f64 = 4096.0;
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let h = (d0 / 4.0).max(extent / MAX_CELLS);
    if h > d0 / 3.0 {
        return Err(Error::Path("point too close to the curve for the raster".into()));
    }
    let pad = 2;
    let w = ((hi[0] - lo[0]) / h).ceil() as usize + 2 * pad + 1;
    let ht = ((hi[1] - lo[1]) / h).ceil() as usize + 2 * pad + 1;
    let cell = |p: P2| -> (usize, usize) {
        (((p[0] - lo[0]) / h).floor() as usize + pad, ((p[1] - lo[1]) / h).floor() as usize + pad)
    };
    let mut blocked = vec![false; w * ht];
    for &(_, a, _, b) in &pieces {
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let steps = ((len / (h / 4.0)).ceil() as usize).max(1);
        let mut last: Option<(usize, usize)> = None;
        for k in 0..=steps {
            let (cx, cy) = cell(lerp(a, b, k as f64 / steps as f64));
            blocked[cy * w + cx] = true;
            // A diagonal move between samples may skip a cell the segment
            // clips; block both candidates so the flood cannot leak.
            if let Some((px, py)) = last {
                if px != cx && py != cy {
                    blocked[py * w + cx] = true;
                    blocked[cy * w + px] = true;
                }
            }
            last = Some((cx, cy));
        }
    }
    let mut reached = vec![false; w * ht];
    let mut stack: Vec<usize> = Vec::new();
    for x in 0..w {
        stack.push(x);
        stack.push((ht - 1) * w + x);
    }
    for y in 0..ht {
        stack.push(y * w);
        stack.push(y * w + w - 1);
    }
    while let Some(i) = stack.pop() {
        if reached[i] || blocked[i] {
            continue;
        }
        reached[i] = true;
        let (x, y) = (i % w, i / w);
        if x > 0 {
            stack.push(i - 1);
        }
        if x + 1 < w {
            stack.push(i + 1);
        }
        if y > 0 {
            stack.push(i - w);
        }
        if y + 1 < ht {
            stack.push(i + w);
        }
    }
    let (zx, zy) = cell(z);
    Ok(!reached[zy * w + zx])
}

/// One row of a crossing experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossingEstimate {
    pub delta_prime: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossingConfig {
    pub delta: f64,
    pub delta_primes: Vec<f64>,
    pub paths: usize,
    /// Walk steps per unit of the smallest delta'.
    pub resolution: u32,
    pub seed: u64,
}

impl CrossingConfig {
    pub fn new(delta: f64, delta_primes: Vec<f64>, paths: usize) -> Self {
        CrossingConfig { delta, delta_primes, paths, resolution: 40, seed: 0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Config("delta must be positive".into()));
        }
        if self.delta_primes.is_empty() {
            return Err(Error::Config("no delta' values".into()));
        }
        for &d in &self.delta_primes {
            if !(d > 0.0 && d < self.delta) {
                return Err(Error::Config(format!("need 0 < delta' < delta, got delta' = {d}, delta = {}", self.delta)));
            }
        }
        if self.resolution == 0 || self.paths == 0 {
            return Err(Error::Config("resolution and paths must be positive".into()));
        }
        Ok(())
    }

    /// Lattice step of the walk.
    pub fn step(&self) -> f64 {
        let min = self.delta_primes.iter().copied().fold(f64::INFINITY, f64::min);
        min / self.resolution as f64
    }
}

fn binomial(delta_prime: f64, hits: usize, paths: usize) -> CrossingEstimate {
    let p = hits as f64 / paths as f64;
    CrossingEstimate { delta_prime, estimate: p, stderr: (p * (1.0 - p) / paths as f64).sqrt(), paths }
}

/// Dense visit table for one walk, reset between walks by a generation stamp.
struct VisitGrid {
    half: i64,
    width: usize,
    stamp: Vec<u32>,
    visits: Vec<(i64, u32, u32)>,
    generation: u32,
}

const NO_VISIT: u32 = u32::MAX;

impl VisitGrid {
    fn new(half: i64) -> Self {
        let width = (2 * half + 1) as usize;
        VisitGrid { half, width, stamp: vec![0; width * width], visits: vec![(0, 0, NO_VISIT); width * width], generation: 0 }
    }

    fn reset(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|g| *g = 0);
            self.generation = 1;
        }
    }

    /// Records a visit at step `index` with winding class `class` and
    /// returns the latest earlier step at this cell whose class differs.
    fn visit(&mut self, i: i64, j: i64, class: i64, index: u32) -> Option<u32> {
        let c = ((j + self.half) as usize) * self.width + (i + self.half) as usize;
        if self.stamp[c] != self.generation {
            self.stamp[c] = self.generation;
            self.visits[c] = (class, index, NO_VISIT);
            return None;
        }
        let v = &mut self.visits[c];
        let found = if class != v.0 {
            let latest = v.1;
            v.2 = latest;
            v.0 = class;
            Some(latest)
        } else {
            (v.2 != NO_VISIT).then_some(v.2)
        };
        v.1 = index;
        found
    }
}

/// One walk from the origin of the lattice (s/2 + sZ)^2 shifted back by
/// (s/2, s/2), so the walk starts next to 0 and never meets it. Returns the
/// latest step s that starts a nonzero-winding loop closed before the exit
/// of radius delta, and the first step at which each radius is exceeded.
fn walk_once(grid: &mut VisitGrid, radii2: &[f64], delta2: f64, rng: &mut impl RngCore) -> (Option<u32>, Vec<u32>) {
    grid.reset();
    // Walk on integer cells; the point of cell (i, j) is (i + 1/2, j + 1/2).
    let (mut i, mut j) = (0i64, 0i64);
    let pos = |i: i64, j: i64| (i as f64 + 0.5, j as f64 + 0.5);
    let (x, y) = pos(i, j);
    let mut theta = y.atan2(x);
    let mut prev = (x, y);
    let mut exits = vec![u32::MAX; radii2.len()];
    let mut best: Option<u32> = None;
    grid.visit(i, j, 0, 0);
    let mut bits = 0u64;
    let mut left = 0u32;
    let mut index = 0u32;
    loop {
        if left == 0 {
            bits = rng.next_u64();
            left = 32;
        }
        match bits & 3 {
            0 => i += 1,
            1 => i -= 1,
            2 => j += 1,
            _ => j -= 1,
        }
        bits >>= 2;
        left -= 1;
        index += 1;
        let (x, y) = pos(i, j);
        theta += angle_between([prev.0, prev.1], [x, y]);
        prev = (x, y);
        let r2 = x * x + y * y;
        for (k, &rr) in radii2.iter().enumerate() {
            if exits[k] == u32::MAX && r2 >= rr {
                exits[k] = index;
            }
        }
        let class = ((theta - y.atan2(x)) / (2.0 * PI)).round() as i64;
        if let Some(s) = grid.visit(i, j, class, index) {
            best = Some(best.map_or(s, |b| b.max(s)));
        }
        if r2 >= delta2 {
            return (best, exits);
        }
    }
}

/// Monte Carlo estimate of the probability that a planar random walk from
/// the origin encloses its starting point between the exit times of the
/// discs of radius delta' and delta. The walk is a simple random walk on a
/// lattice offset by half a step so that the origin is never on the path.
pub fn crossing_experiment(cfg: &CrossingConfig) -> Result<Vec<CrossingEstimate>> {
    cfg.validate()?;
    let s = cfg.step();
    // Radii in units of the step, measured from the origin.
    let radii2: Vec<f64> = cfg.delta_primes.iter().map(|d| (d / s).powi(2)).collect();
    let delta2 = (cfg.delta / s).powi(2);
    let half = (cfg.delta / s).ceil() as i64 + 2;
    let results: Vec<Vec<bool>> = (0..cfg.paths as u64)
        .into_par_iter()
        .map_init(
            || VisitGrid::new(half),
            |grid, p| {
                let mut rng = stream(cfg.seed, p);
                let (best, exits) = walk_once(grid, &radii2, delta2, &mut rng);
                exits.iter().map(|&e| best.is_some_and(|b| b >= e)).collect()
            },
        )
        .collect();
    Ok(cfg
        .delta_primes
        .iter()
        .enumerate()
        .map(|(k, &d)| binomial(d, results.iter().filter(|r| r[k]).count(), cfg.paths))
        .collect())
}

/// First vertex time at which |p - z| >= r, or the end time if none.
fn vertex_exit_time(path: &Polyline, r: f64) -> f64 {
    path.points()
        .iter()
        .zip(path.times())
        .find(|(p, _)| p[0].hypot(p[1]) >= r)
        .map_or(path.end_time(), |(_, &t)| t)
}

/// The crossing estimate for given paths started at the origin, using
/// [`first_enclosing_time`] over the window between the vertex exit times.
pub fn crossing_from_paths(delta: f64, delta_primes: &[f64], paths: &[Polyline]) -> Result<Vec<CrossingEstimate>> {
    let cfg = CrossingConfig::new(delta, delta_primes.to_vec(), paths.len().max(1));
    cfg.validate()?;
    if paths.is_empty() {
        return Err(Error::Config("no paths".into()));
    }
    let tau = paths.iter().map(|p| vertex_exit_time(p, delta)).collect::<Vec<_>>();
    delta_primes
        .iter()
        .map(|&d| {
            let mut hits = 0;
            for (path, &t2) in paths.iter().zip(&tau) {
                let t1 = vertex_exit_time(path, d);
                if first_enclosing_time([0.0, 0.0], path, t1, t2)?.is_some() {
                    hits += 1;
                }
            }
            Ok(binomial(d, hits, paths.len()))
        })
        .collect()
}

/// `delta_prime,estimate,stderr,paths`
pub fn crossing_csv(rows: &[CrossingEstimate]) -> String {
    let mut out = String::from("delta_prime,estimate,stderr,paths\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.delta_prime, r.estimate, r.stderr, r.paths);
    }
    out
}
