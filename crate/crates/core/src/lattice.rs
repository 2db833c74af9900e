//! The rescaled lattice Z^d/n, its sites and the cubes centred on them.

use crate::error::{Error, Result};

/// Largest supported dimension. Tests only exercise d = 1 and d = 2.
pub const MAX_DIM: usize = 3;

/// A point of R^d; coordinates beyond the lattice dimension are zero.
pub type Point = [f64; MAX_DIM];

/// Integer lattice index k; the site sits at k/n. Unused coordinates are 0.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Site(pub [i32; MAX_DIM]);

impl Site {
    pub fn new(coords: &[i32]) -> Self {
        let mut k = [0; MAX_DIM];
        k[..coords.len()].copy_from_slice(coords);
        Site(k)
    }

    pub fn d1(k: i32) -> Self {
        Site([k, 0, 0])
    }

    pub fn d2(k1: i32, k2: i32) -> Self {
        Site([k1, k2, 0])
    }

    pub fn shifted(self, delta: &[i32; MAX_DIM]) -> Self {
        Site([self.0[0] + delta[0], self.0[1] + delta[1], self.0[2] + delta[2]])
    }

    pub fn coords(&self, dim: usize) -> &[i32] {
        &self.0[..dim]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Open,
    /// Bonds leaving the domain are deleted.
    Reflecting,
}

/// Simulation domain, given as an inclusive box of site indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Unbounded,
    Box { lo: Site, hi: Site },
}

/// Adjacency used when grouping particle cubes into components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Connectivity {
    /// Closed cubes touching at a face, edge or corner are connected.
    #[default]
    ClosedCube,
    /// Only cubes sharing a face are connected.
    FaceOnly,
}

impl std::str::FromStr for Connectivity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-cube" | "closed" => Ok(Connectivity::ClosedCube),
            "face-only" | "face" => Ok(Connectivity::FaceOnly),
            other => Err(Error::Config(format!("unknown connectivity '{other}'"))),
        }
    }
}

impl std::fmt::Display for Connectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Connectivity::ClosedCube => "closed-cube",
            Connectivity::FaceOnly => "face-only",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec {
    pub dim: usize,
    /// Sites per unit length; the spacing is 1/n.
    pub n: u32,
    pub domain: Domain,
    pub boundary: Boundary,
}

impl LatticeSpec {
    /// Unbounded lattice with open boundary.
    pub fn new(dim: usize, n: u32) -> Result<Self> {
        let spec = LatticeSpec { dim, n, domain: Domain::Unbounded, boundary: Boundary::Open };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_box(dim: usize, n: u32, lo: Site, hi: Site, boundary: Boundary) -> Result<Self> {
        let spec = LatticeSpec { dim, n, domain: Domain::Box { lo, hi }, boundary };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::Lattice(format!("dimension {} not in 1..={MAX_DIM}", self.dim)));
        }
        if self.n == 0 {
            return Err(Error::Lattice("n must be positive".into()));
        }
        match self.domain {
            Domain::Unbounded => {
                if self.boundary == Boundary::Reflecting {
                    return Err(Error::Lattice("reflecting boundary requires a finite domain".into()));
                }
            }
            Domain::Box { lo, hi } => {
                for i in 0..MAX_DIM {
                    if i < self.dim && lo.0[i] > hi.0[i] {
                        return Err(Error::Lattice(format!("empty box along axis {i}")));
                    }
                    if i >= self.dim && (lo.0[i] != 0 || hi.0[i] != 0) {
                        return Err(Error::Lattice("box uses coordinates beyond dim".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Cube volume s^d, which is also the mass carried by one particle.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Jump rate of one bond, n^2/2.
    pub fn rate_per_bond(&self) -> f64 {
        let n = self.n as f64;
        n * n / 2.0
    }

    pub fn center(&self, site: Site) -> Point {
        let s = self.spacing();
        let mut p = [0.0; MAX_DIM];
        for (i, x) in p.iter_mut().enumerate().take(self.dim) {
            *x = site.0[i] as f64 * s;
        }
        p
    }

    /// Site whose closed cube contains p (ties broken towards +infinity).
    pub fn site_of(&self, p: &Point) -> Site {
        let n = self.n as f64;
        let mut k = [0; MAX_DIM];
        for i in 0..self.dim {
            k[i] = (p[i] * n + 0.5).floor() as i32;
        }
        Site(k)
    }

    pub fn in_domain(&self, site: Site) -> bool {
        match self.domain {
            Domain::Unbounded => true,
            Domain::Box { lo, hi } => (0..self.dim).all(|i| site.0[i] >= lo.0[i] && site.0[i] <= hi.0[i]),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.domain, Domain::Box { .. })
    }

    /// Number of sites in a finite domain.
    pub fn site_count(&self) -> Option<usize> {
        match self.domain {
            Domain::Unbounded => None,
            Domain::Box { lo, hi } => {
                Some((0..self.dim).map(|i| (hi.0[i] - lo.0[i] + 1) as usize).product())
            }
        }
    }

    /// Row-major index of a site inside a finite domain.
    pub fn dense_index(&self, site: Site) -> Option<usize> {
        let Domain::Box { lo, hi } = self.domain else { return None };
        let mut idx = 0usize;
        for i in (0..self.dim).rev() {
            let k = site.0[i];
            if k < lo.0[i] || k > hi.0[i] {
                return None;
            }
            let ext = (hi.0[i] - lo.0[i] + 1) as usize;
            idx = idx * ext + (k - lo.0[i]) as usize;
        }
        Some(idx)
    }

    /// All sites of a finite domain in dense-index order.
    pub fn sites(&self) -> Vec<Site> {
        let Domain::Box { lo, hi } = self.domain else { return Vec::new() };
        let mut out = Vec::with_capacity(self.site_count().unwrap_or(0));
        let mut cur = lo;
        loop {
            out.push(cur);
            let mut axis = 0;
            loop {
                if axis == self.dim {
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

    /// Offsets of the 2d face neighbours.
    pub fn face_offsets(&self) -> Vec<[i32; MAX_DIM]> {
        let mut out = Vec::with_capacity(2 * self.dim);
        for i in 0..self.dim {
            for sign in [1, -1] {
                let mut d = [0; MAX_DIM];
                d[i] = sign;
                out.push(d);
            }
        }
        out
    }

    /// Offsets of all 3^d - 1 sites whose closed cubes touch the origin cube.
    pub fn touching_offsets(&self) -> Vec<[i32; MAX_DIM]> {
        let mut out = Vec::new();
        let total = 3usize.pow(self.dim as u32);
        for code in 0..total {
            let mut d = [0; MAX_DIM];
            let mut c = code;
            for x in d.iter_mut().take(self.dim) {
                *x = (c % 3) as i32 - 1;
                c /= 3;
            }
            if d != [0; MAX_DIM] {
                out.push(d);
            }
        }
        out
    }

    pub fn offsets(&self, conn: Connectivity) -> Vec<[i32; MAX_DIM]> {
        match conn {
            Connectivity::ClosedCube => self.touching_offsets(),
            Connectivity::FaceOnly => self.face_offsets(),
        }
    }

    /// Whether the bond between two face-adjacent sites is present.
    pub fn has_bond(&self, a: Site, b: Site) -> bool {
        match self.boundary {
            Boundary::Open => true,
            Boundary::Reflecting => self.in_domain(a) && self.in_domain(b),
        }
    }

    /// Number of present bonds at a site.
    pub fn degree(&self, site: Site) -> usize {
        match self.boundary {
            Boundary::Open => 2 * self.dim,
            Boundary::Reflecting => {
                self.face_offsets().iter().filter(|d| self.in_domain(site.shifted(d))).count()
            }
        }
    }
}
