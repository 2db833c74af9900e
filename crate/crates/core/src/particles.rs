//! Labelled particles on the lattice and their initial laws.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::aggregate::Aggregate;
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Point, Site, MAX_DIM};
use crate::rng::SimRng;
use crate::sitemap::Occupancy;

const NOT_FREE: u32 = u32::MAX;

/// Constant density `height` on the box (lo, hi], zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityProfile {
    pub height: f64,
    pub lo: Point,
    pub hi: Point,
}

impl DensityProfile {
    pub fn value(&self, p: &Point, dim: usize) -> f64 {
        if (0..dim).all(|i| p[i] > self.lo[i] && p[i] <= self.hi[i]) {
            self.height
        } else {
            0.0
        }
    }

    /// Sites whose centres fall in the support.
    pub fn support_sites(&self, spec: &LatticeSpec) -> Vec<Site> {
        let n = spec.n as f64;
        let mut lo = [0; MAX_DIM];
        let mut hi = [0; MAX_DIM];
        for i in 0..spec.dim {
            lo[i] = (self.lo[i] * n).floor() as i32;
            hi[i] = (self.hi[i] * n).ceil() as i32;
        }
        crate::aggregate::box_sites(spec.dim, Site(lo), Site(hi))
            .into_iter()
            .filter(|k| self.value(&spec.center(*k), spec.dim) > 0.0)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialLaw {
    /// `count` distinct sites uniformly among the available ones.
    Uniform { count: usize },
    /// Explicit sites; labels are still assigned by a random permutation.
    Sites(Vec<Site>),
    /// `count` distinct sites drawn without replacement with weights u0.
    Density { profile: DensityProfile, count: usize },
    /// Each site independently with probability u0 (requires u0 <= 1).
    Bernoulli { profile: DensityProfile },
}

/// Particle positions, free/absorbed status and the occupancy of free particles.
#[derive(Clone, Debug)]
pub struct ParticleSystem {
    spec: LatticeSpec,
    exclusive: bool,
    positions: Vec<Site>,
    absorbed_at: Vec<Option<f64>>,
    occupancy: Occupancy,
    free: Vec<u32>,
    free_slot: Vec<u32>,
    /// Sum over free particles of the number of present bonds at their site.
    degree_sum: usize,
    /// Present bonds whose two endpoints both hold free particles.
    free_pairs: usize,
    offsets: Vec<[i32; MAX_DIM]>,
}

impl ParticleSystem {
    /// `exclusive` systems reject shared sites and track occupancy.
    pub fn new(spec: &LatticeSpec, positions: Vec<Site>, exclusive: bool) -> Result<Self> {
        let mut sys = ParticleSystem {
            spec: spec.clone(),
            exclusive,
            absorbed_at: vec![None; positions.len()],
            occupancy: Occupancy::for_spec(spec),
            free: (0..positions.len() as u32).collect(),
            free_slot: (0..positions.len() as u32).collect(),
            positions,
            degree_sum: 0,
            free_pairs: 0,
            offsets: spec.face_offsets(),
        };
        for id in 0..sys.positions.len() {
            let site = sys.positions[id];
            if !spec.in_domain(site) {
                return Err(Error::Config(format!("site {:?} outside the domain", site.coords(spec.dim))));
            }
            sys.degree_sum += spec.degree(site);
            if exclusive {
                if sys.occupancy.is_occupied(site) {
                    return Err(Error::DuplicateSite(site.coords(spec.dim).to_vec()));
                }
                sys.free_pairs += sys.free_neighbours(site);
                sys.occupancy.insert(site, id as u32);
            }
        }
        Ok(sys)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn is_exclusive(&self) -> bool {
        self.exclusive
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Site] {
        &self.positions
    }

    pub fn position(&self, id: u32) -> Site {
        self.positions[id as usize]
    }

    pub fn absorbed_at(&self, id: u32) -> Option<f64> {
        self.absorbed_at[id as usize]
    }

    pub fn is_free(&self, id: u32) -> bool {
        self.free_slot[id as usize] != NOT_FREE
    }

    pub fn free_ids(&self) -> &[u32] {
        &self.free
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn absorbed_count(&self) -> usize {
        self.positions.len() - self.free.len()
    }

    /// Free particle at a site (exclusive systems only).
    #[inline]
    pub fn occupant(&self, site: Site) -> Option<u32> {
        self.occupancy.get(site)
    }

    pub fn degree_sum(&self) -> usize {
        self.degree_sum
    }

    pub fn free_pairs(&self) -> usize {
        self.free_pairs
    }

    /// Bonds with at least one free endpoint.
    pub fn active_bond_count(&self) -> usize {
        self.degree_sum - self.free_pairs
    }

    #[inline]
    fn free_neighbours(&self, site: Site) -> usize {
        let mut count = 0;
        for d in &self.offsets {
            let nb = site.shifted(d);
            if self.occupancy.is_occupied(nb) && self.spec.has_bond(site, nb) {
                count += 1;
            }
        }
        count
    }

    /// Move a free particle to a face neighbour. In exclusive systems the
    /// target must be empty; a violation is reported as an invariant error.
    pub fn hop(&mut self, id: u32, to: Site) -> Result<()> {
        let from = self.positions[id as usize];
        if self.exclusive {
            if self.occupancy.get(from) != Some(id) {
                return Err(Error::Invariant(format!("particle {id} not recorded at its site")));
            }
            self.occupancy.remove(from);
            self.free_pairs -= self.free_neighbours(from);
            if let Some(other) = self.occupancy.insert(to, id) {
                return Err(Error::Invariant(format!("particle {id} hopped onto particle {other}")));
            }
            self.free_pairs += self.free_neighbours(to);
        }
        self.degree_sum = self.degree_sum + self.spec.degree(to) - self.spec.degree(from);
        self.positions[id as usize] = to;
        Ok(())
    }

    /// Exchange the sites of two free particles.
    pub fn swap(&mut self, a: u32, b: u32) -> Result<()> {
        let (sa, sb) = (self.positions[a as usize], self.positions[b as usize]);
        if self.exclusive {
            if self.occupancy.get(sa) != Some(a) || self.occupancy.get(sb) != Some(b) {
                return Err(Error::Invariant(format!("swap of {a} and {b} with stale occupancy")));
            }
            self.occupancy.insert(sa, b);
            self.occupancy.insert(sb, a);
        }
        self.positions.swap(a as usize, b as usize);
        Ok(())
    }

    /// Freeze a particle at its current site.
    pub fn absorb(&mut self, id: u32, t: f64) -> Result<()> {
        let slot = self.free_slot[id as usize];
        if slot == NOT_FREE {
            return Err(Error::Invariant(format!("particle {id} absorbed twice")));
        }
        let site = self.positions[id as usize];
        if self.exclusive {
            self.occupancy.remove(site);
            self.free_pairs -= self.free_neighbours(site);
        }
        self.degree_sum -= self.spec.degree(site);
        let last = *self.free.last().expect("free list non-empty");
        self.free.swap_remove(slot as usize);
        if last != id {
            self.free_slot[last as usize] = slot;
        }
        self.free_slot[id as usize] = NOT_FREE;
        self.absorbed_at[id as usize] = Some(t);
        Ok(())
    }

    /// Full consistency check: occupancy is a bijection onto free particles
    /// and the bond counters match a recount.
    pub fn verify(&self) -> Result<()> {
        if !self.exclusive {
            return Ok(());
        }
        let mut seen = HashSet::with_capacity(self.free.len());
        let mut degree = 0;
        let mut pairs2 = 0;
        for &id in &self.free {
            let site = self.positions[id as usize];
            if !seen.insert(site) {
                return Err(Error::Invariant(format!("two free particles at {:?}", site)));
            }
            if self.occupancy.get(site) != Some(id) {
                return Err(Error::Invariant(format!("occupancy disagrees for particle {id}")));
            }
            degree += self.spec.degree(site);
            pairs2 += self.free_neighbours(site);
        }
        if degree != self.degree_sum || pairs2 != 2 * self.free_pairs {
            return Err(Error::Invariant("bond counters out of date".into()));
        }
        Ok(())
    }
}

fn available_sites(spec: &LatticeSpec, agg: &Aggregate, exclude_adjacent: bool) -> Result<Vec<Site>> {
    if !spec.is_bounded() {
        return Err(Error::Config("uniform initial law needs a finite domain".into()));
    }
    Ok(spec
        .sites()
        .into_iter()
        .filter(|k| !agg.contains(*k) && !(exclude_adjacent && agg.is_face_adjacent(*k)))
        .collect())
}

/// Sites available to a uniform initial law.
pub fn available_site_count(spec: &LatticeSpec, agg: &Aggregate, exclude_adjacent: bool) -> Result<usize> {
    Ok(available_sites(spec, agg, exclude_adjacent)?.len())
}

/// Draw the initial configuration. Sites inside the aggregate are never
/// used; `exclude_adjacent` also removes sites face-adjacent to it.
pub fn sample_initial(
    spec: &LatticeSpec,
    agg: &Aggregate,
    law: &InitialLaw,
    exclude_adjacent: bool,
    rng: &mut SimRng,
) -> Result<ParticleSystem> {
    let allowed = |k: &Site| spec.in_domain(*k) && !agg.contains(*k) && !(exclude_adjacent && agg.is_face_adjacent(*k));
    let mut sites: Vec<Site> = match law {
        InitialLaw::Uniform { count } => {
            let avail = available_sites(spec, agg, exclude_adjacent)?;
            if *count > avail.len() {
                return Err(Error::OverfullLattice { requested: *count, available: avail.len() });
            }
            rand::seq::index::sample(rng, avail.len(), *count).into_iter().map(|i| avail[i]).collect()
        }
        InitialLaw::Sites(list) => {
            let mut seen = HashSet::new();
            for k in list {
                if !seen.insert(*k) {
                    return Err(Error::DuplicateSite(k.coords(spec.dim).to_vec()));
                }
                if !allowed(k) {
                    return Err(Error::Config(format!("initial site {:?} is not available", k.coords(spec.dim))));
                }
            }
            list.clone()
        }
        InitialLaw::Density { profile, count } => {
            let cands: Vec<Site> = profile.support_sites(spec).into_iter().filter(allowed).collect();
            if *count > cands.len() {
                return Err(Error::OverfullLattice { requested: *count, available: cands.len() });
            }
            // Weighted sampling without replacement: keep the largest keys U^(1/w).
            let mut keyed: Vec<(f64, Site)> = cands
                .into_iter()
                .map(|k| {
                    let w = profile.value(&spec.center(k), spec.dim);
                    let u: f64 = rng.gen::<f64>();
                    (u.ln() / w, k)
                })
                .collect();
            keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite keys").then(a.1.cmp(&b.1)));
            keyed.into_iter().take(*count).map(|(_, k)| k).collect()
        }
        InitialLaw::Bernoulli { profile } => {
            if profile.height > 1.0 {
                return Err(Error::ExclusionInfeasible { x: profile.lo[0], value: profile.height });
            }
            let mut out = Vec::new();
            for k in profile.support_sites(spec).into_iter().filter(allowed) {
                if rng.gen::<f64>() < profile.value(&spec.center(k), spec.dim) {
                    out.push(k);
                }
            }
            out
        }
    };
    sites.shuffle(rng);
    ParticleSystem::new(spec, sites, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::Seed;
    use crate::lattice::Boundary;
    use crate::rng::stream;

    fn box_spec(m: i32) -> LatticeSpec {
        LatticeSpec::with_box(2, m as u32, Site::d2(0, 0), Site::d2(m - 1, m - 1), Boundary::Reflecting).unwrap()
    }

    #[test]
    fn counters_track_hops_and_absorption() {
        let spec = box_spec(4);
        let mut sys = ParticleSystem::new(&spec, vec![Site::d2(0, 0), Site::d2(1, 0), Site::d2(3, 3)], true).unwrap();
        assert_eq!(sys.free_pairs(), 1);
        assert_eq!(sys.degree_sum(), 2 + 3 + 2);
        sys.hop(0, Site::d2(0, 1)).unwrap();
        sys.verify().unwrap();
        assert_eq!(sys.free_pairs(), 0);
        sys.swap(1, 2).unwrap();
        sys.verify().unwrap();
        sys.absorb(1, 0.5).unwrap();
        sys.verify().unwrap();
        assert_eq!(sys.free_count(), 2);
        assert!(sys.hop(0, Site::d2(1, 1)).is_ok());
        assert!(matches!(sys.hop(0, Site::d2(1, 0)), Err(Error::Invariant(_))));
    }

    #[test]
    fn duplicate_and_overfull_rejected() {
        let spec = box_spec(3);
        let agg = Aggregate::new(&spec, Seed::cubes([Site::d2(1, 1)]));
        let mut rng = stream(1, 0);
        let dup = InitialLaw::Sites(vec![Site::d2(0, 0), Site::d2(0, 0)]);
        assert!(matches!(sample_initial(&spec, &agg, &dup, false, &mut rng), Err(Error::DuplicateSite(_))));
        let over = InitialLaw::Uniform { count: 9 };
        assert!(matches!(
            sample_initial(&spec, &agg, &over, false, &mut rng),
            Err(Error::OverfullLattice { requested: 9, available: 8 })
        ));
    }

    #[test]
    fn bernoulli_rejects_dense_profile() {
        let spec = LatticeSpec::new(1, 10).unwrap();
        let agg = Aggregate::new(&spec, Seed::half_space(0, 0));
        let profile = DensityProfile { height: 1.5, lo: [0.0; 3], hi: [1.0, 0.0, 0.0] };
        let mut rng = stream(1, 0);
        let err = sample_initial(&spec, &agg, &InitialLaw::Bernoulli { profile }, false, &mut rng);
        assert!(matches!(err, Err(Error::ExclusionInfeasible { .. })));
    }
}
