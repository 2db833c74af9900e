//! Site-indexed storage: dense arrays inside a finite box, hash maps elsewhere.

use std::collections::HashMap;

use crate::lattice::{LatticeSpec, Site};

const EMPTY: u32 = u32::MAX;

/// Map from a site to the id of the particle occupying it.
#[derive(Clone, Debug)]
pub enum Occupancy {
    Dense { spec: LatticeSpec, cells: Vec<u32> },
    Sparse(HashMap<Site, u32>),
}

impl Occupancy {
    /// Dense storage when particles cannot leave the box, sparse otherwise.
    pub fn for_spec(spec: &LatticeSpec) -> Self {
        match (spec.site_count(), spec.boundary) {
            (Some(count), crate::lattice::Boundary::Reflecting) => {
                Occupancy::Dense { spec: spec.clone(), cells: vec![EMPTY; count] }
            }
            _ => Occupancy::Sparse(HashMap::new()),
        }
    }

    #[inline]
    pub fn get(&self, site: Site) -> Option<u32> {
        match self {
            Occupancy::Dense { spec, cells } => {
                let id = cells[spec.dense_index(site)?];
                (id != EMPTY).then_some(id)
            }
            Occupancy::Sparse(map) => map.get(&site).copied(),
        }
    }

    #[inline]
    pub fn is_occupied(&self, site: Site) -> bool {
        self.get(site).is_some()
    }

    /// Returns the previous occupant, if any.
    pub fn insert(&mut self, site: Site, id: u32) -> Option<u32> {
        match self {
            Occupancy::Dense { spec, cells } => {
                let idx = spec.dense_index(site).expect("site outside dense occupancy box");
                let prev = std::mem::replace(&mut cells[idx], id);
                (prev != EMPTY).then_some(prev)
            }
            Occupancy::Sparse(map) => map.insert(site, id),
        }
    }

    pub fn remove(&mut self, site: Site) -> Option<u32> {
        match self {
            Occupancy::Dense { spec, cells } => {
                let idx = spec.dense_index(site)?;
                let prev = std::mem::replace(&mut cells[idx], EMPTY);
                (prev != EMPTY).then_some(prev)
            }
            Occupancy::Sparse(map) => map.remove(&site),
        }
    }
}
