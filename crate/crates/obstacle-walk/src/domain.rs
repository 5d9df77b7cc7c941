//! Finite lattice domains and the killed-walk transition operator `P|_A`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::label_clusters;
use crate::env::EnvironmentField;
use crate::error::{Error, Result};
use crate::lattice::{dist2_sq, Parity, Site};

/// Split the its rows across threads only above this size.
const PAR_THRESHOLD: usize = 1 << 14;

/// A finite set of open sites with a site <-> index bijection. Applying the
/// operator sums neighbor values inside the set times `1/(2d)`; everything
/// outside is absorbing.
#[derive(Debug, Clone)]
pub struct LatticeDomain {
    d: usize,
    sites: Vec<Site>,
    index: HashMap<Site, u32>,
    /// CSR adjacency: neighbors of site i are `adj[adj_off[i]..adj_off[i+1]]`.
    adj: Vec<u32>,
    adj_off: Vec<u32>,
    parity_even: Vec<bool>,
}

/// How to carve a domain out of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSpec {
    /// All open sites of the box.
    WholeBox,
    /// Open sites within the Euclidean ball.
    Ball { center: Site, radius: f64 },
    /// The open cluster containing `site`.
    OpenClusterOf { site: Site },
}

impl DomainSpec {
    pub fn resolve(&self, env: &EnvironmentField) -> Result<LatticeDomain> {
        match self {
            DomainSpec::WholeBox => LatticeDomain::from_sites(env.d(), env.open_sites()),
            DomainSpec::Ball { center, radius } => {
                let r_sq = radius * radius;
                LatticeDomain::from_sites(
                    env.d(),
                    env.open_sites()
                        .filter(|x| dist2_sq(x, center) <= r_sq),
                )
            }
            DomainSpec::OpenClusterOf { site } => {
                let lab = label_clusters(env);
                let id = lab
                    .cluster_of(env, site)
                    .ok_or_else(|| Error::StartClosed { site: site.clone() })?;
                LatticeDomain::from_sites(env.d(), lab.cluster_sites(env, id))
            }
        }
    }
}

impl LatticeDomain {
    /// Build from a set of sites (deduplicated, sorted lexicographically so
    /// the indexing is deterministic).
    pub fn from_sites<I>(d: usize, sites: I) -> Result<Self>
    where
        I: IntoIterator<Item = Site>,
    {
        let mut sites: Vec<Site> = sites.into_iter().collect();
        sites.sort_unstable();
        sites.dedup();
        if sites.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let index: HashMap<Site, u32> = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let mut adj = Vec::new();
        let mut adj_off = Vec::with_capacity(sites.len() + 1);
        adj_off.push(0u32);
        let mut nb = vec![0i64; d];
        for s in &sites {
            for axis in 0..d {
                nb.clone_from_slice(s);
                for dir in [-1i64, 1] {
                    nb[axis] = s[axis] + dir;
                    if let Some(&j) = index.get(&nb) {
                        adj.push(j);
                    }
                }
                nb[axis] = s[axis];
            }
            adj_off.push(adj.len() as u32);
        }
        let parity_even = sites
            .iter()
            .map(|s| Parity::of_site(s) == Parity::Even)
            .collect();
        Ok(LatticeDomain {
            d,
            sites,
            index,
            adj,
            adj_off,
            parity_even,
        })
    }

    /// The exactly vacant discrete Euclidean ball as a domain.
    pub fn vacant_ball(d: usize, center: &[i64], radius: f64) -> Result<Self> {
        Self::from_sites(d, crate::lattice::euclidean_ball(center, radius))
    }

    /// Domain minus a set of sites.
    pub fn without(&self, removed: &[Site]) -> Result<Self> {
        let removed: std::collections::HashSet<&Site> = removed.iter().collect();
        Self::from_sites(
            self.d,
            self.sites.iter().filter(|s| !removed.contains(s)).cloned(),
        )
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        self.index.get(x).map(|&i| i as usize)
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.index.contains_key(x)
    }

    pub fn neighbors_of(&self, i: usize) -> &[u32] {
        &self.adj[self.adj_off[i] as usize..self.adj_off[i + 1] as usize]
    }

    pub fn is_even(&self, i: usize) -> bool {
        self.parity_even[i]
    }

    pub fn parity_of(&self, i: usize) -> Parity {
        if self.parity_even[i] {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn even_count(&self) -> usize {
        self.parity_even.iter().filter(|&&e| e).count()
    }

    /// `out = P|_A v`: `out[i] = (1/2d) * sum of v over neighbors of i`.
    pub fn apply_p(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.len());
        debug_assert_eq!(out.len(), self.len());
        let inv = 1.0 / (2.0 * self.d as f64);
        let body = |(i, o): (usize, &mut f64)| {
            let mut acc = 0.0;
            for &j in self.neighbors_of(i) {
                acc += v[j as usize];
            }
            *o = acc * inv;
        };
        if self.len() >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(i, o)| body((i, o)));
        } else {
            out.iter_mut().enumerate().for_each(body);
        }
    }

    /// Connected components as index lists, in order of their smallest site.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut queue = std::collections::VecDeque::from([s as u32]);
            seen[s] = true;
            let mut comp = Vec::new();
            while let Some(i) = queue.pop_front() {
                comp.push(i);
                for &j in self.neighbors_of(i as usize) {
                    if !seen[j as usize] {
                        seen[j as usize] = true;
                        queue.push_back(j);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// The restriction of this domain to one component.
    pub fn component_domain(&self, comp: &[u32]) -> LatticeDomain {
        Self::from_sites(
            self.d,
            comp.iter().map(|&i| self.sites[i as usize].clone()),
        )
        .expect("component is nonempty")
    }
}
