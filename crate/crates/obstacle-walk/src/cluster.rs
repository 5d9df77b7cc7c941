//! Open-cluster structure of an environment via union-find.

use crate::env::EnvironmentField;
use crate::lattice::Site;

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Connected components of the open-site graph under nearest-neighbor
/// adjacency. Cluster ids are dense, assigned in row-major order of the
/// first site seen in each cluster.
#[derive(Debug, Clone)]
pub struct ClusterLabeling {
    /// Per box index: cluster id of an open site, `None` if closed.
    label: Vec<Option<u32>>,
    sizes: Vec<usize>,
    origin_cluster: Option<u32>,
    spanning: Vec<bool>,
}

pub fn label_clusters(env: &EnvironmentField) -> ClusterLabeling {
    let bounds = env.bounds();
    let d = env.d();
    let n = bounds.volume();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        if env.is_closed_idx(i) {
            continue;
        }
        // union with the +axis neighbor only; the -axis pair is covered
        // when that site is visited
        for axis in 0..d {
            if let Some(j) = bounds.neighbor_index(i, axis, 1) {
                if !env.is_closed_idx(j) {
                    uf.union(i as u32, j as u32);
                }
            }
        }
    }

    let mut label = vec![None; n];
    let mut root_to_id: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
    let mut sizes: Vec<usize> = Vec::new();
    // per cluster and axis: does it touch the lo face / the hi face
    let mut lo_touch: Vec<Vec<bool>> = Vec::new();
    let mut hi_touch: Vec<Vec<bool>> = Vec::new();
    for i in 0..n {
        if env.is_closed_idx(i) {
            continue;
        }
        let root = uf.find(i as u32);
        let id = *root_to_id.entry(root).or_insert_with(|| {
            sizes.push(0);
            lo_touch.push(vec![false; d]);
            hi_touch.push(vec![false; d]);
            (sizes.len() - 1) as u32
        });
        label[i] = Some(id);
        sizes[id as usize] += 1;
        let x = bounds.site_at(i);
        for axis in 0..d {
            if x[axis] == bounds.lo()[axis] {
                lo_touch[id as usize][axis] = true;
            }
            if x[axis] == bounds.hi()[axis] {
                hi_touch[id as usize][axis] = true;
            }
        }
    }
    let spanning = lo_touch
        .iter()
        .zip(&hi_touch)
        .map(|(lo, hi)| lo.iter().zip(hi).any(|(&l, &h)| l && h))
        .collect();

    let origin = vec![0i64; d];
    let origin_cluster = bounds
        .index_of(&origin)
        .and_then(|i| label[i]);

    ClusterLabeling {
        label,
        sizes,
        origin_cluster,
        spanning,
    }
}

impl ClusterLabeling {
    pub fn cluster_of(&self, env: &EnvironmentField, x: &[i64]) -> Option<u32> {
        env.bounds().index_of(x).and_then(|i| self.label[i])
    }

    pub fn cluster_of_idx(&self, idx: usize) -> Option<u32> {
        self.label[idx]
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, id: u32) -> usize {
        self.sizes[id as usize]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn origin_cluster(&self) -> Option<u32> {
        self.origin_cluster
    }

    /// True iff the cluster touches two opposite faces of the box along
    /// some axis.
    pub fn is_spanning(&self, id: u32) -> bool {
        self.spanning[id as usize]
    }

    pub fn largest_cluster(&self) -> Option<u32> {
        (0..self.sizes.len() as u32).max_by_key(|&id| self.sizes[id as usize])
    }

    /// The environment is accepted as a typical sample of the conditioned
    /// law when the origin's cluster spans the box (finite-box surrogate
    /// for conditioning on the infinite cluster).
    pub fn origin_spans(&self) -> bool {
        self.origin_cluster.map(|id| self.is_spanning(id)).unwrap_or(false)
    }

    /// Sites of one cluster, in row-major order.
    pub fn cluster_sites(&self, env: &EnvironmentField, id: u32) -> Vec<Site> {
        let bounds = env.bounds();
        (0..bounds.volume())
            .filter(|&i| self.label[i] == Some(id))
            .map(|i| bounds.site_at(i))
            .collect()
    }
}
