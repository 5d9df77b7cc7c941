//! Lattice primitives: sites, inclusive axis-aligned boxes, `l^oo` boxes
//! `K(v,r)` and discrete Euclidean balls.
//!
//! All boxes are inclusive on every bound; `K(v,r)` is the set
//! `{x : |x - v|_oo <= r}` with exactly `(2r+1)^d` sites.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice site, one coordinate per axis.
pub type Site = Vec<i64>;

/// Walk parity class of a time or a site (coordinate sum mod 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_site(x: &[i64]) -> Parity {
        Self::of_sum(x.iter().sum::<i64>())
    }

    pub fn of_sum(s: i64) -> Parity {
        if s.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn of_time(t: usize) -> Parity {
        if t % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// Parity class reachable from `start` after `t` steps.
    pub fn reachable_from(start: &[i64], t: usize) -> Parity {
        match Parity::of_time(t) {
            Parity::Even => Parity::of_site(start),
            Parity::Odd => Parity::of_site(start).flip(),
        }
    }
}

pub fn l1_dist(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn linf_dist(a: &[i64], b: &[i64]) -> i64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .max()
        .unwrap_or(0)
}

pub fn dist2_sq(a: &[i64], b: &[i64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y) as f64;
            d * d
        })
        .sum()
}

/// Inclusive axis-aligned box `[lo_i, hi_i]` per coordinate with row-major
/// site indexing (last axis fastest).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxBounds {
    lo: Vec<i64>,
    hi: Vec<i64>,
    #[serde(skip)]
    strides: Vec<usize>,
    #[serde(skip)]
    volume: usize,
}

impl BoxBounds {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        assert_eq!(lo.len(), hi.len());
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if h < l {
                return Err(Error::DegenerateBox { axis, lo: l, hi: h });
            }
        }
        let mut b = BoxBounds {
            lo,
            hi,
            strides: Vec::new(),
            volume: 0,
        };
        b.rebuild_strides();
        Ok(b)
    }

    /// `[-r, r]^d`.
    pub fn centered(d: usize, r: i64) -> Self {
        BoxBounds::new(vec![-r; d], vec![r; d]).expect("r >= 0")
    }

    fn rebuild_strides(&mut self) {
        let d = self.lo.len();
        let mut strides = vec![0usize; d];
        let mut vol = 1usize;
        for a in (0..d).rev() {
            strides[a] = vol;
            vol *= (self.hi[a] - self.lo[a] + 1) as usize;
        }
        self.strides = strides;
        self.volume = vol;
    }

    /// Called after deserialization to restore the skipped cached fields.
    pub fn restore_cache(&mut self) {
        self.rebuild_strides();
    }

    pub fn d(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.d()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&c, (&l, &h))| l <= c && c <= h)
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        Some(self.index_of_unchecked(x))
    }

    pub fn index_of_unchecked(&self, x: &[i64]) -> usize {
        x.iter()
            .zip(self.lo.iter().zip(&self.strides))
            .map(|(&c, (&l, &s))| (c - l) as usize * s)
            .sum()
    }

    pub fn site_at(&self, mut idx: usize) -> Site {
        debug_assert!(idx < self.volume);
        let d = self.d();
        let mut x = vec![0i64; d];
        for a in 0..d {
            let s = self.strides[a];
            x[a] = self.lo[a] + (idx / s) as i64;
            idx %= s;
        }
        x
    }

    /// Neighbor of the site with flat index `idx` along `axis` in direction
    /// `dir` (+1/-1), or `None` when it leaves the box.
    pub fn neighbor_index(&self, idx: usize, axis: usize, dir: i64) -> Option<usize> {
        let s = self.strides[axis];
        let span = (self.hi[axis] - self.lo[axis] + 1) as usize;
        let coord = (idx / s) % span;
        if dir > 0 {
            if coord + 1 < span {
                Some(idx + s)
            } else {
                None
            }
        } else if coord > 0 {
            Some(idx - s)
        } else {
            None
        }
    }

    /// Iterate all sites in row-major index order.
    pub fn iter_sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.volume).map(move |i| self.site_at(i))
    }

    /// Intersection with another box, if nonempty.
    pub fn intersect(&self, other: &BoxBounds) -> Option<BoxBounds> {
        let lo: Vec<i64> = self
            .lo
            .iter()
            .zip(&other.lo)
            .map(|(&a, &b)| a.max(b))
            .collect();
        let hi: Vec<i64> = self
            .hi
            .iter()
            .zip(&other.hi)
            .map(|(&a, &b)| a.min(b))
            .collect();
        BoxBounds::new(lo, hi).ok()
    }
}

/// The `l^oo` box `K(v,r)` of eq-style side length `2r+1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxSpec {
    pub center: Site,
    pub radius: i64,
}

impl BoxSpec {
    pub fn new(center: Site, radius: i64) -> Self {
        assert!(radius >= 0);
        BoxSpec { center, radius }
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        linf_dist(&self.center, x) <= self.radius
    }

    pub fn cardinality(&self, d: usize) -> usize {
        (2 * self.radius as usize + 1).pow(d as u32)
    }

    pub fn to_bounds(&self) -> BoxBounds {
        let lo: Vec<i64> = self.center.iter().map(|c| c - self.radius).collect();
        let hi: Vec<i64> = self.center.iter().map(|c| c + self.radius).collect();
        BoxBounds::new(lo, hi).expect("radius >= 0")
    }
}

/// Sites of the discrete Euclidean ball `{x : |x - center|_2 <= radius}`,
/// in row-major order of the covering box.
pub fn euclidean_ball(center: &[i64], radius: f64) -> Vec<Site> {
    assert!(radius >= 0.0, "radius must be nonnegative");
    let r_sq = radius * radius;
    let rc = radius.floor() as i64;
    let cover = BoxSpec::new(center.to_vec(), rc).to_bounds();
    cover
        .iter_sites()
        .filter(|x| dist2_sq(x, center) <= r_sq)
        .collect()
}

/// Outer site boundary `{x in D^c : |x - y|_1 = 1 for some y in D}`.
pub fn outer_boundary<'a, I>(d: usize, sites: I) -> std::collections::HashSet<Site>
where
    I: IntoIterator<Item = &'a Site>,
{
    let set: std::collections::HashSet<&Site> = sites.into_iter().collect();
    let mut boundary = std::collections::HashSet::new();
    for site in &set {
        for axis in 0..d {
            for dir in [-1i64, 1] {
                let mut nb = (*site).clone();
                nb[axis] += dir;
                if !set.contains(&nb) {
                    boundary.insert(nb);
                }
            }
        }
    }
    boundary
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_indexing_round_trips() {
        let b = BoxBounds::new(vec![-2, 0, 3], vec![1, 4, 5]).unwrap();
        assert_eq!(b.volume(), 4 * 5 * 3);
        for i in 0..b.volume() {
            let x = b.site_at(i);
            assert_eq!(b.index_of(&x), Some(i));
        }
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(matches!(
            BoxBounds::new(vec![0, 0], vec![1, -1]),
            Err(Error::DegenerateBox { axis: 1, .. })
        ));
    }

    #[test]
    fn neighbor_index_respects_bounds() {
        let b = BoxBounds::new(vec![0, 0], vec![2, 2]).unwrap();
        let idx = b.index_of(&[0, 0]).unwrap();
        assert_eq!(b.neighbor_index(idx, 0, -1), None);
        assert_eq!(b.neighbor_index(idx, 1, -1), None);
        let up = b.neighbor_index(idx, 0, 1).unwrap();
        assert_eq!(b.site_at(up), vec![1, 0]);
    }

    #[test]
    fn kbox_cardinality() {
        let k = BoxSpec::new(vec![3, -1], 2);
        assert_eq!(k.cardinality(2), 25);
        let sites: Vec<_> = k.to_bounds().iter_sites().collect();
        assert_eq!(sites.len(), 25);
        assert!(sites.iter().all(|x| k.contains(x)));
    }

    #[test]
    fn euclidean_ball_small_counts() {
        // radius 0 -> only the center; radius 1 in d=2 -> center + 4 neighbors
        assert_eq!(euclidean_ball(&[0, 0], 0.0), vec![vec![0, 0]]);
        assert_eq!(euclidean_ball(&[0, 0], 1.0).len(), 5);
        // direct enumeration of {x : x1^2 + x2^2 <= 9} gives 29 sites
        assert_eq!(euclidean_ball(&[0, 0], 3.0).len(), 29);
    }

    #[test]
    fn euclidean_ball_inside_covering_kbox() {
        let c = vec![2, -3];
        let r = 4.7f64;
        let k = BoxSpec::new(c.clone(), r.ceil() as i64);
        for x in euclidean_ball(&c, r) {
            assert!(k.contains(&x));
        }
    }

    #[test]
    fn parity_flip_and_reachability() {
        assert_eq!(Parity::of_site(&[1, 2]), Parity::Odd);
        assert_eq!(Parity::reachable_from(&[0, 0], 3), Parity::Odd);
        assert_eq!(Parity::reachable_from(&[1, 0], 3), Parity::Even);
    }
}
