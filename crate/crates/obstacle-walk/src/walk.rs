//! Exact and Monte Carlo dynamics of the simple random walk killed on
//! obstacles.
//!
//! The mass profile `u(t,x) = P(S_t = x, tau > t)` solves the discrete
//! parabolic system `u(n+1,x) = (1/2d) sum_{y~x} u(n,y)` on open,
//! non-absorbing sites, with `u = 0` on the rest. The working box is the
//! environment box; mass stepping outside it is absorbed and reported
//! separately so the truncation is observable.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashSet;

use crate::domain::LatticeDomain;
use crate::env::EnvironmentField;
use crate::error::{Error, Result};
use crate::lattice::{BoxBounds, Parity, Site};

const OUTSIDE: u32 = u32::MAX;
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum
    }
}

fn kahan_sum(v: &[f64]) -> f64 {
    let mut k = Kahan::default();
    for &x in v {
        k.add(x);
    }
    k.value()
}

/// Mass distribution of the killed walk at a fixed time.
#[derive(Debug, Clone)]
pub struct MassProfile {
    pub bounds: BoxBounds,
    pub t: usize,
    /// Row-major over the box.
    pub u: Vec<f64>,
    pub total_mass: f64,
    pub start: Site,
    /// Parity class of the support relative to the start.
    pub parity: Parity,
}

impl MassProfile {
    pub fn value(&self, x: &[i64]) -> f64 {
        self.bounds.index_of(x).map(|i| self.u[i]).unwrap_or(0.0)
    }

    /// Normalize to total mass one (in place).
    pub fn normalize(&mut self) -> Result<()> {
        if self.total_mass <= 0.0 {
            return Err(Error::ZeroProbabilityConditioning);
        }
        let inv = 1.0 / self.total_mass;
        for v in &mut self.u {
            *v *= inv;
        }
        self.total_mass = 1.0;
        Ok(())
    }

    /// Total variation distance to another profile over the same box.
    pub fn tv_distance(&self, other: &MassProfile) -> f64 {
        assert_eq!(self.bounds, other.bounds);
        0.5 * self
            .u
            .iter()
            .zip(&other.u)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Precomputed stencil over the environment box: neighbor table plus
/// per-site counts of dead transitions, split by kind.
struct BoxStencil {
    n: usize,
    two_d: usize,
    inv2d: f64,
    nbr: Vec<u32>,
    alive: Vec<bool>,
    into_kill: Vec<u8>,
    into_target: Vec<u8>,
    into_boundary: Vec<u8>,
}

impl BoxStencil {
    fn build(env: &EnvironmentField, absorbing: &HashSet<usize>, target: &HashSet<usize>) -> Self {
        let bounds = env.bounds();
        let d = env.d();
        let n = bounds.volume();
        let two_d = 2 * d;
        let mut nbr = vec![OUTSIDE; n * two_d];
        let mut alive = vec![false; n];
        for i in 0..n {
            alive[i] =
                !env.is_closed_idx(i) && !absorbing.contains(&i) && !target.contains(&i);
            for axis in 0..d {
                for (k, dir) in [-1i64, 1].into_iter().enumerate() {
                    if let Some(j) = bounds.neighbor_index(i, axis, dir) {
                        nbr[i * two_d + 2 * axis + k] = j as u32;
                    }
                }
            }
        }
        let mut into_kill = vec![0u8; n];
        let mut into_target = vec![0u8; n];
        let mut into_boundary = vec![0u8; n];
        for i in 0..n {
            for k in 0..two_d {
                let j = nbr[i * two_d + k];
                if j == OUTSIDE {
                    into_boundary[i] += 1;
                } else {
                    let j = j as usize;
                    if target.contains(&j) {
                        into_target[i] += 1;
                    } else if !alive[j] {
                        into_kill[i] += 1;
                    }
                }
            }
        }
        BoxStencil {
            n,
            two_d,
            inv2d: 1.0 / two_d as f64,
            nbr,
            alive,
            into_kill,
            into_target,
            into_boundary,
        }
    }

    fn step(&self, old: &[f64], new: &mut [f64]) {
        let two_d = self.two_d;
        let inv = self.inv2d;
        let body = |(i, o): (usize, &mut f64)| {
            if !self.alive[i] {
                *o = 0.0;
                return;
            }
            let mut acc = 0.0;
            for k in 0..two_d {
                let j = self.nbr[i * two_d + k];
                if j != OUTSIDE {
                    acc += old[j as usize];
                }
            }
            *o = acc * inv;
        };
        if self.n >= PAR_THRESHOLD {
            new.par_iter_mut().enumerate().for_each(body);
        } else {
            new.iter_mut().enumerate().for_each(body);
        }
    }

    /// Mass absorbed during a step from `old`, by kind:
    /// (obstacles/absorbing, target, box boundary).
    fn absorbed(&self, old: &[f64]) -> (f64, f64, f64) {
        let mut kill = Kahan::default();
        let mut target = Kahan::default();
        let mut boundary = Kahan::default();
        for i in 0..self.n {
            let m = old[i];
            if m == 0.0 {
                continue;
            }
            if self.into_kill[i] > 0 {
                kill.add(m * self.into_kill[i] as f64 * self.inv2d);
            }
            if self.into_target[i] > 0 {
                target.add(m * self.into_target[i] as f64 * self.inv2d);
            }
            if self.into_boundary[i] > 0 {
                boundary.add(m * self.into_boundary[i] as f64 * self.inv2d);
            }
        }
        (kill.value(), target.value(), boundary.value())
    }
}

/// Fused two-step kernel `P^2` acting within one parity class: per target
/// site, the sources two hops away with path multiplicities. Halves the
/// number of passes over the grid for long parity-consistent evolutions.
struct TwoStepStencil {
    n: usize,
    inv2d_sq: f64,
    src: Vec<(u32, u8)>,
    off: Vec<u32>,
    alive: Vec<bool>,
    /// Per source: probability of being absorbed within two steps, split as
    /// (kill, boundary). Boundary mass re-entering is impossible.
    kill2: Vec<f64>,
    boundary2: Vec<f64>,
}

impl TwoStepStencil {
    fn build(one: &BoxStencil) -> Self {
        let n = one.n;
        let two_d = one.two_d;
        let inv2d = one.inv2d;
        let mut src = Vec::new();
        let mut off = Vec::with_capacity(n + 1);
        off.push(0u32);
        let mut counts: std::collections::HashMap<u32, u8> = std::collections::HashMap::new();
        for i in 0..n {
            if one.alive[i] {
                counts.clear();
                for k in 0..two_d {
                    let w = one.nbr[i * two_d + k];
                    if w == OUTSIDE || !one.alive[w as usize] {
                        continue;
                    }
                    let w = w as usize;
                    for k2 in 0..two_d {
                        let j = one.nbr[w * two_d + k2];
                        if j != OUTSIDE && one.alive[j as usize] {
                            *counts.entry(j).or_insert(0) += 1;
                        }
                    }
                }
                let mut entries: Vec<(u32, u8)> = counts.iter().map(|(&j, &c)| (j, c)).collect();
                entries.sort_unstable();
                src.extend_from_slice(&entries);
            }
            off.push(src.len() as u32);
        }
        let mut kill2 = vec![0.0; n];
        let mut boundary2 = vec![0.0; n];
        for j in 0..n {
            if !one.alive[j] {
                continue;
            }
            let mut k = one.into_kill[j] as f64 * inv2d;
            let mut b = one.into_boundary[j] as f64 * inv2d;
            for kk in 0..two_d {
                let w = one.nbr[j * two_d + kk];
                if w != OUTSIDE && one.alive[w as usize] {
                    let w = w as usize;
                    k += one.into_kill[w] as f64 * inv2d * inv2d;
                    b += one.into_boundary[w] as f64 * inv2d * inv2d;
                }
            }
            kill2[j] = k;
            boundary2[j] = b;
        }
        TwoStepStencil {
            n,
            inv2d_sq: inv2d * inv2d,
            src,
            off,
            alive: one.alive.clone(),
            kill2,
            boundary2,
        }
    }

    fn step(&self, old: &[f64], new: &mut [f64]) {
        let body = |(i, o): (usize, &mut f64)| {
            if !self.alive[i] {
                *o = 0.0;
                return;
            }
            let mut acc = 0.0;
            for &(j, c) in &self.src[self.off[i] as usize..self.off[i + 1] as usize] {
                acc += old[j as usize] * c as f64;
            }
            *o = acc * self.inv2d_sq;
        };
        if self.n >= PAR_THRESHOLD {
            new.par_iter_mut().enumerate().for_each(body);
        } else {
            new.iter_mut().enumerate().for_each(body);
        }
    }

    fn absorbed(&self, old: &[f64]) -> (f64, f64) {
        let mut kill = Kahan::default();
        let mut boundary = Kahan::default();
        for i in 0..self.n {
            let m = old[i];
            if m == 0.0 {
                continue;
            }
            kill.add(m * self.kill2[i]);
            boundary.add(m * self.boundary2[i]);
        }
        (kill.value(), boundary.value())
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvolveOptions {
    /// Extra absorbing sites on top of the obstacles.
    pub absorbing: Vec<Site>,
    /// Times at which to keep a full profile (always includes `t_max`).
    pub snapshots: Vec<usize>,
    /// Evolve by the fused `P^2` kernel (requires even `t_max` and even
    /// snapshot times).
    pub two_step: bool,
}

#[derive(Debug, Clone)]
pub struct EvolveResult {
    pub profiles: Vec<MassProfile>,
    /// `P(tau > t_max, walk stayed in the box)`.
    pub final_total: f64,
    /// Mass absorbed by obstacles and the explicit absorbing set.
    pub killed_mass: f64,
    /// Mass lost over the box boundary (truncation, reported not hidden).
    pub boundary_mass: f64,
}

pub fn evolve_mass(
    env: &EnvironmentField,
    start: &[i64],
    t_max: usize,
    options: &EvolveOptions,
) -> Result<EvolveResult> {
    let bounds = env.bounds();
    let start_idx = bounds
        .index_of(start)
        .ok_or_else(|| Error::SiteOutsideBox { site: start.to_vec() })?;
    if env.is_closed_idx(start_idx) {
        return Err(Error::StartClosed { site: start.to_vec() });
    }
    let mut absorbing = HashSet::new();
    for x in &options.absorbing {
        if let Some(i) = bounds.index_of(x) {
            absorbing.insert(i);
        }
    }
    if absorbing.contains(&start_idx) {
        return Err(Error::StartClosed { site: start.to_vec() });
    }
    let stencil = BoxStencil::build(env, &absorbing, &HashSet::new());
    let n = stencil.n;

    let mut want: Vec<usize> = options.snapshots.clone();
    want.push(t_max);
    want.sort_unstable();
    want.dedup();
    if want.iter().any(|&t| t > t_max) {
        return Err(Error::BadParameter {
            name: "snapshots",
            value: *want.last().unwrap() as f64,
            range: "<= t_max",
        });
    }
    if options.two_step && want.iter().any(|&t| t % 2 != 0) {
        return Err(Error::BadParameter {
            name: "snapshots",
            value: 0.0,
            range: "even times under the two-step kernel",
        });
    }

    let mut u = vec![0.0; n];
    u[start_idx] = 1.0;
    let mut scratch = vec![0.0; n];
    let mut killed = Kahan::default();
    let mut boundary = Kahan::default();
    let mut profiles = Vec::with_capacity(want.len());
    let snap = |u: &[f64], t: usize| MassProfile {
        bounds: bounds.clone(),
        t,
        u: u.to_vec(),
        total_mass: kahan_sum(u),
        start: start.to_vec(),
        parity: Parity::reachable_from(start, t),
    };
    if want.first() == Some(&0) {
        profiles.push(snap(&u, 0));
    }

    if options.two_step {
        let two = TwoStepStencil::build(&stencil);
        let mut t = 0usize;
        while t < t_max {
            let (k, b) = two.absorbed(&u);
            killed.add(k);
            boundary.add(b);
            two.step(&u, &mut scratch);
            std::mem::swap(&mut u, &mut scratch);
            t += 2;
            if want.binary_search(&t).is_ok() {
                profiles.push(snap(&u, t));
            }
        }
    } else {
        for t in 1..=t_max {
            let (k, tg, b) = stencil.absorbed(&u);
            killed.add(k + tg);
            boundary.add(b);
            stencil.step(&u, &mut scratch);
            std::mem::swap(&mut u, &mut scratch);
            if want.binary_search(&t).is_ok() {
                profiles.push(snap(&u, t));
            }
        }
    }

    let final_total = kahan_sum(&u);
    Ok(EvolveResult {
        profiles,
        final_total,
        killed_mass: killed.value(),
        boundary_mass: boundary.value(),
    })
}

/// `P(tau > n)` for the walk started at `start` (exact, within the box).
pub fn survival_probability(env: &EnvironmentField, start: &[i64], n: usize) -> Result<f64> {
    let res = evolve_mass(env, start, n, &EvolveOptions::default())?;
    Ok(res.final_total)
}

/// Conditioning event of [`conditional_law`].
#[derive(Debug, Clone)]
pub enum Condition {
    /// Law at time `t` given survival to `t`.
    SurviveTo,
    /// Law at time `t` given the walk stays in the region through time `m`
    /// (`t <= m`); computed as forward mass at `t` times backward survival
    /// mass over `m - t` steps, normalized.
    StayIn { region: Vec<Site>, m: usize },
}

pub fn conditional_law(
    env: &EnvironmentField,
    start: &[i64],
    t: usize,
    condition: &Condition,
) -> Result<MassProfile> {
    match condition {
        Condition::SurviveTo => {
            let res = evolve_mass(env, start, t, &EvolveOptions::default())?;
            let mut prof = res.profiles.into_iter().last().expect("t_max profile");
            prof.normalize()?;
            Ok(prof)
        }
        Condition::StayIn { region, m } => {
            if t > *m {
                return Err(Error::BadParameter {
                    name: "t",
                    value: t as f64,
                    range: "<= m",
                });
            }
            let open_region: Vec<Site> = region
                .iter()
                .filter(|x| env.is_open(x))
                .cloned()
                .collect();
            let dom = LatticeDomain::from_sites(env.d(), open_region)
                .map_err(|_| Error::ZeroProbabilityConditioning)?;
            let s = dom
                .index_of(start)
                .ok_or(Error::ZeroProbabilityConditioning)?;
            let mut fwd = vec![0.0; dom.len()];
            fwd[s] = 1.0;
            let mut scratch = vec![0.0; dom.len()];
            for _ in 0..t {
                dom.apply_p(&fwd, &mut scratch);
                std::mem::swap(&mut fwd, &mut scratch);
            }
            let mut bwd = vec![1.0; dom.len()];
            for _ in 0..(*m - t) {
                dom.apply_p(&bwd, &mut scratch);
                std::mem::swap(&mut bwd, &mut scratch);
            }
            let bounds = env.bounds().clone();
            let mut u = vec![0.0; bounds.volume()];
            for i in 0..dom.len() {
                let w = fwd[i] * bwd[i];
                if w != 0.0 {
                    u[bounds.index_of_unchecked(dom.site(i))] = w;
                }
            }
            let mut prof = MassProfile {
                total_mass: kahan_sum(&u),
                bounds,
                t,
                u,
                start: start.to_vec(),
                parity: Parity::reachable_from(start, t),
            };
            prof.normalize()?;
            Ok(prof)
        }
    }
}

/// One sampled killed-walk trajectory. Sites are stored flattened
/// (`d` coordinates per time step).
#[derive(Debug, Clone)]
pub struct WalkPathSample {
    pub d: usize,
    path: Vec<i64>,
    /// Time of hitting an obstacle, if any (the path includes that site).
    pub killed_at: Option<usize>,
    /// Time of first stepping outside the working box, if any (the path
    /// stops just before; the exit site is not representable in the box).
    pub left_box_at: Option<usize>,
    /// ChaCha stream index used for this sample.
    pub stream: u64,
}

impl WalkPathSample {
    pub fn site_at(&self, k: usize) -> &[i64] {
        &self.path[k * self.d..(k + 1) * self.d]
    }

    /// Number of recorded positions (time runs `0..n_positions`).
    pub fn n_positions(&self) -> usize {
        self.path.len() / self.d
    }

    pub fn survived(&self) -> bool {
        self.killed_at.is_none() && self.left_box_at.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct PathSampleStats {
    pub samples: Vec<WalkPathSample>,
    pub n_samples: usize,
    pub survived: usize,
    pub survival_estimate: f64,
    pub std_error: f64,
}

/// Sample `n_samples` independent killed-walk trajectories of length `n`.
/// Sample `i` draws from ChaCha8 stream `i` of the given seed, so the
/// output is independent of the parallel schedule.
pub fn sample_paths(
    env: &EnvironmentField,
    start: &[i64],
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<PathSampleStats> {
    if !env.is_open(start) {
        return Err(Error::StartClosed { site: start.to_vec() });
    }
    let d = env.d();
    let samples: Vec<WalkPathSample> = (0..n_samples as u64)
        .into_par_iter()
        .map(|stream| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut path = Vec::with_capacity((n + 1) * d);
            let mut pos = start.to_vec();
            path.extend_from_slice(&pos);
            let mut killed_at = None;
            let mut left_box_at = None;
            for t in 1..=n {
                let dir = rng.gen_range(0..2 * d);
                let axis = dir / 2;
                let sign = if dir % 2 == 0 { 1 } else { -1 };
                pos[axis] += sign;
                if !env.bounds().contains(&pos) {
                    left_box_at = Some(t);
                    break;
                }
                path.extend_from_slice(&pos);
                if env.is_closed(&pos) {
                    killed_at = Some(t);
                    break;
                }
            }
            WalkPathSample {
                d,
                path,
                killed_at,
                left_box_at,
                stream,
            }
        })
        .collect();
    let survived = samples.iter().filter(|s| s.survived()).count();
    let p = survived as f64 / n_samples as f64;
    Ok(PathSampleStats {
        n_samples,
        survived,
        survival_estimate: p,
        std_error: (p * (1.0 - p) / n_samples as f64).sqrt(),
        samples,
    })
}

/// First hitting time of `target` along a sampled path.
pub fn path_hitting_time(sample: &WalkPathSample, target: &HashSet<Site>) -> Option<usize> {
    (0..sample.n_positions()).find(|&k| target.contains(sample.site_at(k)))
}

#[derive(Debug, Clone)]
pub struct HittingDistribution {
    /// `prob_by_time[t] = P(tau_target = t, tau_obstacles > t)`.
    pub prob_by_time: Vec<f64>,
    /// `P(tau_target <= horizon, before dying)`.
    pub p_hit: f64,
    /// Mass still alive, unhit and in the box at the horizon.
    pub p_alive_not_hit: f64,
}

/// Distribution of the first hitting time of `target` within `horizon`
/// steps, via evolution with `target` absorbing. The walk still dies on
/// obstacles; "never within horizon" shows up as `p_hit < 1`.
pub fn hitting_distribution(
    env: &EnvironmentField,
    start: &[i64],
    target: &[Site],
    horizon: usize,
) -> Result<HittingDistribution> {
    if target.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let bounds = env.bounds();
    let start_idx = bounds
        .index_of(start)
        .ok_or_else(|| Error::SiteOutsideBox { site: start.to_vec() })?;
    if env.is_closed_idx(start_idx) {
        return Err(Error::StartClosed { site: start.to_vec() });
    }
    let target_idx: HashSet<usize> = target
        .iter()
        .filter_map(|x| bounds.index_of(x))
        .collect();
    let mut prob_by_time = vec![0.0; horizon + 1];
    if target_idx.contains(&start_idx) {
        prob_by_time[0] = 1.0;
        return Ok(HittingDistribution {
            prob_by_time,
            p_hit: 1.0,
            p_alive_not_hit: 0.0,
        });
    }
    let stencil = BoxStencil::build(env, &HashSet::new(), &target_idx);
    let mut u = vec![0.0; stencil.n];
    u[start_idx] = 1.0;
    let mut scratch = vec![0.0; stencil.n];
    let mut hit = Kahan::default();
    for t in 1..=horizon {
        let (_, tg, _) = stencil.absorbed(&u);
        prob_by_time[t] = tg;
        hit.add(tg);
        stencil.step(&u, &mut scratch);
        std::mem::swap(&mut u, &mut scratch);
    }
    Ok(HittingDistribution {
        prob_by_time,
        p_hit: hit.value(),
        p_alive_not_hit: kahan_sum(&u),
    })
}

/// `P^x(tau_{A^c} > t)` for every `x` of the domain: the ones vector
/// evolved `t` steps by `P|_A`.
pub fn survival_vector(domain: &LatticeDomain, t: usize) -> Vec<f64> {
    let mut v = vec![1.0; domain.len()];
    let mut scratch = vec![0.0; domain.len()];
    for _ in 0..t {
        domain.apply_p(&v, &mut scratch);
        std::mem::swap(&mut v, &mut scratch);
    }
    v
}
