//! Bernoulli obstacle environments on finite boxes of `Z^d`.
//!
//! Each site of the box is closed (carries an obstacle) independently with
//! probability `1 - p_open`. The draw for a site is a pure function of
//! `(seed, site)` through a splitmix64 hash chain, so regeneration is
//! bit-identical regardless of machine or thread count.

use bitvec::prelude::{bitvec, BitVec, Lsb0};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{dist2_sq, BoxBounds, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorTag {
    IidBernoulli,
    Planted,
    Loaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedBall {
    pub center: Site,
    pub radius: f64,
}

/// An obstacle configuration on a finite box, stored as a dense bitset in
/// row-major order (`true` = closed).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentField {
    d: usize,
    bounds: BoxBounds,
    closed: BitVec<u64, Lsb0>,
    p_open: f64,
    seed: u64,
    tag: GeneratorTag,
    planted: Option<PlantedBall>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0,1) as a pure function of (seed, site).
fn site_uniform(seed: u64, site: &[i64]) -> f64 {
    let mut h = splitmix64(seed);
    for &c in site {
        h = splitmix64(h ^ (c as u64));
    }
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sample an i.i.d. Bernoulli environment: each site is closed with
/// probability `1 - p_open`, independently under the seeded site hash.
pub fn sample_environment(
    d: usize,
    bounds: BoxBounds,
    p_open: f64,
    seed: u64,
) -> Result<EnvironmentField> {
    if d < 2 {
        return Err(Error::BadDimension(d));
    }
    if !(p_open > 0.0 && p_open < 1.0) {
        return Err(Error::BadProbability(p_open));
    }
    assert_eq!(bounds.d(), d, "box dimension must match d");
    let n = bounds.volume();
    let mut closed = bitvec![u64, Lsb0; 0; n];
    for i in 0..n {
        let x = bounds.site_at(i);
        if site_uniform(seed, &x) >= p_open {
            closed.set(i, true);
        }
    }
    Ok(EnvironmentField {
        d,
        bounds,
        closed,
        p_open,
        seed,
        tag: GeneratorTag::IidBernoulli,
        planted: None,
    })
}

/// Remove every obstacle inside the Euclidean ball `B(center, radius)`,
/// recording the planted region. The ball must fit inside the box.
pub fn plant_vacant_ball(
    env: &EnvironmentField,
    center: &[i64],
    radius: f64,
) -> Result<EnvironmentField> {
    let r_sq = radius * radius;
    let rc = radius.floor() as i64;
    for (axis, &c) in center.iter().enumerate() {
        if c - rc < env.bounds.lo()[axis] || c + rc > env.bounds.hi()[axis] {
            return Err(Error::BallEscapesBox {
                center: center.to_vec(),
                radius,
            });
        }
    }
    let mut out = env.clone();
    let cover =
        crate::lattice::BoxSpec::new(center.to_vec(), rc).to_bounds();
    for x in cover.iter_sites() {
        if dist2_sq(&x, center) <= r_sq {
            let idx = out.bounds.index_of_unchecked(&x);
            out.closed.set(idx, false);
        }
    }
    out.tag = GeneratorTag::Planted;
    out.planted = Some(PlantedBall {
        center: center.to_vec(),
        radius,
    });
    Ok(out)
}

impl EnvironmentField {
    /// Environment with an explicit closed set (tagged `loaded`).
    pub fn from_closed_sites<I>(d: usize, bounds: BoxBounds, closed_sites: I) -> Result<Self>
    where
        I: IntoIterator<Item = Site>,
    {
        let n = bounds.volume();
        let mut closed = bitvec![u64, Lsb0; 0; n];
        for x in closed_sites {
            match bounds.index_of(&x) {
                Some(i) => closed.set(i, true),
                None => return Err(Error::SiteOutsideBox { site: x }),
            }
        }
        Ok(EnvironmentField {
            d,
            bounds,
            closed,
            p_open: 0.5,
            seed: 0,
            tag: GeneratorTag::Loaded,
            planted: None,
        })
    }

    pub fn all_open(d: usize, bounds: BoxBounds) -> Self {
        let n = bounds.volume();
        EnvironmentField {
            d,
            bounds,
            closed: bitvec![u64, Lsb0; 0; n],
            p_open: 0.5,
            seed: 0,
            tag: GeneratorTag::Loaded,
            planted: None,
        }
    }

    pub fn all_closed(d: usize, bounds: BoxBounds) -> Self {
        let n = bounds.volume();
        EnvironmentField {
            d,
            bounds,
            closed: bitvec![u64, Lsb0; 1; n],
            p_open: 0.5,
            seed: 0,
            tag: GeneratorTag::Loaded,
            planted: None,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn p_open(&self) -> f64 {
        self.p_open
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tag(&self) -> GeneratorTag {
        self.tag
    }

    pub fn planted(&self) -> Option<&PlantedBall> {
        self.planted.as_ref()
    }

    pub fn is_closed_idx(&self, idx: usize) -> bool {
        self.closed[idx]
    }

    /// True iff the site lies in the box and is closed.
    pub fn is_closed(&self, x: &[i64]) -> bool {
        self.bounds.index_of(x).map(|i| self.closed[i]).unwrap_or(false)
    }

    /// True iff the site lies in the box and is open. Sites outside the box
    /// are never "open": their obstacle status is unknown.
    pub fn is_open(&self, x: &[i64]) -> bool {
        self.bounds.index_of(x).map(|i| !self.closed[i]).unwrap_or(false)
    }

    pub fn closed_count(&self) -> usize {
        self.closed.count_ones()
    }

    pub fn open_count(&self) -> usize {
        self.bounds.volume() - self.closed_count()
    }

    pub fn closed_sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.closed.iter_ones().map(|i| self.bounds.site_at(i))
    }

    pub fn open_sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.closed.iter_zeros().map(|i| self.bounds.site_at(i))
    }

    /// Copy with the obstacles inside `region` removed.
    pub fn with_obstacles_removed<'a, I>(&self, region: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Site>,
    {
        let mut out = self.clone();
        for x in region {
            match self.bounds.index_of(x) {
                Some(i) => out.closed.set(i, false),
                None => return Err(Error::RegionOutsideBox),
            }
        }
        out.tag = GeneratorTag::Loaded;
        Ok(out)
    }

    /// Copy with every site of `region` closed.
    pub fn with_sites_closed<'a, I>(&self, region: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Site>,
    {
        let mut out = self.clone();
        for x in region {
            match self.bounds.index_of(x) {
                Some(i) => out.closed.set(i, true),
                None => return Err(Error::RegionOutsideBox),
            }
        }
        out.tag = GeneratorTag::Loaded;
        Ok(out)
    }

    /// Number of obstacles in the Euclidean ball `B(center, radius)`,
    /// counted over the part of the ball inside the box.
    pub fn obstacles_in_ball(&self, center: &[i64], radius: f64) -> usize {
        let r_sq = radius * radius;
        let cover = crate::lattice::BoxSpec::new(center.to_vec(), radius.floor() as i64)
            .to_bounds();
        match cover.intersect(&self.bounds) {
            None => 0,
            Some(clip) => clip
                .iter_sites()
                .filter(|x| dist2_sq(x, center) <= r_sq && self.is_closed(x))
                .count(),
        }
    }
}

// ---------------------------------------------------------------------------
// File format
//
// magic "OWENV" + format version byte, a little-endian u32 header length,
// a JSON header record, the row-major bit-packed closed mask (LSB-first
// within each byte, bit set = closed), and a SHA-256 checksum over
// header+payload. The site -> bit RNG is the splitmix64 chain documented
// above; it is part of the format contract so that regeneration from the
// header alone reproduces the payload.
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 5] = b"OWENV";
const FORMAT_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u8,
    d: usize,
    lo: Vec<i64>,
    hi: Vec<i64>,
    p_open: f64,
    seed: u64,
    generator_tag: GeneratorTag,
    rng: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    planted: Option<PlantedBall>,
}

impl EnvironmentField {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            format_version: FORMAT_VERSION,
            d: self.d,
            lo: self.bounds.lo().to_vec(),
            hi: self.bounds.hi().to_vec(),
            p_open: self.p_open,
            seed: self.seed,
            generator_tag: self.tag,
            rng: "splitmix64-site-hash-v1".to_string(),
            planted: self.planted.clone(),
        };
        let header_bytes = serde_json::to_vec(&header).expect("header serializes");
        let n = self.bounds.volume();
        let mut payload = vec![0u8; n.div_ceil(8)];
        for i in self.closed.iter_ones() {
            payload[i / 8] |= 1 << (i % 8);
        }
        let mut out = Vec::with_capacity(5 + 1 + 4 + header_bytes.len() + payload.len() + 32);
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        out.extend_from_slice(&payload);
        let mut hasher = Sha256::new();
        hasher.update(&header_bytes);
        hasher.update(&payload);
        out.extend_from_slice(&hasher.finalize());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |m: &str| Error::Format(m.to_string());
        if bytes.len() < 10 || &bytes[..5] != MAGIC {
            return Err(fail("bad magic"));
        }
        if bytes[5] != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {}",
                bytes[5]
            )));
        }
        let hlen = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let header_end = 10 + hlen;
        if bytes.len() < header_end {
            return Err(fail("truncated header"));
        }
        let header: Header = serde_json::from_slice(&bytes[10..header_end])?;
        let mut bounds = BoxBounds::new(header.lo, header.hi)?;
        bounds.restore_cache();
        let n = bounds.volume();
        let payload_len = n.div_ceil(8);
        if bytes.len() != header_end + payload_len + 32 {
            return Err(fail("truncated payload"));
        }
        let payload = &bytes[header_end..header_end + payload_len];
        let mut hasher = Sha256::new();
        hasher.update(&bytes[10..header_end]);
        hasher.update(payload);
        if hasher.finalize().as_slice() != &bytes[header_end + payload_len..] {
            return Err(fail("checksum mismatch"));
        }
        let mut closed = bitvec![u64, Lsb0; 0; n];
        for i in 0..n {
            if payload[i / 8] & (1 << (i % 8)) != 0 {
                closed.set(i, true);
            }
        }
        Ok(EnvironmentField {
            d: header.d,
            bounds,
            closed,
            p_open: header.p_open,
            seed: header.seed,
            tag: header.generator_tag,
            planted: header.planted,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::euclidean_ball;

    #[test]
    fn p_near_one_forces_all_open() {
        let b = BoxBounds::centered(2, 1);
        let env = sample_environment(2, b, 1.0 - 1e-12, 7).unwrap();
        assert_eq!(env.closed_count(), 0);
    }

    #[test]
    fn p_near_zero_forces_all_closed() {
        let b = BoxBounds::centered(2, 1);
        let env = sample_environment(2, b, 1e-12, 7).unwrap();
        assert_eq!(env.closed_count(), 9);
    }

    #[test]
    fn closed_fraction_within_three_sigma() {
        // 1000x1000 box at p_open = 0.7: |closed|/1e6 within 3 sigma of 0.3
        let b = BoxBounds::new(vec![0, 0], vec![999, 999]).unwrap();
        let env = sample_environment(2, b, 0.7, 42).unwrap();
        let frac = env.closed_count() as f64 / 1e6;
        let sigma = (0.3 * 0.7 / 1e6_f64).sqrt();
        assert!(
            (frac - 0.3).abs() <= 3.0 * sigma,
            "frac = {frac}, sigma = {sigma}"
        );
    }

    #[test]
    fn degenerate_box_and_bad_probability_rejected() {
        assert!(BoxBounds::new(vec![0, 0], vec![-1, 3]).is_err());
        let b = BoxBounds::centered(2, 1);
        assert!(sample_environment(2, b.clone(), 0.0, 1).is_err());
        assert!(sample_environment(2, b.clone(), 1.0, 1).is_err());
        assert!(sample_environment(1, b, 0.5, 1).is_err());
    }

    #[test]
    fn plant_opens_exactly_the_discrete_ball() {
        let b = BoxBounds::centered(2, 10);
        let env = EnvironmentField::all_closed(2, b);
        let planted = plant_vacant_ball(&env, &[0, 0], 3.0).unwrap();
        assert_eq!(planted.open_count(), 29);
        for x in euclidean_ball(&[0, 0], 3.0) {
            assert!(planted.is_open(&x));
        }
        assert_eq!(planted.tag(), GeneratorTag::Planted);
        assert_eq!(planted.planted().unwrap().center, vec![0, 0]);
    }

    #[test]
    fn plant_on_open_env_changes_only_tag() {
        let b = BoxBounds::centered(2, 5);
        let env = EnvironmentField::all_open(2, b);
        let planted = plant_vacant_ball(&env, &[1, 1], 2.0).unwrap();
        assert_eq!(planted.closed_count(), 0);
        assert_eq!(planted.tag(), GeneratorTag::Planted);
    }

    #[test]
    fn plant_removes_single_obstacle_and_is_idempotent() {
        let b = BoxBounds::centered(2, 5);
        let env =
            EnvironmentField::from_closed_sites(2, b, vec![vec![0, 0], vec![4, 4]]).unwrap();
        let once = plant_vacant_ball(&env, &[0, 0], 1.5).unwrap();
        assert!(once.is_open(&[0, 0]));
        assert!(once.is_closed(&[4, 4]));
        let twice = plant_vacant_ball(&once, &[0, 0], 1.5).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn plant_escaping_box_rejected() {
        let b = BoxBounds::centered(2, 3);
        let env = EnvironmentField::all_open(2, b);
        assert!(plant_vacant_ball(&env, &[2, 2], 3.0).is_err());
    }

    #[test]
    fn serialization_is_deterministic_and_round_trips() {
        let b = BoxBounds::centered(2, 8);
        let env = sample_environment(2, b.clone(), 0.7, 9).unwrap();
        let env2 = sample_environment(2, b, 0.7, 9).unwrap();
        assert_eq!(env.to_bytes(), env2.to_bytes());
        let back = EnvironmentField::from_bytes(&env.to_bytes()).unwrap();
        assert_eq!(back, env);
    }

    #[test]
    fn corrupted_checksum_rejected() {
        let b = BoxBounds::centered(2, 4);
        let env = sample_environment(2, b, 0.6, 3).unwrap();
        let mut bytes = env.to_bytes();
        let k = bytes.len() - 40; // somewhere in the payload
        bytes[k] ^= 0x10;
        assert!(matches!(
            EnvironmentField::from_bytes(&bytes),
            Err(Error::Format(_))
        ));
    }
}
