//! Planar network layout: one base station, a row of mobile relays and
//! uniformly scattered users, each served by a device chosen by distance.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Index of the base station in every device-indexed vector.
pub const BS_INDEX: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Device and user geometry plus the user-to-device association.
///
/// Device index 0 is the base station, indices `1..=rnum` are the relays
/// in left-to-right order.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub area_side: f64,
    pub bs_position: Point2D,
    pub mr_positions: Vec<Point2D>,
    pub users: Vec<Point2D>,
    pub association: Vec<usize>,
    pub seed: u64,
}

/// Places the base station above the area centre and `rnum` relays evenly on
/// a horizontal rail line below it, spanning `[area/10, 9 area/10]`.
pub fn build_layout(
    area_side: f64,
    rnum: usize,
    bs_offset: f64,
    rail_offset: f64,
) -> Result<(Point2D, Vec<Point2D>)> {
    if !(area_side.is_finite() && area_side > 0.0) {
        return Err(Error::InvalidArgument("area side must be positive"));
    }
    if rnum == 0 {
        return Err(Error::InvalidArgument("at least one relay is required"));
    }
    let half = area_side / 2.0;
    for off in [bs_offset, rail_offset] {
        if !(off.is_finite() && off >= 0.0 && off < half) {
            return Err(Error::InvalidArgument(
                "offsets must lie in [0, area_side / 2)",
            ));
        }
    }
    let bs = Point2D::new(half, half + bs_offset);
    let y = half - rail_offset;
    let mrs = if rnum == 1 {
        alloc::vec![Point2D::new(half, y)]
    } else {
        let left = area_side / 10.0;
        let span = 0.8 * area_side;
        (0..rnum)
            .map(|i| Point2D::new(left + span * i as f64 / (rnum - 1) as f64, y))
            .collect()
    };
    Ok((bs, mrs))
}

/// Draws `m` users i.i.d. uniform on `[0, area_side]^2`.
pub fn place_users(area_side: f64, m: usize, seed: u64) -> Vec<Point2D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            let x = rng.random::<f64>() * area_side;
            let y = rng.random::<f64>() * area_side;
            Point2D::new(x, y)
        })
        .collect()
}

fn device_positions(bs: Point2D, mrs: &[Point2D]) -> impl Iterator<Item = Point2D> + '_ {
    core::iter::once(bs).chain(mrs.iter().copied())
}

/// Nearest device for each user. Ties go to the lowest device index.
pub fn associate_nearest(bs: &Point2D, mrs: &[Point2D], users: &[Point2D]) -> Vec<usize> {
    users
        .iter()
        .map(|u| {
            let mut best = (f64::INFINITY, 0usize);
            for (s, d) in device_positions(*bs, mrs).enumerate() {
                let dist = u.distance(&d);
                if dist < best.0 {
                    best = (dist, s);
                }
            }
            best.1
        })
        .collect()
}

/// Second-nearest device under the same ordering as [`associate_nearest`].
fn second_nearest(bs: &Point2D, mrs: &[Point2D], user: &Point2D) -> usize {
    let mut ranked: Vec<(f64, usize)> = device_positions(*bs, mrs)
        .enumerate()
        .map(|(s, d)| (user.distance(&d), s))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked[1].1
}

/// SplitMix64 finaliser over `(master, index)`; used to derive per-cell seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Scenario {
    /// Full pipeline: layout, uniform users from `seed`, nearest association.
    pub fn generate(
        area_side: f64,
        rnum: usize,
        m: usize,
        bs_offset: f64,
        rail_offset: f64,
        seed: u64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("at least one user is required"));
        }
        let (bs_position, mr_positions) = build_layout(area_side, rnum, bs_offset, rail_offset)?;
        let users = place_users(area_side, m, seed);
        let association = associate_nearest(&bs_position, &mr_positions, &users);
        Ok(Scenario {
            area_side,
            bs_position,
            mr_positions,
            users,
            association,
            seed,
        })
    }

    pub fn device_count(&self) -> usize {
        1 + self.mr_positions.len()
    }

    pub fn rnum(&self) -> usize {
        self.mr_positions.len()
    }

    pub fn device_position(&self, device: usize) -> Point2D {
        if device == BS_INDEX {
            self.bs_position
        } else {
            self.mr_positions[device - 1]
        }
    }

    /// Users associated with `device`, in user order.
    pub fn users_of(&self, device: usize) -> impl Iterator<Item = &Point2D> + '_ {
        self.users
            .iter()
            .zip(&self.association)
            .filter(move |(_, &a)| a == device)
            .map(|(u, _)| u)
    }

    /// Associated-user count per device (`M_BS, M_1, ..., M_Rnum`).
    pub fn user_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.device_count()];
        for &a in &self.association {
            counts[a] += 1;
        }
        counts
    }

    /// Mean serving distance per device; `None` for devices without users.
    pub fn mean_distances(&self) -> Vec<Option<f64>> {
        (0..self.device_count())
            .map(|s| {
                let pos = self.device_position(s);
                let (sum, n) = self
                    .users_of(s)
                    .fold((0.0, 0usize), |(acc, n), u| (acc + u.distance(&pos), n + 1));
                (n > 0).then(|| sum / n as f64)
            })
            .collect()
    }

    /// Blocks each serving link independently with probability `p_b` and moves
    /// blocked users to their second-nearest device.
    pub fn sample_blockage_reassociate(&self, p_b: f64, seed: u64) -> Result<Scenario> {
        if !(0.0..=1.0).contains(&p_b) {
            return Err(Error::InvalidArgument(
                "blockage probability must be in [0, 1]",
            ));
        }
        if p_b > 0.0 && self.device_count() < 2 {
            return Err(Error::InvalidArgument(
                "re-association needs at least two devices",
            ));
        }
        let mut out = self.clone();
        if p_b == 0.0 {
            return Ok(out);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (k, user) in self.users.iter().enumerate() {
            if rng.random::<f64>() < p_b {
                out.association[k] = second_nearest(&self.bs_position, &self.mr_positions, user);
            }
        }
        Ok(out)
    }

    /// Plain-text dump: `area_side`, `seed`, `bs`, `mr` and `user` lines with
    /// coordinates at six decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "area_side {:.6}", self.area_side);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "bs {:.6} {:.6}", self.bs_position.x, self.bs_position.y);
        for (i, p) in self.mr_positions.iter().enumerate() {
            let _ = writeln!(s, "mr {} {:.6} {:.6}", i + 1, p.x, p.y);
        }
        for (k, (p, a)) in self.users.iter().zip(&self.association).enumerate() {
            let _ = writeln!(s, "user {} {:.6} {:.6} {}", k, p.x, p.y, a);
        }
        s
    }

    /// Parses the format written by [`Scenario::to_text`].
    pub fn from_text(text: &str) -> core::result::Result<Scenario, String> {
        let mut area_side = None;
        let mut seed = None;
        let mut bs = None;
        let mut mrs = Vec::new();
        let mut users = Vec::new();
        let mut association = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || format!("line {}: malformed `{}`", lineno + 1, line);
            let num = |i: usize| -> core::result::Result<f64, String> {
                fields
                    .get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(bad)
            };
            let idx = |i: usize| -> core::result::Result<usize, String> {
                fields
                    .get(i)
                    .and_then(|v| v.parse::<usize>().ok())
                    .ok_or_else(bad)
            };
            match fields[0] {
                "area_side" if fields.len() == 2 => area_side = Some(num(1)?),
                "seed" if fields.len() == 2 => {
                    seed = Some(fields[1].parse::<u64>().map_err(|_| bad())?)
                }
                "bs" if fields.len() == 3 => bs = Some(Point2D::new(num(1)?, num(2)?)),
                "mr" if fields.len() == 4 => {
                    if idx(1)? != mrs.len() + 1 {
                        return Err(format!("line {}: relays out of order", lineno + 1));
                    }
                    mrs.push(Point2D::new(num(2)?, num(3)?));
                }
                "user" if fields.len() == 5 => {
                    if idx(1)? != users.len() {
                        return Err(format!("line {}: users out of order", lineno + 1));
                    }
                    users.push(Point2D::new(num(2)?, num(3)?));
                    association.push(idx(4)?);
                }
                _ => return Err(bad()),
            }
        }
        let scenario = Scenario {
            area_side: area_side.ok_or("missing area_side")?,
            seed: seed.ok_or("missing seed")?,
            bs_position: bs.ok_or("missing bs")?,
            mr_positions: mrs,
            users,
            association,
        };
        if scenario.mr_positions.is_empty() {
            return Err("no relays".into());
        }
        if let Some(a) = scenario
            .association
            .iter()
            .find(|&&a| a >= scenario.device_count())
        {
            return Err(format!("association {a} out of range"));
        }
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_layout() {
        let (bs, mrs) = build_layout(500.0, 9, 50.0, 50.0).unwrap();
        assert_eq!(bs, Point2D::new(250.0, 300.0));
        let xs: Vec<f64> = mrs.iter().map(|p| p.x).collect();
        let expect: Vec<f64> = (1..=9).map(|i| 50.0 * i as f64).collect();
        for (a, b) in xs.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(mrs.iter().all(|p| p.y == 200.0));
    }

    #[test]
    fn degenerate_and_small_layouts() {
        let (bs, mrs) = build_layout(500.0, 1, 0.0, 0.0).unwrap();
        assert_eq!(bs, Point2D::new(250.0, 250.0));
        assert_eq!(mrs, alloc::vec![Point2D::new(250.0, 250.0)]);

        let (bs, mrs) = build_layout(100.0, 2, 10.0, 10.0).unwrap();
        assert_eq!(bs, Point2D::new(50.0, 60.0));
        assert_eq!(
            mrs,
            alloc::vec![Point2D::new(10.0, 40.0), Point2D::new(90.0, 40.0)]
        );
    }

    #[test]
    fn layout_rejects_offsets_outside_area() {
        assert!(matches!(
            build_layout(100.0, 2, 50.0, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(build_layout(100.0, 2, 0.0, -1.0).is_err());
        assert!(build_layout(0.0, 2, 0.0, 0.0).is_err());
        assert!(build_layout(100.0, 0, 0.0, 0.0).is_err());
    }

    #[test]
    fn user_placement_is_deterministic_and_contained() {
        assert_eq!(place_users(500.0, 200, 42), place_users(500.0, 200, 42));
        assert_ne!(place_users(500.0, 200, 42), place_users(500.0, 200, 43));
        let one = place_users(1.0, 1, 7);
        assert_eq!(one.len(), 1);
        assert!((0.0..=1.0).contains(&one[0].x) && (0.0..=1.0).contains(&one[0].y));
    }

    #[test]
    fn user_placement_mean_is_centre() {
        let users = place_users(500.0, 100_000, 11);
        let mean = users.iter().map(|p| p.x).sum::<f64>() / users.len() as f64;
        assert!((mean - 250.0).abs() <= 5.0, "mean {mean}");
    }

    #[test]
    fn association_zero_distance_and_ties() {
        let bs = Point2D::new(0.0, 0.0);
        let mrs = [Point2D::new(10.0, 0.0), Point2D::new(20.0, 0.0)];
        let users = [
            Point2D::new(20.0, 0.0),
            Point2D::new(5.0, 3.0),
            Point2D::new(15.0, 0.0),
        ];
        // user 1 is equidistant from BS and MR1, user 2 from MR1 and MR2
        assert_eq!(associate_nearest(&bs, &mrs, &users), alloc::vec![2, 0, 1]);
    }

    #[test]
    fn table_one_partition() {
        let sc = Scenario::generate(500.0, 9, 200, 50.0, 50.0, 3).unwrap();
        assert_eq!(sc.user_counts().iter().sum::<usize>(), 200);
    }

    #[test]
    fn blockage_extremes() {
        let sc = Scenario::generate(500.0, 9, 300, 50.0, 50.0, 5).unwrap();
        assert_eq!(sc.sample_blockage_reassociate(0.0, 1).unwrap(), sc);
        let all = sc.sample_blockage_reassociate(1.0, 1).unwrap();
        for (k, u) in sc.users.iter().enumerate() {
            assert_eq!(
                all.association[k],
                second_nearest(&sc.bs_position, &sc.mr_positions, u)
            );
            assert_ne!(all.association[k], sc.association[k]);
        }
        assert_eq!(all.user_counts().iter().sum::<usize>(), 300);
    }

    #[test]
    fn blockage_fraction_concentrates() {
        let sc = Scenario::generate(500.0, 9, 100_000, 50.0, 50.0, 9).unwrap();
        let b = sc.sample_blockage_reassociate(0.2, 77).unwrap();
        let moved = sc
            .association
            .iter()
            .zip(&b.association)
            .filter(|(a, b)| a != b)
            .count();
        let frac = moved as f64 / 100_000.0;
        assert!((frac - 0.2).abs() <= 0.01, "fraction {frac}");
        assert_eq!(b, sc.sample_blockage_reassociate(0.2, 77).unwrap());
    }

    #[test]
    fn blockage_argument_errors() {
        let sc = Scenario::generate(500.0, 1, 10, 0.0, 0.0, 5).unwrap();
        assert!(sc.sample_blockage_reassociate(1.5, 0).is_err());
        let mut lone = sc.clone();
        lone.mr_positions.clear();
        lone.association.iter_mut().for_each(|a| *a = 0);
        assert!(lone.sample_blockage_reassociate(0.5, 0).is_err());
        assert!(lone.sample_blockage_reassociate(0.0, 0).is_ok());
    }

    #[test]
    fn text_format_round_trip() {
        let sc = Scenario::generate(500.0, 3, 12, 50.0, 50.0, 21).unwrap();
        let text = sc.to_text();
        assert!(text.starts_with("area_side 500.000000\nseed 21\nbs 250.000000 300.000000\nmr 1 "));
        let back = Scenario::from_text(&text).unwrap();
        assert_eq!(back.association, sc.association);
        assert_eq!(back.to_text(), text);
        assert!(Scenario::from_text("area_side 1\nseed 0\nbs 0 0\nuser 0 1 1 0\n").is_err());
    }

    #[test]
    fn seeds_derive_distinctly() {
        let a = derive_seed(1, 0);
        assert_ne!(a, derive_seed(1, 1));
        assert_ne!(a, derive_seed(2, 0));
        assert_eq!(a, derive_seed(1, 0));
    }
}
