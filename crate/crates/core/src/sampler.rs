//! Default uniform distributions (truncated), and random instances drawn
//! from them.
//!
//! Integers have weight `1/n^2` on `1..=max_int`; strings have weight
//! `2^-|u| / |u|^2` on lengths `1..=max_len`, i.e. a `1/l^2` length followed
//! by uniform bits. All randomness comes from a seeded ChaCha8 generator.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::Bits;
use crate::pcp::PairList;
use crate::semithue::RewriteSystem;
use crate::tiling::{Row, Tile, TileSet};

pub type SampleRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct DefaultUniform {
    pub max_int: u64,
    pub max_len: usize,
    ints: WeightedIndex<f64>,
    lens: WeightedIndex<f64>,
}

fn inverse_square(max: u64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=max).map(|n| 1.0 / (n as f64 * n as f64))).expect("positive weights")
}

impl Default for DefaultUniform {
    fn default() -> Self {
        DefaultUniform::new(1 << 16, 64)
    }
}

impl DefaultUniform {
    /// Panics unless both bounds are at least 1.
    pub fn new(max_int: u64, max_len: usize) -> Self {
        assert!(max_int >= 1 && max_len >= 1, "truncation bounds must be positive");
        DefaultUniform {
            max_int,
            max_len,
            ints: inverse_square(max_int),
            lens: inverse_square(max_len as u64),
        }
    }

    /// `P(n)` for `1 <= n <= max_int`.
    pub fn int_probability(&self, n: u64) -> f64 {
        truncated_inverse_square(n, self.max_int)
    }

    /// `P(|u| = l)`.
    pub fn len_probability(&self, l: usize) -> f64 {
        truncated_inverse_square(l as u64, self.max_len as u64)
    }

    /// Upper bound on the mass cut off by truncating at `max_int`.
    pub fn truncated_mass_bound(&self) -> f64 {
        1.0 / self.max_int as f64
    }

    pub fn sample_int<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.ints.sample(rng) as u64 + 1
    }

    pub fn sample_len<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.lens.sample(rng) + 1
    }

    pub fn sample_string<R: Rng + ?Sized>(&self, rng: &mut R) -> Bits {
        let l = self.sample_len(rng);
        uniform_bits(rng, l)
    }

    /// Random semi-Thue instance: `m` rules, payload `u`, target `v`, bound `n`.
    pub fn sample_sts_instance<R: Rng + ?Sized>(&self, rng: &mut R) -> StsSample {
        let n = self.sample_int(rng);
        let m = self.sample_int(rng);
        let rules = (0..m).map(|_| (self.sample_string(rng), self.sample_string(rng))).collect();
        StsSample {
            system: RewriteSystem::new(rules).expect("sampled strings are nonempty"),
            u: self.sample_string(rng),
            v: self.sample_string(rng),
            n,
        }
    }

    pub fn sample_pcp_instance<R: Rng + ?Sized>(&self, rng: &mut R) -> PcpSample {
        let n = self.sample_int(rng);
        let m = self.sample_int(rng);
        let pairs = (0..m).map(|_| (self.sample_string(rng), self.sample_string(rng))).collect();
        PcpSample {
            pairs: PairList::new(pairs).expect("sampled strings are nonempty"),
            u: self.sample_string(rng),
            v: self.sample_string(rng),
            n,
        }
    }

    /// Random tiling instance: `k + 1` edge symbols and `t` uniform tiles
    /// with `k`, `t` and the row width drawn from the integer law (width
    /// capped at `max_len`).
    pub fn sample_tiling_instance<R: Rng + ?Sized>(&self, rng: &mut R) -> (TileSet, Row) {
        let k = self.sample_int(rng) as usize + 1;
        let t = self.sample_int(rng);
        let mut tiles = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..t {
            let tile = Tile {
                north: rng.gen_range(0..k),
                east: rng.gen_range(0..k),
                south: rng.gen_range(0..k),
                west: rng.gen_range(0..k),
            };
            if seen.insert(tile) {
                tiles.push(tile);
            }
        }
        let width = self.sample_len(rng);
        let row = (0..width).map(|_| rng.gen_range(0..k)).collect();
        let ts = TileSet::new((0..k).map(|i| i.to_string()).collect(), tiles)
            .expect("sampled tiles are in range and distinct");
        (ts, row)
    }
}

fn truncated_inverse_square(n: u64, max: u64) -> f64 {
    if n == 0 || n > max {
        return 0.0;
    }
    let z: f64 = (1..=max).map(|k| 1.0 / (k as f64 * k as f64)).sum();
    1.0 / (n as f64 * n as f64) / z
}

pub fn uniform_bits<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Bits {
    Bits::from_vec((0..len).map(|_| rng.gen_range(0..2u8)).collect())
}

#[derive(Debug, Clone)]
pub struct StsSample {
    pub system: RewriteSystem,
    pub u: Bits,
    /// Target of the accessibility question; unused by the function.
    pub v: Bits,
    pub n: u64,
}

impl StsSample {
    /// `n + |u| + |v| + Σ(|g_i| + |h_i|)`.
    pub fn size(&self) -> u64 {
        self.n
            + (self.u.len() + self.v.len()) as u64
            + self.system.rules().iter().map(|(g, h)| (g.len() + h.len()) as u64).sum::<u64>()
    }
}

#[derive(Debug, Clone)]
pub struct PcpSample {
    pub pairs: PairList,
    pub u: Bits,
    pub v: Bits,
    pub n: u64,
}

impl PcpSample {
    pub fn size(&self) -> u64 {
        self.n
            + (self.u.len() + self.v.len()) as u64
            + self.pairs.pairs().iter().map(|(g, h)| (g.len() + h.len()) as u64).sum::<u64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcp::{parse_pcp, serialize_pcp};
    use crate::semithue::{parse_instance, serialize_instance};

    #[test]
    fn probabilities() {
        let d = DefaultUniform::default();
        // Z over 1..=2^16 is pi^2/6 minus a tail below 2^-16.
        let z: f64 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((d.int_probability(1) - 1.0 / z).abs() < 2e-5);
        assert!((d.int_probability(2) / d.int_probability(1) - 0.25).abs() < 1e-12);
        assert_eq!(d.int_probability(0), 0.0);
        assert_eq!(d.int_probability(d.max_int + 1), 0.0);
        assert!(d.truncated_mass_bound() <= 1.0 / 65536.0);
    }

    #[test]
    fn frequency_of_one() {
        let d = DefaultUniform::default();
        let mut rng = rng_from_seed(7);
        let draws = 1_000_000;
        let ones = (0..draws).filter(|_| d.sample_int(&mut rng) == 1).count() as f64;
        let p = d.int_probability(1);
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((ones - draws as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn seeded_reproducibility() {
        let d = DefaultUniform::new(100, 16);
        let a = d.sample_sts_instance(&mut rng_from_seed(3));
        let b = d.sample_sts_instance(&mut rng_from_seed(3));
        assert_eq!((a.system, a.u, a.n), (b.system, b.u, b.n));
        let s: Vec<Bits> = (0..5).map(|_| d.sample_string(&mut rng_from_seed(11))).collect();
        assert!(s.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn instances_round_trip() {
        let d = DefaultUniform::new(50, 12);
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let s = d.sample_sts_instance(&mut rng);
            let w = serialize_instance(&s.system, &s.u);
            assert_eq!(parse_instance(&w).unwrap(), (s.system.clone(), s.u.clone()));
            assert!(s.size() >= s.n + 2);
            let p = d.sample_pcp_instance(&mut rng);
            let w = serialize_pcp(&p.pairs, &p.u);
            assert_eq!(parse_pcp(&w).unwrap(), (p.pairs.clone(), p.u.clone()));
        }
    }

    #[test]
    fn equal_lengths_equiprobable() {
        let d = DefaultUniform::new(10, 2);
        let mut rng = rng_from_seed(5);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..40_000 {
            *counts.entry(d.sample_string(&mut rng).to_string()).or_insert(0usize) += 1;
        }
        let (a, b) = (counts["0"] as f64, counts["1"] as f64);
        assert!((a - b).abs() / (a + b) < 0.03);
        let twos: Vec<f64> = ["00", "01", "10", "11"].iter().map(|k| counts[*k] as f64).collect();
        // P(l = 1) = 4/5, so one specific 1-bit string has 2/5 and a 2-bit one 1/20.
        assert!((a / 40_000.0 - 0.4).abs() < 0.01);
        assert!(twos.iter().all(|&c| (c / 40_000.0 - 0.05).abs() < 0.01));
    }
}
