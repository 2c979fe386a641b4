//! Designs of experiments on `[0,1]^I × {1..L}`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gp::write_points_csv;
use crate::kernels::{InputSchema, MixedPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Slhd,
    Stratified,
    Lhs,
    Grid,
}

/// Where a point sits inside its bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    #[default]
    Center,
    /// Uniform within the bin.
    Jitter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub points: Vec<MixedPoint>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

impl Design {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dataset-format CSV without the response column.
    pub fn write_csv(&self, writer: impl Write, schema: &InputSchema) -> Result<()> {
        for p in &self.points {
            schema.check_point(p)?;
        }
        write_points_csv(writer, schema, &self.points, None)
    }
}

fn place(bin: usize, bins: usize, placement: Placement, rng: &mut impl Rng) -> f64 {
    let offset = match placement {
        Placement::Center => 0.5,
        Placement::Jitter => rng.random::<f64>(),
    };
    (bin as f64 + offset) / bins as f64
}

fn check_sizes(m: usize, l: usize, i: usize) -> Result<()> {
    if m == 0 || l == 0 || i == 0 {
        return domain(format!("design sizes must be positive (m={m}, L={l}, I={i})"));
    }
    Ok(())
}

/// Fine-bin indices (`0..m·L`) for each slice and dimension: `bins[s][k][d]`.
///
/// In every dimension, each coarse bin `j` is split into the fine bins `jL..jL+L-1`; a
/// random permutation hands one of them to each slice. Each slice then visits its `m`
/// coarse bins in an independent random order.
fn slhd_bins(m: usize, l: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<Vec<usize>>> {
    let mut bins = vec![vec![vec![0usize; dim]; m]; l];
    let mut slices: Vec<usize> = (0..l).collect();
    let mut order: Vec<usize> = (0..m).collect();
    for d in 0..dim {
        let mut fine_of = vec![vec![0usize; m]; l];
        for j in 0..m {
            slices.shuffle(rng);
            for (r, &s) in slices.iter().enumerate() {
                fine_of[s][j] = j * l + r;
            }
        }
        for (s, fine) in fine_of.iter().enumerate() {
            order.shuffle(rng);
            for (k, &j) in order.iter().enumerate() {
                bins[s][k][d] = fine[j];
            }
        }
    }
    bins
}

/// Sliced Latin hypercube: `m` points for each of the `L` levels of one categorical input.
///
/// Each slice is a Latin hypercube on the coarse `m`-grid and the union is a Latin
/// hypercube on the fine `mL`-grid. Points are at fine-bin centers.
pub fn slhd(m: usize, level_count: usize, dim: usize, seed: u64) -> Result<Design> {
    slhd_with(m, level_count, dim, seed, Placement::Center)
}

pub fn slhd_with(
    m: usize,
    level_count: usize,
    dim: usize,
    seed: u64,
    placement: Placement,
) -> Result<Design> {
    slhd_cross(m, &[level_count], dim, seed, placement)
}

/// SLHD whose slices are all combinations of levels of several categorical inputs
/// (last input varying fastest).
pub fn slhd_cross(
    m: usize,
    level_counts: &[usize],
    dim: usize,
    seed: u64,
    placement: Placement,
) -> Result<Design> {
    if level_counts.is_empty() {
        return domain("at least one categorical input is required");
    }
    let slices: usize = level_counts.iter().product();
    check_sizes(m, slices, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bins = slhd_bins(m, slices, dim, &mut rng);
    let fine = m * slices;
    let mut points = Vec::with_capacity(fine);
    for (s, slice) in bins.iter().enumerate() {
        let u = combination(s, level_counts);
        for b in slice {
            let x = b.iter().map(|&k| place(k, fine, placement, &mut rng)).collect();
            points.push(MixedPoint::new(x, u.clone()));
        }
    }
    Ok(Design { points, provenance: Provenance::Slhd, seed: Some(seed) })
}

/// 1-based levels of combination `index` in mixed radix.
fn combination(mut index: usize, level_counts: &[usize]) -> Vec<usize> {
    let mut u = vec![0; level_counts.len()];
    for (slot, &l) in u.iter_mut().zip(level_counts).rev() {
        *slot = index % l + 1;
        index /= l;
    }
    u
}

/// Regular sequence `k/(n-1)`, `k = 0..n` (a single point sits at 0.5).
fn regular(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5];
    }
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

/// Deterministic stratified design: the regular sequence of `mL` points is dealt to levels
/// round-robin (point `k` goes to level `k mod L + 1`). For `I > 1` every coordinate takes
/// the same sequence value.
pub fn stratified_regular(m: usize, level_count: usize, dim: usize) -> Result<Design> {
    check_sizes(m, level_count, dim)?;
    let seq = regular(m * level_count);
    let mut points = Vec::with_capacity(seq.len());
    for l in 0..level_count {
        for (k, &x) in seq.iter().enumerate() {
            if k % level_count == l {
                points.push(MixedPoint::new(vec![x; dim], vec![l + 1]));
            }
        }
    }
    Ok(Design { points, provenance: Provenance::Stratified, seed: None })
}

/// Latin hypercube of `n` points in `[0,1]^I` (no categorical coordinates).
pub fn lhs(n: usize, dim: usize, seed: u64) -> Result<Design> {
    lhs_with(n, dim, seed, Placement::Center)
}

pub fn lhs_with(n: usize, dim: usize, seed: u64, placement: Placement) -> Result<Design> {
    check_sizes(n, 1, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<usize>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(&mut rng);
        cols.push(p);
    }
    let points = (0..n)
        .map(|k| {
            let x = cols.iter().map(|c| place(c[k], n, placement, &mut rng)).collect();
            MixedPoint::new(x, vec![])
        })
        .collect();
    Ok(Design { points, provenance: Provenance::Lhs, seed: Some(seed) })
}

/// Regular lattice with `n` points per axis (`n^I` points, first axis varying slowest).
pub fn grid(n: usize, dim: usize) -> Result<Design> {
    check_sizes(n, 1, dim)?;
    let seq = regular(n);
    let total = n.checked_pow(dim as u32).filter(|t| *t <= 50_000_000);
    let Some(total) = total else {
        return domain(format!("grid of {n}^{dim} points is too large"));
    };
    let points = (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; dim];
            for slot in x.iter_mut().rev() {
                *slot = seq[idx % n];
                idx /= n;
            }
            MixedPoint::new(x, vec![])
        })
        .collect();
    Ok(Design { points, provenance: Provenance::Grid, seed: None })
}

/// Every continuous point paired with every combination of levels.
pub fn cross_with_levels(continuous: &Design, level_counts: &[usize]) -> Vec<MixedPoint> {
    let combos: usize = level_counts.iter().product();
    let mut out = Vec::with_capacity(continuous.len() * combos);
    for c in 0..combos {
        let u = combination(c, level_counts);
        for p in &continuous.points {
            out.push(MixedPoint::new(p.x.clone(), u.clone()));
        }
    }
    out
}
