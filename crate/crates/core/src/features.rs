//! State-action feature encoders producing sparse `x(s, a)` vectors.
//!
//! Both encoders use an action-major layout: the features of action `a`
//! occupy the block `[a·block, (a+1)·block)`.

use crate::error::{Error, Result};

/// Sparse feature vector. `indices` are strictly increasing and below `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl FeatureVector {
    pub fn new(indices: Vec<usize>, values: Vec<f64>, dim: usize) -> Result<Self> {
        crate::error::check_len("feature values", indices.len(), values.len())?;
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("feature indices must be strictly increasing"));
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::OutOfRange {
                    what: "feature index",
                    index: last,
                    size: dim,
                });
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature values"));
        }
        Ok(Self { indices, values, dim })
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Inner product by merging the two sorted index lists.
    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// `wᵀx` for a dense weight vector.
    pub fn dot_dense(&self, weights: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, v)| weights[i] * v)
            .sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    /// Number of shared active positions.
    pub fn overlap(&self, other: &FeatureVector) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// Tabular state-action pair as a unit basis vector.
pub fn one_hot_encode(
    state_id: usize,
    action_id: usize,
    num_states: usize,
    num_actions: usize,
) -> Result<FeatureVector> {
    if state_id >= num_states {
        return Err(Error::OutOfRange {
            what: "state id",
            index: state_id,
            size: num_states,
        });
    }
    if action_id >= num_actions {
        return Err(Error::OutOfRange {
            what: "action id",
            index: action_id,
            size: num_actions,
        });
    }
    Ok(FeatureVector {
        indices: vec![state_id * num_actions + action_id],
        values: vec![1.0],
        dim: num_states * num_actions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileCodingSpec {
    pub num_tilings: usize,
    pub tiles_per_dim: usize,
    pub state_low: Vec<f64>,
    pub state_high: Vec<f64>,
    pub num_actions: usize,
    pub normalize: bool,
}

impl TileCodingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_tilings == 0 || self.tiles_per_dim == 0 || self.num_actions == 0 {
            return Err(Error::config(
                "tile coding needs positive tilings, tiles per dimension and actions",
            ));
        }
        crate::error::check_len("tile coding bounds", self.state_low.len(), self.state_high.len())?;
        if self.state_low.is_empty() {
            return Err(Error::config("tile coding needs at least one state dimension"));
        }
        if self
            .state_low
            .iter()
            .zip(&self.state_high)
            .any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::config("tile coding bounds must satisfy low < high"));
        }
        Ok(())
    }

    pub fn state_dims(&self) -> usize {
        self.state_low.len()
    }

    /// Offset tilings need one extra tile per dimension to cover the box.
    pub fn tiles_per_tiling(&self) -> usize {
        (self.tiles_per_dim + 1).pow(self.state_dims() as u32)
    }

    pub fn block_dim(&self) -> usize {
        self.num_tilings * self.tiles_per_tiling()
    }

    pub fn dim(&self) -> usize {
        self.num_actions * self.block_dim()
    }

    /// Width of one tile along dimension `d`, in state units.
    pub fn tile_width(&self, d: usize) -> f64 {
        (self.state_high[d] - self.state_low[d]) / self.tiles_per_dim as f64
    }
}

/// Grid tile coding with uniform offsets: tiling `i` is displaced by
/// `i/num_tilings` of a tile width along every dimension. States outside
/// the bounds are clipped onto them.
pub fn tile_encode(spec: &TileCodingSpec, state: &[f64], action_id: usize) -> Result<FeatureVector> {
    crate::error::check_len("tile coding state", spec.state_dims(), state.len())?;
    if action_id >= spec.num_actions {
        return Err(Error::OutOfRange {
            what: "action id",
            index: action_id,
            size: spec.num_actions,
        });
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tile coding state"));
    }
    let n = spec.num_tilings;
    let radix = spec.tiles_per_dim + 1;
    let per_tiling = spec.tiles_per_tiling();
    let base = action_id * spec.block_dim();
    let scaled: Vec<f64> = state
        .iter()
        .enumerate()
        .map(|(d, &x)| {
            let (lo, hi) = (spec.state_low[d], spec.state_high[d]);
            (x.clamp(lo, hi) - lo) / (hi - lo) * spec.tiles_per_dim as f64
        })
        .collect();

    let value = if spec.normalize { 1.0 / (n as f64).sqrt() } else { 1.0 };
    let indices = (0..n)
        .map(|tiling| {
            let offset = tiling as f64 / n as f64;
            let cell = scaled.iter().fold(0usize, |acc, u| {
                let c = ((u + offset).floor() as usize).min(spec.tiles_per_dim);
                acc * radix + c
            });
            base + tiling * per_tiling + cell
        })
        .collect();
    Ok(FeatureVector {
        indices,
        values: vec![value; n],
        dim: spec.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn pendulum_spec(normalize: bool) -> TileCodingSpec {
        TileCodingSpec {
            num_tilings: 32,
            tiles_per_dim: 8,
            state_low: vec![-std::f64::consts::PI, -8.0],
            state_high: vec![std::f64::consts::PI, 8.0],
            num_actions: 3,
            normalize,
        }
    }

    #[test]
    fn one_hot_positions() {
        assert_eq!(one_hot_encode(0, 0, 2, 2).unwrap().indices, vec![0]);
        assert_eq!(one_hot_encode(1, 1, 2, 2).unwrap().indices, vec![3]);
        assert!(one_hot_encode(2, 0, 2, 2).is_err());
        assert!(one_hot_encode(0, 2, 2, 2).is_err());
    }

    #[test]
    fn one_hot_pairs_are_orthonormal() {
        let all: Vec<FeatureVector> = (0..4)
            .flat_map(|s| (0..3).map(move |a| one_hot_encode(s, a, 4, 3).unwrap()))
            .collect();
        for (i, x) in all.iter().enumerate() {
            for (j, y) in all.iter().enumerate() {
                let dense: f64 = x.to_dense().iter().zip(y.to_dense()).map(|(a, b)| a * b).sum();
                assert_eq!(dense, if i == j { 1.0 } else { 0.0 });
                assert_eq!(x.dot(y), dense);
            }
        }
    }

    #[test]
    fn unnormalized_tiles_have_norm_equal_to_tilings() {
        let spec = pendulum_spec(false);
        let mut r = rng::from_seed(3);
        for _ in 0..100 {
            let s = [r.random_range(-4.0..4.0), r.random_range(-10.0..10.0)];
            let x = tile_encode(&spec, &s, r.random_range(0..3)).unwrap();
            assert_eq!(x.nnz(), 32);
            assert_eq!(x.squared_norm(), 32.0);
            assert!(x.indices.windows(2).all(|w| w[0] < w[1]));
            assert!(*x.indices.last().unwrap() < x.dim);
        }
    }

    #[test]
    fn normalized_tiles_have_unit_norm() {
        let spec = pendulum_spec(true);
        let mut r = rng::from_seed(4);
        for _ in 0..100 {
            let s = [r.random_range(-3.0..3.0), r.random_range(-8.0..8.0)];
            let x = tile_encode(&spec, &s, 1).unwrap();
            assert!((x.squared_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn actions_use_disjoint_blocks() {
        let spec = pendulum_spec(false);
        let a = tile_encode(&spec, &[0.1, 0.2], 0).unwrap();
        let b = tile_encode(&spec, &[0.1, 0.2], 2).unwrap();
        assert_eq!(a.overlap(&b), 0);
        assert!(b.indices[0] >= 2 * spec.block_dim());
    }

    #[test]
    fn nearby_states_in_same_cells_encode_identically() {
        // the union of all tiling boundaries is a grid with spacing
        // width/num_tilings; points within half that spacing of a sub-cell
        // center share every tile
        let spec = pendulum_spec(false);
        let mut r = rng::from_seed(9);
        let n = spec.num_tilings as f64;
        for _ in 0..200 {
            let mut s1 = [0.0; 2];
            let mut s2 = [0.0; 2];
            for d in 0..2 {
                let w = spec.tile_width(d);
                let fine = w / n;
                let k = r.random_range(0..(spec.tiles_per_dim * spec.num_tilings)) as f64;
                let center = spec.state_low[d] + (k + 0.5) * fine;
                let radius = w / (2.0 * n) * 0.99;
                s1[d] = center + r.random_range(-radius..radius);
                s2[d] = center + r.random_range(-radius..radius);
            }
            assert_eq!(tile_encode(&spec, &s1, 0).unwrap(), tile_encode(&spec, &s2, 0).unwrap());
        }
    }

    #[test]
    fn deterministic_and_clipped() {
        let spec = pendulum_spec(false);
        let a = tile_encode(&spec, &[0.3, -1.0], 1).unwrap();
        assert_eq!(a, tile_encode(&spec, &[0.3, -1.0], 1).unwrap());
        let edge = tile_encode(&spec, &[std::f64::consts::PI, 8.0], 1).unwrap();
        assert_eq!(edge, tile_encode(&spec, &[10.0, 100.0], 1).unwrap());
    }

    #[test]
    fn overlap_decays_with_distance() {
        let spec = pendulum_spec(false);
        let origin = [0.123, -0.456];
        let x0 = tile_encode(&spec, &origin, 0).unwrap();
        let mut last = x0.nnz();
        for k in 1..400 {
            let d = k as f64 * 0.005;
            let x = tile_encode(&spec, &[origin[0] + d, origin[1]], 0).unwrap();
            let ov = x0.overlap(&x);
            assert!(ov <= last, "overlap grew at distance {d}");
            last = ov;
        }
        assert_eq!(last, 0);
    }

    #[test]
    fn spec_validation() {
        let mut spec = pendulum_spec(false);
        assert!(spec.validate().is_ok());
        spec.state_high[0] = spec.state_low[0];
        assert!(spec.validate().is_err());
    }
}
