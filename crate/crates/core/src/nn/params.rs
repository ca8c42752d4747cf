use crate::error::{Error, Result};

/// Flat parameter store with per-block shape metadata.
///
/// Blocks are listed in storage order; an MLP stores, per layer, the weight
/// matrix `(out, in)` row-major followed by the bias `(out, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    shapes: Vec<(usize, usize)>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, shapes: Vec<(usize, usize)>) -> Result<Self> {
        let expected: usize = shapes.iter().map(|(r, c)| r * c).sum();
        crate::error::check_len("parameter values vs shapes", expected, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self { values, shapes })
    }

    pub fn zeros(shapes: Vec<(usize, usize)>) -> Self {
        let n = shapes.iter().map(|(r, c)| r * c).sum();
        Self {
            values: vec![0.0; n],
            shapes,
        }
    }

    /// A single-block vector, e.g. linear weights or a flattened table.
    pub fn flat(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, vec![(n, 1)])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Same shapes, new contents.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.shapes.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_must_match_shapes() {
        assert!(ParamVector::new(vec![0.0; 5], vec![(2, 2), (2, 1)]).is_err());
        let p = ParamVector::new(vec![0.0; 6], vec![(2, 2), (2, 1)]).unwrap();
        assert_eq!(p.len(), 6);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(ParamVector::flat(vec![1.0, f64::NAN]).is_err());
        assert!(ParamVector::flat(vec![f64::INFINITY]).is_err());
    }
}
