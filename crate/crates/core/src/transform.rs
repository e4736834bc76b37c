//! Reversible polynomial coupling transformations.
//!
//! Features are split into two equal halves `p1`, `p2` and paired index by
//! index. For each pair `i`:
//!
//! ```text
//! y2[i] = x[p2[i]] + F_i(x[p1[i]])
//! y1[i] = x[p1[i]] + G_i(y2[i])
//! ```
//!
//! and the output keeps the input layout (`y1[i]` lands at `p1[i]`, `y2[i]`
//! at `p2[i]`). Inversion runs the two steps backwards. Each `F_i` is a sum of
//! Chebyshev terms and each `G_i` a sum of Legendre terms, all restricted to
//! basis elements without a constant term.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polybasis::{nonconstant_degrees, Basis, PolyTerm, DEFAULT_DIVIDE_FACTOR};

/// Coefficients are drawn from `[-1, 1]` excluding `(-MIN_COEFFICIENT, MIN_COEFFICIENT)`.
pub const MIN_COEFFICIENT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub max_degree: u32,
    /// Number of basis terms summed into each per-feature polynomial.
    pub chain_length: usize,
    /// Divide-factor exponent `h`.
    pub divide_factor: i32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            max_degree: 10,
            chain_length: 2,
            divide_factor: DEFAULT_DIVIDE_FACTOR,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_degree < 1 {
            return Err(Error::invalid("max_degree must be at least 1"));
        }
        if self.chain_length < 1 {
            return Err(Error::invalid("chain_length must be at least 1"));
        }
        Ok(())
    }
}

/// A single per-feature polynomial: the sum of its terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<PolyTerm>,
}

impl Polynomial {
    fn eval(&self, x: f64) -> std::result::Result<f64, crate::polybasis::NonFiniteTerm> {
        let mut acc = 0.0;
        for term in &self.terms {
            acc += term.apply(x)?;
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformationSpec {
    pub id: usize,
    pub p1: Vec<usize>,
    pub p2: Vec<usize>,
    /// `F_i`, Chebyshev, applied to `x[p1[i]]`.
    pub f: Vec<Polynomial>,
    /// `G_i`, Legendre, applied to `y2[i]`.
    pub g: Vec<Polynomial>,
}

/// Counts of coupling additions where a nonzero input coordinate was
/// completely absorbed by a much larger polynomial output.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Absorption {
    pub events: usize,
}

fn sample_coefficient<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let c: f64 = rng.random_range(-1.0..=1.0);
        if c.abs() >= MIN_COEFFICIENT {
            return c;
        }
    }
}

fn sample_polynomial<R: Rng + ?Sized>(
    rng: &mut R,
    basis: Basis,
    degrees: &[u32],
    params: &GenParams,
) -> Result<Polynomial> {
    let terms = (0..params.chain_length)
        .map(|_| {
            let degree = degrees[rng.random_range(0..degrees.len())];
            PolyTerm::new(basis, degree, sample_coefficient(rng), params.divide_factor)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Polynomial { terms })
}

impl TransformationSpec {
    /// Draw a random transformation over `dim` (even) features.
    pub fn generate<R: Rng + ?Sized>(
        rng: &mut R,
        id: usize,
        dim: usize,
        params: &GenParams,
    ) -> Result<Self> {
        params.validate()?;
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "transformation dimension must be even and positive, got {dim}; pad first"
            )));
        }
        let mut order: Vec<usize> = (0..dim).collect();
        order.shuffle(rng);
        let p2 = order.split_off(dim / 2);
        let p1 = order;

        let cheb = nonconstant_degrees(Basis::Chebyshev, params.max_degree)?;
        let leg = nonconstant_degrees(Basis::Legendre, params.max_degree)?;
        let half = dim / 2;
        let f = (0..half)
            .map(|_| sample_polynomial(rng, Basis::Chebyshev, &cheb, params))
            .collect::<Result<Vec<_>>>()?;
        let g = (0..half)
            .map(|_| sample_polynomial(rng, Basis::Legendre, &leg, params))
            .collect::<Result<Vec<_>>>()?;
        Ok(TransformationSpec { id, p1, p2, f, g })
    }

    pub fn dim(&self) -> usize {
        self.p1.len() + self.p2.len()
    }

    /// Structural checks: disjoint equal halves covering `0..dim`, one
    /// polynomial per pair, at least one term per polynomial.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.p1.len() != self.p2.len() || dim == 0 {
            return Err(Error::invalid("partition halves must be non-empty and equal"));
        }
        let mut seen = vec![false; dim];
        for &i in self.p1.iter().chain(&self.p2) {
            if i >= dim || seen[i] {
                return Err(Error::invalid(format!("partition index {i} repeated or out of range")));
            }
            seen[i] = true;
        }
        if self.f.len() != self.p1.len() || self.g.len() != self.p2.len() {
            return Err(Error::invalid("polynomial count does not match partition size"));
        }
        if self.f.iter().chain(&self.g).any(|p| p.terms.is_empty()) {
            return Err(Error::invalid("empty polynomial"));
        }
        Ok(())
    }

    fn overflow(&self, feature: usize, err: crate::polybasis::NonFiniteTerm) -> Error {
        Error::Overflow {
            spec_id: self.id,
            feature,
            detail: err.to_string(),
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::invalid(format!(
                "sample has {len} values, transformation {} expects {}",
                self.id,
                self.dim()
            )));
        }
        Ok(())
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64], absorption: &mut Absorption) -> Result<()> {
        for (i, (&a, &b)) in self.p1.iter().zip(&self.p2).enumerate() {
            let fx = self.f[i].eval(x[a]).map_err(|e| self.overflow(a, e))?;
            let y2 = x[b] + fx;
            if !y2.is_finite() {
                return Err(Error::Overflow {
                    spec_id: self.id,
                    feature: b,
                    detail: format!("coupling sum {} + {} is not finite", x[b], fx),
                });
            }
            let gy = self.g[i].eval(y2).map_err(|e| self.overflow(b, e))?;
            let y1 = x[a] + gy;
            if !y1.is_finite() {
                return Err(Error::Overflow {
                    spec_id: self.id,
                    feature: a,
                    detail: format!("coupling sum {} + {} is not finite", x[a], gy),
                });
            }
            if x[b] != 0.0 && y2 == fx {
                absorption.events += 1;
            }
            if x[a] != 0.0 && y1 == gy {
                absorption.events += 1;
            }
            out[a] = y1;
            out[b] = y2;
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let mut out = vec![0.0; x.len()];
        self.forward_into(x, &mut out, &mut Absorption::default())?;
        Ok(out)
    }

    /// Forward pass that also reports how many input coordinates were lost to
    /// absorption in the coupling additions.
    pub fn forward_with_absorption(&self, x: &[f64]) -> Result<(Vec<f64>, Absorption)> {
        self.check_len(x.len())?;
        let mut out = vec![0.0; x.len()];
        let mut absorption = Absorption::default();
        self.forward_into(x, &mut out, &mut absorption)?;
        Ok((out, absorption))
    }

    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y.len())?;
        let mut x = vec![0.0; y.len()];
        for (i, (&a, &b)) in self.p1.iter().zip(&self.p2).enumerate() {
            let gy = self.g[i].eval(y[b]).map_err(|e| self.overflow(b, e))?;
            let xa = y[a] - gy;
            let fx = self.f[i].eval(xa).map_err(|e| self.overflow(a, e))?;
            let xb = y[b] - fx;
            if !xa.is_finite() || !xb.is_finite() {
                return Err(Error::Overflow {
                    spec_id: self.id,
                    feature: a,
                    detail: "inverse coupling produced a non-finite value".into(),
                });
            }
            x[a] = xa;
            x[b] = xb;
        }
        Ok(x)
    }

    /// Row-wise [`forward`](Self::forward). The first overflowing row aborts
    /// the batch and is reported by index.
    pub fn forward_batch(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_len(xs.ncols())?;
        let mut out = Array2::zeros(xs.raw_dim());
        let results: Vec<Result<()>> = out
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(xs.axis_iter(Axis(0)).into_par_iter())
            .map(|(mut o, x)| {
                let x = x.to_vec();
                let mut buf = vec![0.0; x.len()];
                self.forward_into(&x, &mut buf, &mut Absorption::default())?;
                o.assign(&ndarray::ArrayView1::from(&buf));
                Ok(())
            })
            .collect();
        for (row, r) in results.into_iter().enumerate() {
            if let Err(e) = r {
                return Err(Error::RowOverflow {
                    row,
                    source: Box::new(e),
                });
            }
        }
        Ok(out)
    }

    /// Like [`forward_batch`](Self::forward_batch) but never fails on
    /// overflow: offending rows are zero-filled and flagged `true`.
    pub fn forward_batch_flagged(&self, xs: ArrayView2<f64>) -> Result<(Array2<f64>, Vec<bool>)> {
        self.check_len(xs.ncols())?;
        let mut out = Array2::zeros(xs.raw_dim());
        let flags: Vec<bool> = out
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(xs.axis_iter(Axis(0)).into_par_iter())
            .map(|(mut o, x)| {
                let x = x.to_vec();
                let mut buf = vec![0.0; x.len()];
                match self.forward_into(&x, &mut buf, &mut Absorption::default()) {
                    Ok(()) => {
                        o.assign(&ndarray::ArrayView1::from(&buf));
                        false
                    }
                    Err(_) => true,
                }
            })
            .collect();
        Ok((out, flags))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(basis: Basis, degree: u32, coefficient: f64) -> Polynomial {
        Polynomial {
            terms: vec![PolyTerm::new(basis, degree, coefficient, 2).unwrap()],
        }
    }

    fn worked_example() -> TransformationSpec {
        TransformationSpec {
            id: 0,
            p1: vec![0],
            p2: vec![1],
            f: vec![single(Basis::Chebyshev, 1, 1.0)],
            g: vec![single(Basis::Legendre, 1, 0.0)],
        }
    }

    fn identity_spec() -> TransformationSpec {
        TransformationSpec {
            id: 1,
            p1: vec![1],
            p2: vec![0],
            f: vec![single(Basis::Chebyshev, 3, 0.0)],
            g: vec![single(Basis::Legendre, 5, 0.0)],
        }
    }

    #[test]
    fn generate_structure() {
        let params = GenParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1235);
        let spec = TransformationSpec::generate(&mut rng, 0, 4, &params).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.p1.len(), 2);
        assert_eq!(spec.p2.len(), 2);
        for poly in spec.f.iter().chain(&spec.g) {
            assert_eq!(poly.terms.len(), 2);
            for t in &poly.terms {
                assert_eq!(t.degree % 2, 1);
                assert!(t.coefficient.abs() >= MIN_COEFFICIENT && t.coefficient.abs() <= 1.0);
            }
        }
        assert!(spec.f.iter().flat_map(|p| &p.terms).all(|t| t.basis == Basis::Chebyshev));
        assert!(spec.g.iter().flat_map(|p| &p.terms).all(|t| t.basis == Basis::Legendre));
    }

    #[test]
    fn generate_is_deterministic() {
        let params = GenParams::default();
        let a = TransformationSpec::generate(&mut ChaCha8Rng::seed_from_u64(1235), 0, 4, &params);
        let b = TransformationSpec::generate(&mut ChaCha8Rng::seed_from_u64(1235), 0, 4, &params);
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn generate_degree_one_only() {
        let params = GenParams {
            max_degree: 1,
            chain_length: 1,
            divide_factor: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7234);
        let spec = TransformationSpec::generate(&mut rng, 3, 2, &params).unwrap();
        assert!(spec.f.iter().chain(&spec.g).flat_map(|p| &p.terms).all(|t| t.degree == 1));
    }

    #[test]
    fn generate_rejects_odd_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = TransformationSpec::generate(&mut rng, 0, 3, &GenParams::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn identity_degenerate() {
        let spec = identity_spec();
        assert_eq!(spec.forward(&[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
        assert_eq!(spec.invert(&[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn worked_example_forward_and_back() {
        let spec = worked_example();
        let y = spec.forward(&[0.2, 0.1]).unwrap();
        assert_eq!(y[0], 0.2);
        assert!((y[1] - 2.1).abs() < 1e-15);
        let x = spec.invert(&y).unwrap();
        assert!((x[0] - 0.2).abs() < 1e-15);
        assert!((x[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn batch_matches_rows() {
        let spec = worked_example();
        let xs = array![[0.2, 0.1], [0.2, 0.1], [0.2, 0.1]];
        let ys = spec.forward_batch(xs.view()).unwrap();
        for row in ys.rows() {
            assert_eq!(row.to_vec(), spec.forward(&[0.2, 0.1]).unwrap());
        }
        let mixed = array![[1.0, 2.0], [-0.5, 0.25]];
        let ys = spec.forward_batch(mixed.view()).unwrap();
        assert_eq!(ys.row(1).to_vec(), spec.forward(&[-0.5, 0.25]).unwrap());
    }

    #[test]
    fn empty_batch() {
        let spec = worked_example();
        let xs = Array2::<f64>::zeros((0, 2));
        assert_eq!(spec.forward_batch(xs.view()).unwrap().nrows(), 0);
    }

    #[test]
    fn batch_overflow_names_row() {
        let spec = TransformationSpec {
            g: vec![single(Basis::Legendre, 9, 1.0)],
            ..worked_example()
        };
        let xs = array![[0.1, 0.1], [1e40, 0.0], [1e300, 0.0]];
        match spec.forward_batch(xs.view()).unwrap_err() {
            Error::RowOverflow { row, source } => {
                assert_eq!(row, 1);
                assert!(matches!(*source, Error::Overflow { spec_id: 0, .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
        let (_, flags) = spec.forward_batch_flagged(xs.view()).unwrap();
        assert_eq!(flags, vec![false, true, true]);
    }

    #[test]
    fn absorption_is_counted() {
        let spec = TransformationSpec {
            f: vec![single(Basis::Chebyshev, 1, 1.0)],
            g: vec![single(Basis::Legendre, 9, 1.0)],
            ..worked_example()
        };
        // y2 = 0 + 10 * 1e3 = 1e4; G(1e4) ~ 1e31 swallows x[0].
        let (_, abs) = spec.forward_with_absorption(&[1e3, 0.0]).unwrap();
        assert_eq!(abs.events, 1);
        let (_, abs) = spec.forward_with_absorption(&[0.5, 0.25]).unwrap();
        assert_eq!(abs.events, 0);
    }

    #[test]
    fn dimension_mismatch() {
        let spec = worked_example();
        assert!(matches!(spec.forward(&[1.0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(spec.invert(&[1.0, 2.0, 3.0]), Err(Error::InvalidArgument(_))));
    }
}
