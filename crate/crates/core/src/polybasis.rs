//! Chebyshev and Legendre basis elements used by the coupling transformations.
//!
//! Every generated term is restricted to basis elements whose monomial
//! expansion has a zero constant term, and is scaled by `10^(h - degree)` so
//! that high-degree elements stay in range on robust-scaled inputs.

use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest degree for which exact monomial expansion is supported.
pub const MAX_SUPPORTED_DEGREE: u32 = 40;

/// Default divide-factor exponent `h`.
pub const DEFAULT_DIVIDE_FACTOR: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Chebyshev,
    Legendre,
}

impl Basis {
    pub fn eval(self, degree: u32, x: f64) -> f64 {
        match self {
            Basis::Chebyshev => eval_chebyshev(degree, x),
            Basis::Legendre => eval_legendre(degree, x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::Chebyshev => "chebyshev",
            Basis::Legendre => "legendre",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "chebyshev" => Some(Basis::Chebyshev),
            "legendre" => Some(Basis::Legendre),
            _ => None,
        }
    }

    /// Exact monomial coefficients `[c_0, c_1, ..., c_degree]` of the basis element.
    pub fn monomial_expansion(self, degree: u32) -> Result<Vec<Ratio<i128>>> {
        if degree > MAX_SUPPORTED_DEGREE {
            return Err(Error::invalid(format!(
                "degree {degree} exceeds supported maximum {MAX_SUPPORTED_DEGREE}"
            )));
        }
        let one = Ratio::from_integer(1i128);
        let mut prev = vec![one];
        if degree == 0 {
            return Ok(prev);
        }
        let mut cur = vec![Ratio::zero(), one];
        for n in 2..=degree as i128 {
            // Chebyshev: T_n = 2x T_{n-1} - T_{n-2}
            // Legendre:  n P_n = (2n-1) x P_{n-1} - (n-1) P_{n-2}
            let (a, b) = match self {
                Basis::Chebyshev => (Ratio::from_integer(2), Ratio::from_integer(1)),
                Basis::Legendre => (Ratio::new(2 * n - 1, n), Ratio::new(n - 1, n)),
            };
            let mut next = vec![Ratio::zero(); n as usize + 1];
            for (k, c) in cur.iter().enumerate() {
                next[k + 1] += a * c;
            }
            for (k, c) in prev.iter().enumerate() {
                next[k] -= b * c;
            }
            prev = std::mem::replace(&mut cur, next);
        }
        Ok(cur)
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `T_degree(x)` by the three-term recurrence.
pub fn eval_chebyshev(degree: u32, x: f64) -> f64 {
    match degree {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 2..=degree {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `P_degree(x)` by Bonnet's recurrence.
pub fn eval_legendre(degree: u32, x: f64) -> f64 {
    match degree {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for n in 2..=degree {
                let n = n as f64;
                let next = ((2.0 * n - 1.0) * x * cur - (n - 1.0) * prev) / n;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Degrees in `[1, max_degree]` whose basis element has no constant term.
pub fn nonconstant_degrees(basis: Basis, max_degree: u32) -> Result<Vec<u32>> {
    if max_degree < 1 {
        return Err(Error::invalid("max_degree must be at least 1"));
    }
    let mut out = Vec::new();
    for degree in 1..=max_degree {
        if basis.monomial_expansion(degree)?[0].is_zero() {
            out.push(degree);
        }
    }
    Ok(out)
}

/// One scaled basis element: `coefficient * B_degree(x) / 10^(degree - h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub basis: Basis,
    pub degree: u32,
    pub coefficient: f64,
    /// `degree - h`.
    pub divide_exponent: i32,
}

/// A term evaluated to a non-finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct NonFiniteTerm {
    pub term: PolyTerm,
    pub input: f64,
    pub value: f64,
}

impl fmt::Display for NonFiniteTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} degree {} (coefficient {}, divide 10^{}) at x = {} gave {}",
            self.term.basis,
            self.term.degree,
            self.term.coefficient,
            self.term.divide_exponent,
            self.input,
            self.value
        )
    }
}

impl PolyTerm {
    pub fn new(basis: Basis, degree: u32, coefficient: f64, divide_factor: i32) -> Result<Self> {
        if !(1..=MAX_SUPPORTED_DEGREE).contains(&degree) {
            return Err(Error::invalid(format!("term degree {degree} out of range")));
        }
        if !coefficient.is_finite() {
            return Err(Error::invalid("term coefficient must be finite"));
        }
        Ok(PolyTerm {
            basis,
            degree,
            coefficient,
            divide_exponent: degree as i32 - divide_factor,
        })
    }

    /// Effective multiplier `coefficient / 10^(degree - h)`.
    pub fn scale(&self) -> f64 {
        self.coefficient * 10f64.powi(-self.divide_exponent)
    }

    pub fn apply(&self, x: f64) -> std::result::Result<f64, NonFiniteTerm> {
        let value = self.scale() * self.basis.eval(self.degree, x);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(NonFiniteTerm {
                term: *self,
                input: x,
                value,
            })
        }
    }
}
