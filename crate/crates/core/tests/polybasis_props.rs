use num_rational::Ratio;
use proptest::prelude::*;
use sortad::polybasis::{nonconstant_degrees, Basis, PolyTerm};

/// Monomial coefficients `c_0..c_n` of T_n, n <= 10.
const CHEBYSHEV: [&[i64]; 11] = [
    &[1],
    &[0, 1],
    &[-1, 0, 2],
    &[0, -3, 0, 4],
    &[1, 0, -8, 0, 8],
    &[0, 5, 0, -20, 0, 16],
    &[-1, 0, 18, 0, -48, 0, 32],
    &[0, -7, 0, 56, 0, -112, 0, 64],
    &[1, 0, -32, 0, 160, 0, -256, 0, 128],
    &[0, 9, 0, -120, 0, 432, 0, -576, 0, 256],
    &[-1, 0, 50, 0, -400, 0, 1120, 0, -1280, 0, 512],
];

/// Numerators and common denominator of P_n, n <= 10.
const LEGENDRE: [(&[i64], i64); 11] = [
    (&[1], 1),
    (&[0, 1], 1),
    (&[-1, 0, 3], 2),
    (&[0, -3, 0, 5], 2),
    (&[3, 0, -30, 0, 35], 8),
    (&[0, 15, 0, -70, 0, 63], 8),
    (&[-5, 0, 105, 0, -315, 0, 231], 16),
    (&[0, -35, 0, 315, 0, -693, 0, 429], 16),
    (&[35, 0, -1260, 0, 6930, 0, -12012, 0, 6435], 128),
    (&[0, 315, 0, -4620, 0, 18018, 0, -25740, 0, 12155], 128),
    (&[-63, 0, 3465, 0, -30030, 0, 90090, 0, -109395, 0, 46189], 256),
];

fn table(basis: Basis, n: usize) -> Vec<f64> {
    match basis {
        Basis::Chebyshev => CHEBYSHEV[n].iter().map(|&c| c as f64).collect(),
        Basis::Legendre => {
            let (num, den) = LEGENDRE[n];
            num.iter().map(|&c| c as f64 / den as f64).collect()
        }
    }
}

/// Horner evaluation plus a bound on its magnitude for the error scale.
fn monomial_eval(coeffs: &[f64], x: f64) -> (f64, f64) {
    let value = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let scale = coeffs.iter().rev().fold(0.0, |acc, c: &f64| acc * x.abs() + c.abs());
    (value, scale)
}

#[test]
fn exact_expansions_match_table() {
    for n in 0..=10u32 {
        let cheb = Basis::Chebyshev.monomial_expansion(n).unwrap();
        let want: Vec<Ratio<i128>> = CHEBYSHEV[n as usize].iter().map(|&c| Ratio::from_integer(c as i128)).collect();
        assert_eq!(cheb, want, "T_{n}");
        let (num, den) = LEGENDRE[n as usize];
        let want: Vec<Ratio<i128>> = num.iter().map(|&c| Ratio::new(c as i128, den as i128)).collect();
        assert_eq!(Basis::Legendre.monomial_expansion(n).unwrap(), want, "P_{n}");
    }
}

#[test]
fn nonconstant_degrees_have_zero_constant_term() {
    for basis in [Basis::Chebyshev, Basis::Legendre] {
        let degrees = nonconstant_degrees(basis, 40).unwrap();
        assert!(!degrees.is_empty());
        for d in degrees {
            let c0 = basis.monomial_expansion(d).unwrap()[0];
            assert_eq!(c0, Ratio::from_integer(0), "{basis} degree {d}");
        }
    }
}

proptest! {
    #[test]
    fn recurrence_matches_monomials(n in 0usize..=10, x in -3.0f64..=3.0, legendre in any::<bool>()) {
        let basis = if legendre { Basis::Legendre } else { Basis::Chebyshev };
        let (want, scale) = monomial_eval(&table(basis, n), x);
        let got = basis.eval(n as u32, x);
        // Relative to the magnitude Horner itself can resolve.
        prop_assert!((got - want).abs() <= 1e-10 * scale.max(1.0), "{basis} {n} at {x}: {got} vs {want}");
    }

    #[test]
    fn terms_are_odd(
        legendre in any::<bool>(),
        pick in 0usize..5,
        coefficient in prop_oneof![-1.0f64..=-0.05, 0.05f64..=1.0],
        x in -3.0f64..=3.0,
    ) {
        let basis = if legendre { Basis::Legendre } else { Basis::Chebyshev };
        let degrees = nonconstant_degrees(basis, 10).unwrap();
        let term = PolyTerm::new(basis, degrees[pick % degrees.len()], coefficient, 2).unwrap();
        let (a, b) = (term.apply(x).unwrap(), term.apply(-x).unwrap());
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
