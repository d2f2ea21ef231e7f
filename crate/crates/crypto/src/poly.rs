use rand::RngCore;

use crate::group::Scalar;

/// A polynomial over `Z_q`, lowest-degree coefficient first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial<S: Scalar> {
    pub coeffs: Vec<S>,
}

impl<S: Scalar> Polynomial<S> {
    pub fn new(coeffs: Vec<S>) -> Self {
        Polynomial { coeffs }
    }

    /// A uniformly random polynomial of the given degree with fixed constant term.
    pub fn random<R: RngCore + ?Sized>(constant: S, degree: usize, rng: &mut R) -> Self {
        let mut coeffs = Vec::with_capacity(degree + 1);
        coeffs.push(constant);
        coeffs.extend((0..degree).map(|_| S::random(rng)));
        Polynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn evaluate(&self, x: &S) -> S {
        self.coeffs
            .iter()
            .rev()
            .fold(S::zero(), |acc, c| acc * *x + *c)
    }

    pub fn evaluate_at(&self, x: u64) -> S {
        self.evaluate(&S::from_u64(x))
    }
}

/// Lagrange interpolation of the unique polynomial through `points`,
/// evaluated at `at`. Returns `None` if two points share an abscissa.
pub fn interpolate_at<S: Scalar>(points: &[(S, S)], at: &S) -> Option<S> {
    let mut acc = S::zero();
    for (i, (xi, yi)) in points.iter().enumerate() {
        let mut num = S::one();
        let mut den = S::one();
        for (j, (xj, _)) in points.iter().enumerate() {
            if i != j {
                num = num * (*at - *xj);
                den = den * (*xi - *xj);
            }
        }
        acc = acc + *yi * num * den.invert()?;
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ModQ;

    type F = ModQ<83>;

    #[test]
    fn evaluates_with_horner() {
        let p = Polynomial::new(vec![F::from_u64(1), F::from_u64(2), F::from_u64(3)]);
        assert_eq!(p.evaluate_at(2), F::from_u64(17));
        assert_eq!(p.evaluate_at(10), F::from_u64(321 % 83));
    }

    #[test]
    fn interpolation_recovers_any_point() {
        let p = Polynomial::new(vec![F::from_u64(5), F::from_u64(70), F::from_u64(9)]);
        let pts: Vec<_> = [3u64, 8, 40]
            .iter()
            .map(|x| (F::from_u64(*x), p.evaluate_at(*x)))
            .collect();
        for at in 0..83 {
            assert_eq!(interpolate_at(&pts, &F::from_u64(at)), Some(p.evaluate_at(at)));
        }
    }

    #[test]
    fn duplicate_abscissae_fail() {
        let pts = [(F::from_u64(1), F::from_u64(2)), (F::from_u64(1), F::from_u64(3))];
        assert_eq!(interpolate_at(&pts, &F::zero()), None);
    }
}
