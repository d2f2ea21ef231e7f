//! Exhaustive and independently computed checks in the order-83 group.

use std::collections::HashMap;

use privocracy_crypto::{
    commit, commit_weighted_combine, interpolate, share_linear_combine, Dealing, ModQ, Polynomial,
    Scalar, Share, Tiny83,
};

type F = ModQ<83>;

const P: u64 = 167;
const Q: u64 = 83;

fn naive_pow(b: u64, e: u64) -> u64 {
    (0..e).fold(1, |acc, _| acc * b % P)
}

fn poly(c: &[u64]) -> Polynomial<F> {
    Polynomial::new(c.iter().map(|v| F::from_u64(*v)).collect())
}

#[test]
fn generators_have_order_exactly_83() {
    for g in [4u64, 9] {
        let order = (1..=P).find(|e| naive_pow(g, *e) == 1).unwrap();
        assert_eq!(order, Q);
    }
}

#[test]
fn commitment_homomorphism_matches_naive_products() {
    let lhs = commit::<Tiny83>(&F::from_u64(1), &F::from_u64(2))
        .combine(&commit::<Tiny83>(&F::from_u64(0), &F::from_u64(3)));
    let rhs = commit::<Tiny83>(&F::from_u64(1), &F::from_u64(5));
    assert_eq!(lhs, rhs);
    assert_eq!(lhs.0.value(), 4 * naive_pow(9, 5) % P);
}

#[test]
fn hiding_every_element_appears_once_per_value() {
    for x in 0..Q {
        let mut seen: HashMap<u64, u32> = HashMap::new();
        for r in 0..Q {
            *seen.entry(commit::<Tiny83>(&F::from_u64(x), &F::from_u64(r)).0.value()).or_default() += 1;
        }
        assert_eq!(seen.len() as u64, Q);
        assert!(seen.values().all(|n| *n == 1));
    }
}

/// In a group this small collisions exist, but every one of them reveals
/// `log_g h`: binding is exactly as strong as the discrete log.
#[test]
fn every_commitment_collision_yields_the_discrete_log() {
    let log_h = (0..Q).find(|e| naive_pow(4, *e) == 9).unwrap();
    let mut by_value: HashMap<u64, (u64, u64)> = HashMap::new();
    let mut collisions = 0;
    for x in 0..Q {
        for r in 0..Q {
            let c = commit::<Tiny83>(&F::from_u64(x), &F::from_u64(r)).0.value();
            if let Some((x0, r0)) = by_value.insert(c, (x, r)) {
                collisions += 1;
                assert_ne!(x0, x);
                let dx = F::from_u64(x0) - F::from_u64(x);
                let dr = F::from_u64(r) - F::from_u64(r0);
                assert_eq!(dx * dr.invert().unwrap(), F::from_u64(log_h));
            }
        }
    }
    assert!(collisions > 0);
}

#[test]
fn weighted_combination_of_two_sharings() {
    let a = Dealing::<Tiny83> { vote: poly(&[1, 10]), blinding: poly(&[7, 3]) };
    let b = Dealing::<Tiny83> { vote: poly(&[0, 40]), blinding: poly(&[2, 50]) };
    let combined: Vec<Share<Tiny83>> = (1..=3)
        .map(|i| share_linear_combine(&[(a.share(i), 5), (b.share(i), 3)]).unwrap())
        .collect();

    // Oracle: evaluate 5*fa + 3*fb by hand.
    for (i, s) in combined.iter().enumerate() {
        let x = i as u64 + 1;
        let v = (5 * (1 + 10 * x) + 3 * (40 * x)) % Q;
        let bl = (5 * (7 + 3 * x) + 3 * (2 + 50 * x)) % Q;
        assert_eq!((s.value.value(), s.blinding.value()), (v, bl));
    }
    let (tally, blind) = interpolate(&combined[1..], 2).unwrap();
    assert_eq!(tally, F::from_u64(5));
    assert_eq!(blind, F::from_u64((5 * 7 + 3 * 2) % Q));

    let vc = commit_weighted_combine(&[(a.commitment(), 5), (b.commitment(), 3)]).unwrap();
    let implied = Dealing::<Tiny83> {
        vote: poly(&[5, (50 + 120) % Q]),
        blinding: poly(&[(35 + 6) % Q, (15 + 150) % Q]),
    };
    assert_eq!(vc, implied.commitment());
    assert!(combined.iter().all(|s| s.verify(&vc)));
}

/// For every set of `k-1` indices, tabulate the shares produced by all
/// polynomials with a given secret: each share tuple must occur exactly
/// once for secret 0 and exactly once for secret 1.
#[test]
fn any_k_minus_1_shares_are_consistent_with_both_secrets() {
    let n = 5u64;
    for k in 1..=3usize {
        let subsets: Vec<Vec<u64>> = match k - 1 {
            0 => vec![vec![]],
            1 => (1..=n).map(|i| vec![i]).collect(),
            _ => (1..=n).flat_map(|i| (i + 1..=n).map(move |j| vec![i, j])).collect(),
        };
        for idx in &subsets {
            for secret in [0u64, 1] {
                let mut table: HashMap<Vec<u64>, u32> = HashMap::new();
                let free = (k - 1) as u32;
                for code in 0..Q.pow(free) {
                    let mut coeffs = vec![secret];
                    let mut c = code;
                    for _ in 0..free {
                        coeffs.push(c % Q);
                        c /= Q;
                    }
                    let shares = idx
                        .iter()
                        .map(|x| coeffs.iter().rev().fold(0, |acc, a| (acc * x + a) % Q))
                        .collect();
                    *table.entry(shares).or_default() += 1;
                }
                assert_eq!(table.len() as u64, Q.pow(free));
                assert!(table.values().all(|c| *c == 1));
            }
        }
    }
}
