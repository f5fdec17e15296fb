use crate::env::DiscreteReturnDistribution;
use crate::error::{Error, Result};

/// Exact 1-Wasserstein distance: the integral of `|F_a - F_b|` over the
/// merged support, evaluated piecewise between consecutive atoms.
pub fn wasserstein1(a: &DiscreteReturnDistribution, b: &DiscreteReturnDistribution) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("distribution"));
    }
    let mut xs: Vec<f64> = a.support().iter().chain(b.support()).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let (sa, pa) = (a.support(), a.probs());
    let (sb, pb) = (b.support(), b.probs());
    let (mut ia, mut ib) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut total = 0.0;
    for w in xs.windows(2) {
        while ia < sa.len() && sa[ia] <= w[0] {
            fa += pa[ia];
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= w[0] {
            fb += pb[ib];
            ib += 1;
        }
        total += (fa - fb).abs() * (w[1] - w[0]);
    }
    Ok(total)
}

/// W1 between two empirical samples.
pub fn wasserstein1_samples(a: &[f64], b: &[f64]) -> Result<f64> {
    wasserstein1(
        &DiscreteReturnDistribution::from_samples(a)?,
        &DiscreteReturnDistribution::from_samples(b)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(atoms: &[(f64, f64)]) -> DiscreteReturnDistribution {
        DiscreteReturnDistribution::from_atoms(atoms.to_vec()).unwrap()
    }

    #[test]
    fn identity_and_translation() {
        let x = d(&[(-1.0, 0.5), (2.0, 0.5)]);
        assert_eq!(wasserstein1(&x, &x).unwrap(), 0.0);
        let w = wasserstein1(&DiscreteReturnDistribution::point(0.0), &DiscreteReturnDistribution::point(1.0)).unwrap();
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shift_equals_mean_difference() {
        let x = d(&[(0.0, 0.2), (1.0, 0.3), (4.0, 0.5)]);
        let y = d(&[(0.5, 0.2), (1.5, 0.3), (4.5, 0.5)]);
        assert!((wasserstein1(&x, &y).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn samples() {
        let w = wasserstein1_samples(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((w - 0.25).abs() < 1e-12);
        assert!(wasserstein1_samples(&[], &[1.0]).is_err());
    }

    fn arb_dist() -> impl Strategy<Value = DiscreteReturnDistribution> {
        proptest::collection::vec((-5i32..5, 1u32..10), 1..5).prop_map(|atoms| {
            let total: u32 = atoms.iter().map(|a| a.1).sum();
            d(&atoms
                .iter()
                .map(|&(x, w)| (x as f64 * 0.5, w as f64 / total as f64))
                .collect::<Vec<_>>())
        })
    }

    proptest! {
        #[test]
        fn metric_axioms(a in arb_dist(), b in arb_dist(), c in arb_dist()) {
            let ab = wasserstein1(&a, &b).unwrap();
            let ba = wasserstein1(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            let ac = wasserstein1(&a, &c).unwrap();
            let cb = wasserstein1(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9);
            prop_assert_eq!(ab == 0.0, a == b);
        }
    }
}
