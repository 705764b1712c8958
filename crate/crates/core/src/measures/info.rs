use super::{FiniteDistribution, Potential};
use crate::error::{Error, Result};

/// Relative entropy `D(p ‖ q)` in nats.
pub fn kl_divergence(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    p.check_same_alphabet(q)?;
    let mut d = 0.0;
    for (i, (&pi, &qi)) in p.weights().iter().zip(q.weights()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::AbsoluteContinuityViolation { index: i });
        }
        d += pi * (pi / qi).ln();
    }
    // Gibbs' inequality; clamp round-off
    Ok(d.max(0.0))
}

/// Shannon entropy `-Σ p ln p` in nats.
pub fn shannon_entropy(p: &FiniteDistribution) -> f64 {
    let h: f64 = p
        .weights()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.ln())
        .sum();
    h.clamp(0.0, (p.len() as f64).ln())
}

/// `Σ_i V_i μ_i`.
pub fn expected_loss(measure: &FiniteDistribution, potential: &Potential) -> Result<f64> {
    potential.check_len(measure.len())?;
    Ok(dot(measure.weights(), potential.values()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Alphabet;
    use proptest::prelude::*;

    fn d(w: &[f64]) -> FiniteDistribution {
        FiniteDistribution::from_weights(w.to_vec()).unwrap()
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&d(&[0.3, 0.7]), &d(&[0.3, 0.7])).unwrap(), 0.0);
        // 0.75 ln 1.5 + 0.25 ln 0.5
        let v = kl_divergence(&d(&[0.75, 0.25]), &d(&[0.5, 0.5])).unwrap();
        assert!((v - 0.130812).abs() < 1e-6);
        assert!((v - (0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln())).abs() < 1e-15);
        assert_eq!(
            kl_divergence(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap_err(),
            Error::AbsoluteContinuityViolation { index: 0 }
        );
        assert!(matches!(
            kl_divergence(&d(&[0.5, 0.5]), &d(&[0.2, 0.3, 0.5])),
            Err(Error::AlphabetMismatch { .. })
        ));
    }

    #[test]
    fn entropy_examples() {
        let u = FiniteDistribution::uniform(Alphabet::indexed(4));
        assert!((shannon_entropy(&u) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(shannon_entropy(&d(&[0.0, 1.0, 0.0])), 0.0);
        assert!((shannon_entropy(&d(&[0.75, 0.25])) - 0.562335).abs() < 1e-6);
    }

    #[test]
    fn expected_loss_examples() {
        let v = Potential::new(vec![0.0, 1.0, 2.0]).unwrap();
        let u = FiniteDistribution::uniform(Alphabet::indexed(3));
        assert!((expected_loss(&u, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(expected_loss(&d(&[1.0, 0.0, 0.0]), &v).unwrap(), 0.0);
        let tilted = d(&[0.6162, 0.2676, 0.1162]);
        assert!((expected_loss(&tilted, &v).unwrap() - 0.5).abs() < 1e-3);
        assert!(expected_loss(&d(&[0.5, 0.5]), &v).is_err());
    }

    fn dist_strategy(k: usize) -> impl Strategy<Value = FiniteDistribution> {
        proptest::collection::vec(0.01f64..1.0, k).prop_map(|w| {
            let s: f64 = w.iter().sum();
            FiniteDistribution::from_weights(w.iter().map(|x| x / s).collect()).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn kl_is_non_negative((p, q) in (2usize..7).prop_flat_map(|k| (dist_strategy(k), dist_strategy(k)))) {
            prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        }

        #[test]
        fn kl_vanishes_only_on_equality((p, q) in (2usize..7).prop_flat_map(|k| (dist_strategy(k), dist_strategy(k)))) {
            prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
            let tv = p.total_variation(&q).unwrap();
            let kl = kl_divergence(&p, &q).unwrap();
            // Pinsker: a visible TV gap forces a strictly positive divergence
            if tv > 1e-6 {
                prop_assert!(kl >= 2.0 * tv * tv * (1.0 - 1e-9));
                prop_assert!(kl > 0.0);
            }
        }

        #[test]
        fn expected_loss_is_linear(
            (p, q) in (3usize..=3).prop_flat_map(|k| (dist_strategy(k), dist_strategy(k))),
            alpha in 0.0f64..=1.0,
            v in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let v = Potential::new(v).unwrap();
            let m = p.mix(&q, alpha).unwrap();
            let lhs = expected_loss(&m, &v).unwrap();
            let rhs = alpha * expected_loss(&p, &v).unwrap() + (1.0 - alpha) * expected_loss(&q, &v).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
