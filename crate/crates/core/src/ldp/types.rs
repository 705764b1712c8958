use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::maxent::Target;
use crate::measures::{FiniteDistribution, Potential};
use crate::numeric::{binomial, TIE_TOL};

/// Largest type-class table that will be materialized.
pub const MAX_TABLE_ENTRIES: u128 = 10_000_000;

/// Number of compositions of `n` into `k` parts, `C(n + k − 1, k − 1)`.
pub fn table_size(k: usize, n: usize) -> u128 {
    binomial((n + k - 1) as u64, (k - 1) as u64)
}

pub fn check_table_size(k: usize, n: usize) -> Result<()> {
    let size = table_size(k, n);
    if size > MAX_TABLE_ENTRIES {
        return Err(Error::TableTooLarge {
            size,
            limit: MAX_TABLE_ENTRIES,
        });
    }
    Ok(())
}

/// Calls `f` on every composition of `n` into `k` non-negative parts, starting
/// at `(n, 0, ..., 0)` and proceeding in reverse lexicographic order.
pub fn for_each_composition(k: usize, n: usize, mut f: impl FnMut(&[u32])) {
    let mut c = vec![0u32; k];
    c[0] = n as u32;
    loop {
        f(&c);
        if k == 1 {
            return;
        }
        let Some(j) = (0..k - 1).rev().find(|&j| c[j] > 0) else {
            return;
        };
        c[j] -= 1;
        let tail = c[k - 1] + 1;
        c[k - 1] = 0;
        c[j + 1] = tail;
    }
}

/// `Σ_i V_i c_i / n`.
pub fn type_mean(counts: &[u32], v: &[f64], n: usize) -> f64 {
    counts
        .iter()
        .zip(v)
        .map(|(&c, &vi)| c as f64 * vi)
        .sum::<f64>()
        / n as f64
}

/// Membership of a type mean in a target set, with a `1e−12` relative slack.
pub fn in_window(mean: f64, target: &Target) -> bool {
    let (lo, hi) = target.bounds();
    mean >= lo - TIE_TOL * (1.0 + lo.abs()) && mean <= hi + TIE_TOL * (1.0 + hi.abs())
}

/// Every type class of size `n` with its exact multinomial log-probability.
#[derive(Debug, Clone)]
pub struct TypeClassTable {
    k: usize,
    n: usize,
    counts: Vec<u32>,
    log_probs: Vec<f64>,
}

/// Enumerates all `C(n + k − 1, k − 1)` type classes of size `n` under `p`.
pub fn enumerate_types(p: &FiniteDistribution, n: usize) -> Result<TypeClassTable> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let k = p.len();
    check_table_size(k, n)?;
    let ln_fact: Vec<f64> = (0..=n).map(|i| ln_gamma(i as f64 + 1.0)).collect();
    let ln_p: Vec<f64> = p.weights().iter().map(|w| w.ln()).collect();
    let size = table_size(k, n) as usize;
    let mut counts = Vec::with_capacity(size * k);
    let mut log_probs = Vec::with_capacity(size);
    for_each_composition(k, n, |c| {
        let mut lp = ln_fact[n];
        for (&ci, &lpi) in c.iter().zip(&ln_p) {
            if ci > 0 {
                lp += ci as f64 * lpi - ln_fact[ci as usize];
            }
        }
        if lp.is_nan() {
            lp = f64::NEG_INFINITY;
        }
        counts.extend_from_slice(c);
        log_probs.push(lp);
    });
    Ok(TypeClassTable {
        k,
        n,
        counts,
        log_probs,
    })
}

impl TypeClassTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn counts(&self, i: usize) -> &[u32] {
        &self.counts[i * self.k..(i + 1) * self.k]
    }

    pub fn log_prob(&self, i: usize) -> f64 {
        self.log_probs[i]
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn frequencies(&self, i: usize) -> Vec<f64> {
        self.counts(i)
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect()
    }

    /// `V · (counts / n)` for entry `i`.
    pub fn mean(&self, i: usize, v: &Potential) -> f64 {
        type_mean(self.counts(i), v.values(), self.n)
    }

    /// `ln Σ` of all entry probabilities (zero for an exact table).
    pub fn log_total(&self) -> f64 {
        crate::numeric::log_sum_exp(self.log_probs.iter().copied())
    }
}

/// True when no type class of size `n` supported by `p` has its mean in `target`.
pub fn event_is_empty(p: &FiniteDistribution, v: &Potential, target: &Target, n: usize) -> Result<bool> {
    v.check_len(p.len())?;
    let supp = p.support();
    check_table_size(supp.len(), n)?;
    let vs: Vec<f64> = supp.iter().map(|&i| v.values()[i]).collect();
    let mut empty = true;
    for_each_composition(supp.len(), n, |c| {
        if empty && in_window(type_mean(c, &vs, n), target) {
            empty = false;
        }
    });
    Ok(empty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Alphabet;

    #[test]
    fn binomial_tables() {
        let u2 = FiniteDistribution::uniform(Alphabet::indexed(2));
        let t = enumerate_types(&u2, 2).unwrap();
        assert_eq!(t.len(), 3);
        let probs: Vec<f64> = t.log_probs().iter().map(|l| l.exp()).collect();
        for (a, b) in probs.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-14);
        }
        let p = FiniteDistribution::from_weights(vec![0.3, 0.7]).unwrap();
        let t = enumerate_types(&p, 1).unwrap();
        assert_eq!(t.len(), 2);
        assert!((t.log_prob(0).exp() - 0.3).abs() < 1e-15);
        assert!((t.log_prob(1).exp() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn ternary_table() {
        let u3 = FiniteDistribution::uniform(Alphabet::indexed(3));
        let t = enumerate_types(&u3, 4).unwrap();
        assert_eq!(t.len(), 15);
        assert_eq!(t.counts(0), &[4, 0, 0]);
        assert!((t.log_prob(0).exp() - 1.0 / 81.0).abs() < 1e-14);
        assert!((t.log_prob(0).exp() - 0.012346).abs() < 1e-6);
    }

    #[test]
    fn total_mass_is_one_on_the_grid() {
        for k in 1..=4 {
            let w: Vec<f64> = (1..=k).map(|i| i as f64).collect();
            let s: f64 = w.iter().sum();
            let p = FiniteDistribution::from_weights(w.iter().map(|x| x / s).collect()).unwrap();
            for n in 1..=60 {
                let t = enumerate_types(&p, n).unwrap();
                assert_eq!(t.len() as u128, table_size(k, n));
                assert!(t.log_total().abs() <= 1e-9, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn compositions_are_distinct_and_complete() {
        let mut seen = std::collections::HashSet::new();
        for_each_composition(4, 6, |c| {
            assert_eq!(c.iter().sum::<u32>(), 6);
            assert!(seen.insert(c.to_vec()));
        });
        assert_eq!(seen.len() as u128, table_size(4, 6));
    }

    #[test]
    fn zero_mass_symbols() {
        let p = FiniteDistribution::from_weights(vec![1.0, 0.0]).unwrap();
        let t = enumerate_types(&p, 3).unwrap();
        assert_eq!(t.log_prob(0), 0.0);
        assert!(t.log_probs()[1..].iter().all(|l| *l == f64::NEG_INFINITY));
    }

    #[test]
    fn guard() {
        assert_eq!(table_size(4, 500), 21_084_251);
        let p = FiniteDistribution::uniform(Alphabet::indexed(4));
        assert_eq!(
            enumerate_types(&p, 500).unwrap_err(),
            Error::TableTooLarge { size: 21_084_251, limit: MAX_TABLE_ENTRIES }
        );
    }

    #[test]
    fn parity_empty_event() {
        let p = FiniteDistribution::uniform(Alphabet::indexed(2));
        let v = Potential::new(vec![0.0, 1.0]).unwrap();
        let half = Target::Interval(0.5, 0.5);
        assert!(event_is_empty(&p, &v, &half, 7).unwrap());
        assert!(!event_is_empty(&p, &v, &half, 8).unwrap());
    }
}
