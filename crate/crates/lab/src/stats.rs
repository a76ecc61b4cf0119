//! Goodness-of-fit helpers built on `statrs`.

use ist_core::scale::PopulationLaw;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Smallest expected count per chi-square bin.
pub const MIN_EXPECTED: f64 = 5.0;

/// Population counts `low..=high` (`high = None` is open-ended).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofBin {
    pub low: usize,
    pub high: Option<usize>,
    pub observed: usize,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gof {
    pub bins: Vec<GofBin>,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub replicas: usize,
}

impl Gof {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Pearson chi-square test of observed populations against `law`.
///
/// Consecutive values are pooled until each bin expects at least
/// [`MIN_EXPECTED`] observations; the last bin is open-ended.
pub fn population_gof(law: &PopulationLaw, counts: &[usize]) -> Gof {
    let n = counts.len() as f64;
    let mut edges: Vec<(usize, Option<usize>, f64)> = Vec::new();
    let (mut low, mut acc, mut closed) = (0usize, 0.0f64, 0.0f64);
    let mut k = 0usize;
    loop {
        acc += n * law.pmf(k);
        let rest = n - closed - acc;
        if rest < MIN_EXPECTED || k >= 1_000_000 {
            let tail = n - closed;
            match edges.last_mut() {
                Some(last) if tail < MIN_EXPECTED => {
                    last.1 = None;
                    last.2 += tail;
                }
                _ => edges.push((low, None, tail)),
            }
            break;
        }
        if acc >= MIN_EXPECTED {
            edges.push((low, Some(k), acc));
            closed += acc;
            acc = 0.0;
            low = k + 1;
        }
        k += 1;
    }
    let bins: Vec<GofBin> = edges
        .into_iter()
        .map(|(low, high, expected)| GofBin {
            low,
            high,
            observed: counts
                .iter()
                .filter(|&&c| c >= low && high.map_or(true, |h| c <= h))
                .count(),
            expected,
        })
        .collect();
    let statistic: f64 = bins
        .iter()
        .map(|b| {
            let d = b.observed as f64 - b.expected;
            d * d / b.expected
        })
        .sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .expect("positive degrees of freedom")
            .sf(statistic)
    };
    Gof {
        bins,
        statistic,
        dof,
        p_value,
        replicas: counts.len(),
    }
}
