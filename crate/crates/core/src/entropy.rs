//! Shannon entropy over count distributions, in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign convention for `Σ p log2 p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropySign {
    /// `-Σ p log2 p`: grows with diversity.
    #[default]
    Negated,
    /// `Σ p log2 p` without the leading minus (non-positive).
    AsPrinted,
}

/// Entropy of a list of non-negative counts. Zero counts contribute nothing.
pub fn entropy_bits<I>(counts: I, sign: EntropySign) -> Result<f64>
where
    I: IntoIterator<Item = u64>,
{
    // summed in ascending order so relabeling clusters cannot change the result
    let mut counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    counts.sort_unstable();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::UndefinedEntropy);
    }
    let total = total as f64;
    let sum: f64 = counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / total;
            p * p.log2()
        })
        .sum();
    Ok(match sign {
        // -0.0 for a single cluster reads badly in output
        EntropySign::Negated => (-sum).max(0.0),
        EntropySign::AsPrinted => sum.min(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_law() {
        for k in [1u64, 2, 4, 8] {
            let h = entropy_bits(vec![5; k as usize], EntropySign::Negated).unwrap();
            assert!((h - (k as f64).log2()).abs() < 1e-12, "k={k} h={h}");
        }
    }

    #[test]
    fn three_to_one_split() {
        let h = entropy_bits([3, 1], EntropySign::Negated).unwrap();
        assert!((h - 0.811_278_124_459_132_9).abs() < 1e-12);
        let printed = entropy_bits([3, 1], EntropySign::AsPrinted).unwrap();
        assert_eq!(printed, -h);
    }

    #[test]
    fn zeros_are_ignored_and_empty_is_undefined() {
        assert_eq!(entropy_bits([4, 0, 0], EntropySign::Negated).unwrap(), 0.0);
        assert!(matches!(entropy_bits([0u64, 0], EntropySign::Negated), Err(Error::UndefinedEntropy)));
        assert!(entropy_bits(Vec::<u64>::new(), EntropySign::Negated).is_err());
    }
}
