//! Enumeration of deterministic encoders up to code relabeling.
//!
//! A partition of `m` symbols into `n` cells is visited once as its
//! restricted growth string: `a[0] = 0` and `a[i] ≤ 1 + max(a[..i])`.
//! Strings are produced in lexicographic order.

use super::DeterministicEncoder;
use crate::error::{Error, Result};

/// Largest raw assignment count `nᵐ` enumerated by default.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Iterator over canonical encoders with exactly `n` codes.
#[derive(Debug, Clone)]
pub struct EncoderIter {
    current: Option<Vec<usize>>,
    n: usize,
}

pub fn enumerate_encoders(m: usize, n: usize) -> Result<EncoderIter> {
    enumerate_encoders_with_cap(m, n, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_encoders_with_cap(m: usize, n: usize, cap: u128) -> Result<EncoderIter> {
    if m == 0 || n == 0 || n > m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n <= m for enumeration, got m={m}, n={n}"
        )));
    }
    let raw = u32::try_from(m)
        .ok()
        .and_then(|e| (n as u128).checked_pow(e))
        .unwrap_or(u128::MAX);
    if raw > cap {
        return Err(Error::CapExceeded {
            what: "encoder enumeration",
            requested: raw,
            cap,
        });
    }
    let mut first = vec![0; m];
    fill_tail(&mut first, 0, 0, n);
    Ok(EncoderIter {
        current: Some(first),
        n,
    })
}

/// Smallest completion of `a[start..]` given the running maximum `max`:
/// zeros, then the still-missing codes `max+1..n` at the very end.
fn fill_tail(a: &mut [usize], start: usize, max: usize, n: usize) {
    let missing = n - 1 - max;
    let m = a.len();
    for (k, v) in a[start..].iter_mut().enumerate() {
        let pos = start + k;
        *v = if pos + missing >= m {
            max + 1 + (pos + missing - m)
        } else {
            0
        };
    }
}

impl EncoderIter {
    fn advance(a: &mut [usize], n: usize) -> bool {
        let m = a.len();
        let mut prefix_max = vec![0; m];
        for i in 1..m {
            prefix_max[i] = prefix_max[i - 1].max(a[i - 1]);
        }
        for i in (1..m).rev() {
            let v = a[i] + 1;
            if v >= n || v > prefix_max[i] + 1 {
                continue;
            }
            let max = prefix_max[i].max(v);
            if m - i - 1 < n - 1 - max {
                continue;
            }
            a[i] = v;
            fill_tail(a, i + 1, max, n);
            return true;
        }
        false
    }
}

impl Iterator for EncoderIter {
    type Item = DeterministicEncoder;

    fn next(&mut self) -> Option<Self::Item> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        self.current = Self::advance(&mut next, self.n).then_some(next);
        Some(DeterministicEncoder::from_canonical(out, self.n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn stirling2(m: usize, n: usize) -> u64 {
        let mut s = vec![vec![0u64; n + 1]; m + 1];
        s[0][0] = 1;
        for i in 1..=m {
            for k in 1..=n.min(i) {
                s[i][k] = k as u64 * s[i - 1][k] + s[i - 1][k - 1];
            }
        }
        s[m][n]
    }

    #[test]
    fn small_counts() {
        assert_eq!(enumerate_encoders(2, 1).unwrap().count(), 1);
        assert_eq!(enumerate_encoders(3, 2).unwrap().count(), 3);
        assert_eq!(enumerate_encoders(4, 2).unwrap().count(), 7);
    }

    #[test]
    fn listed_in_lexicographic_order() {
        let all: Vec<Vec<usize>> = enumerate_encoders(4, 2)
            .unwrap()
            .map(|e| e.assignment().to_vec())
            .collect();
        assert_eq!(
            all,
            vec![
                vec![0, 0, 0, 1],
                vec![0, 0, 1, 0],
                vec![0, 0, 1, 1],
                vec![0, 1, 0, 0],
                vec![0, 1, 0, 1],
                vec![0, 1, 1, 0],
                vec![0, 1, 1, 1],
            ]
        );
    }

    #[test]
    fn matches_brute_force_canonicalization() {
        for m in 1..=6 {
            for n in 1..=m {
                let got: Vec<DeterministicEncoder> = enumerate_encoders(m, n).unwrap().collect();
                assert_eq!(got.len() as u64, stirling2(m, n), "m={m} n={n}");
                let unique: HashSet<_> = got.iter().cloned().collect();
                assert_eq!(unique.len(), got.len());

                // every raw assignment canonicalizes to something listed
                let mut oracle = HashSet::new();
                for code in 0..n.pow(m as u32) {
                    let a: Vec<usize> = (0..m).map(|i| code / n.pow(i as u32) % n).collect();
                    let e = DeterministicEncoder::new(a).unwrap();
                    if e.code_count() == n {
                        oracle.insert(e);
                    }
                }
                assert_eq!(oracle, unique);
            }
        }
    }

    #[test]
    fn cap_and_argument_errors() {
        assert!(matches!(
            enumerate_encoders_with_cap(10, 5, 1000),
            Err(Error::CapExceeded { .. })
        ));
        assert!(enumerate_encoders(3, 4).is_err());
        assert!(enumerate_encoders(0, 0).is_err());
        assert_eq!(enumerate_encoders(1, 1).unwrap().count(), 1);
    }
}
