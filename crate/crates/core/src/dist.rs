//! Empirical execution-time distributions and the dispersion parameters
//! used to quantify execution-time variability.
//!
//! A distribution is a multiset of integer execution times (ticks) stored as
//! `(value, count)` pairs. The probability of a value is `count / total`, so
//! every probability is an exact rational; floating point only appears when a
//! statistic is reported.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Execution time in scheduler ticks.
pub type Ticks = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct EmpiricalDistribution {
    values: Vec<(Ticks, u64)>,
    cumulative: Vec<u64>,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    samples: Vec<(Ticks, u64)>,
}

impl TryFrom<RawDistribution> for EmpiricalDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        Self::from_counts(raw.samples)
    }
}

impl From<EmpiricalDistribution> for RawDistribution {
    fn from(dist: EmpiricalDistribution) -> Self {
        RawDistribution {
            samples: dist.values,
        }
    }
}

impl EmpiricalDistribution {
    /// Collapses raw execution-time samples into a distribution.
    pub fn from_samples(samples: &[Ticks]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let mut values: Vec<(Ticks, u64)> = Vec::new();
        for v in sorted {
            match values.last_mut() {
                Some((last, count)) if *last == v => *count += 1,
                _ => values.push((v, 1)),
            }
        }
        Self::build(values)
    }

    /// Builds a distribution from `(value, count)` pairs in any order.
    /// Repeated values are merged.
    pub fn from_counts(pairs: impl IntoIterator<Item = (Ticks, u64)>) -> Result<Self> {
        let mut pairs: Vec<(Ticks, u64)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptySamples);
        }
        if let Some(&(v, _)) = pairs.iter().find(|(_, c)| *c == 0) {
            return Err(Error::ZeroCount(v));
        }
        pairs.sort_unstable_by_key(|&(v, _)| v);
        let mut values: Vec<(Ticks, u64)> = Vec::with_capacity(pairs.len());
        for (v, c) in pairs {
            match values.last_mut() {
                Some((last, count)) if *last == v => *count += c,
                _ => values.push((v, c)),
            }
        }
        Self::build(values)
    }

    /// Parses a measurement log: one execution time per line. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn from_sample_log(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let v = trimmed.parse::<Ticks>().map_err(|_| Error::SampleLog {
                line: idx + 1,
                text: trimmed.to_string(),
            })?;
            samples.push(v);
        }
        Self::from_samples(&samples)
    }

    fn build(values: Vec<(Ticks, u64)>) -> Result<Self> {
        let max = values.last().map(|&(v, _)| v).ok_or(Error::EmptySamples)?;
        if max == 0 {
            return Err(Error::DegenerateDistribution);
        }
        let cumulative: Vec<u64> = values
            .iter()
            .scan(0u64, |acc, &(_, c)| {
                *acc += c;
                Some(*acc)
            })
            .collect();
        let total = *cumulative.last().expect("nonempty");
        Ok(Self {
            values,
            cumulative,
            total,
        })
    }

    /// `(value, count)` pairs, strictly ascending by value.
    pub fn values(&self) -> &[(Ticks, u64)] {
        &self.values
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support(&self) -> impl DoubleEndedIterator<Item = Ticks> + '_ {
        self.values.iter().map(|&(v, _)| v)
    }

    pub fn probabilities(&self) -> impl Iterator<Item = (Ticks, f64)> + '_ {
        let total = self.total as f64;
        self.values.iter().map(move |&(v, c)| (v, c as f64 / total))
    }

    /// The largest observed value, i.e. the WCET.
    pub fn max(&self) -> Ticks {
        self.values[self.values.len() - 1].0
    }

    /// The smallest observed value, i.e. the BCET.
    pub fn min(&self) -> Ticks {
        self.values[0].0
    }

    pub fn is_constant(&self) -> bool {
        self.values.len() == 1
    }

    pub fn mean(&self) -> f64 {
        let sum: u128 = self
            .values
            .iter()
            .map(|&(v, c)| v as u128 * c as u128)
            .sum();
        sum as f64 / self.total as f64
    }

    /// Coefficient of variation to the maximum: the root-mean-square
    /// distance of the values from the maximum, divided by the maximum.
    ///
    /// Returned as a ratio in `[0, 1)`; multiply by 100 for a percentage.
    pub fn vwcet(&self) -> f64 {
        let max = self.max();
        let sq: u128 = self
            .values
            .iter()
            .map(|&(v, c)| {
                let d = (max - v) as u128;
                d * d * c as u128
            })
            .sum();
        (sq as f64 / self.total as f64).sqrt() / max as f64
    }

    /// Population skewness `m3 / m2^(3/2)` of the probability masses.
    pub fn skewness(&self) -> Result<f64> {
        if self.is_constant() {
            return Err(Error::UndefinedSkewness);
        }
        let mean = self.mean();
        let total = self.total as f64;
        let (m2, m3) = self.values.iter().fold((0.0, 0.0), |(m2, m3), &(v, c)| {
            let p = c as f64 / total;
            let d = v as f64 - mean;
            (m2 + p * d * d, m3 + p * d * d * d)
        });
        if m2 <= 0.0 {
            return Err(Error::UndefinedSkewness);
        }
        Ok(m3 / m2.powf(1.5))
    }

    /// Smallest value `v` with `P(C <= v) >= q / 100`.
    pub fn percentile(&self, q: f64) -> Result<Ticks> {
        if !(q > 0.0 && q <= 100.0) {
            return Err(Error::PercentileOutOfRange(q));
        }
        let threshold = q * self.total as f64;
        let idx = self
            .cumulative
            .iter()
            .position(|&cum| cum as f64 * 100.0 >= threshold)
            .unwrap_or(self.values.len() - 1);
        Ok(self.values[idx].0)
    }

    pub fn median(&self) -> Ticks {
        self.percentile(50.0).expect("50 is a valid percentile")
    }

    /// Number of occurrences with value `<= budget`.
    pub fn meet_count(&self, budget: Ticks) -> u64 {
        let idx = self.values.partition_point(|&(v, _)| v <= budget);
        if idx == 0 {
            0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// `P(C <= budget)`: the probability that a job fits in `budget`.
    pub fn meet_prob(&self, budget: Ticks) -> f64 {
        self.meet_count(budget) as f64 / self.total as f64
    }

    /// Draws one execution time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Ticks {
        let u = rng.random_range(0..self.total);
        let idx = self.cumulative.partition_point(|&cum| cum <= u);
        self.values[idx].0
    }
}
