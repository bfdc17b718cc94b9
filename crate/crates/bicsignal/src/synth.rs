//! Synthetic spontaneous-report generator with planted ground truth.
//!
//! Drugs are Bernoulli columns, optionally sampled jointly in correlated
//! pairs (co-prescription), and the outcome follows the logistic model on a
//! declared support. Since the generating model is known exactly, these
//! datasets back the recovery, masking, and calibration tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{EventVector, ReportMatrix};
use crate::error::{Error, Result};

/// A correlated drug pair: both marginals stay as declared while the joint
/// consumption probability is shifted to produce the given correlation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationBlock {
    pub first: usize,
    pub second: usize,
    pub rho: f64,
}

/// Generating model for one synthetic dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Marginal consumption probability per drug; length is the drug count.
    pub prevalences: Vec<f64>,
    pub beta0: f64,
    /// (drug index, coefficient) pairs; every other coefficient is zero.
    pub effects: Vec<(usize, f64)>,
    #[serde(default)]
    pub blocks: Vec<CorrelationBlock>,
    #[serde(default = "default_event_id")]
    pub event_id: String,
}

fn default_event_id() -> String {
    "EV1".to_string()
}

impl SyntheticSpec {
    /// Independent drugs, no correlation blocks.
    pub fn independent(n: usize, prevalences: Vec<f64>, beta0: f64, effects: Vec<(usize, f64)>) -> Self {
        SyntheticSpec {
            n,
            prevalences,
            beta0,
            effects,
            blocks: Vec::new(),
            event_id: default_event_id(),
        }
    }

    pub fn p(&self) -> usize {
        self.prevalences.len()
    }

    /// Joint cell probabilities (p11, p10, p01, p00) for a block, derived
    /// from the marginals and the correlation.
    fn block_cells(&self, block: &CorrelationBlock) -> (f64, f64, f64, f64) {
        let pj = self.prevalences[block.first];
        let pk = self.prevalences[block.second];
        let p11 = pj * pk + block.rho * (pj * (1.0 - pj) * pk * (1.0 - pk)).sqrt();
        (p11, pj - p11, pk - p11, 1.0 - pj - pk + p11)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("synthetic n must be positive".into()));
        }
        for (j, &prob) in self.prevalences.iter().enumerate() {
            if !(prob > 0.0 && prob < 1.0) {
                return Err(Error::Config(format!(
                    "prevalence of drug {j} must lie strictly in (0,1), got {prob}"
                )));
            }
        }
        for &(j, beta) in &self.effects {
            if j >= self.p() {
                return Err(Error::Config(format!(
                    "effect names drug {j}, but only {} drugs exist",
                    self.p()
                )));
            }
            if !beta.is_finite() {
                return Err(Error::Config(format!("effect on drug {j} is not finite")));
            }
        }
        let mut support: Vec<usize> = self.effects.iter().map(|&(j, _)| j).collect();
        support.sort_unstable();
        if support.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate drug in effects".into()));
        }

        let mut in_block = vec![false; self.p()];
        for block in &self.blocks {
            if block.first >= self.p() || block.second >= self.p() || block.first == block.second {
                return Err(Error::Config(format!(
                    "correlation block ({}, {}) is not a pair of distinct drugs",
                    block.first, block.second
                )));
            }
            if in_block[block.first] || in_block[block.second] {
                return Err(Error::Config(format!(
                    "drug {} appears in more than one correlation block",
                    if in_block[block.first] {
                        block.first
                    } else {
                        block.second
                    }
                )));
            }
            in_block[block.first] = true;
            in_block[block.second] = true;
            if !block.rho.is_finite() || block.rho.abs() > 1.0 {
                return Err(Error::Config(format!(
                    "correlation {} outside [-1, 1]",
                    block.rho
                )));
            }
            // The implied joint probability must respect the Frechet
            // bounds, otherwise no joint law has these marginals.
            let (p11, p10, p01, p00) = self.block_cells(block);
            let eps = 1e-12;
            if p11 < -eps || p10 < -eps || p01 < -eps || p00 < -eps {
                return Err(Error::Config(format!(
                    "correlation {} is infeasible for marginals {} and {}",
                    block.rho, self.prevalences[block.first], self.prevalences[block.second]
                )));
            }
        }
        Ok(())
    }

    /// Zero-padded drug identifiers D000, D001, ...
    pub fn drug_ids(&self) -> Vec<String> {
        let width = (self.p().max(2) - 1).to_string().len();
        (0..self.p()).map(|j| format!("D{j:0width$}")).collect()
    }
}

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Samples a dataset from the spec. The same (spec, seed) always produces
/// the same data, byte for byte.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<(ReportMatrix, EventVector)> {
    spec.validate()?;
    let p = spec.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Block partners are sampled jointly when the lower index comes up, so
    // a plain ascending scan covers every drug exactly once.
    let mut partner: Vec<Option<(usize, f64, f64)>> = vec![None; p];
    let mut skip = vec![false; p];
    for block in &spec.blocks {
        let (p11, p10, _, _) = spec.block_cells(block);
        let (lower, upper) = if block.first < block.second {
            (block.first, block.second)
        } else {
            (block.second, block.first)
        };
        // Cells are stored relative to (lower, upper) order.
        let (p11_lu, p10_lu) = if lower == block.first {
            (p11, p10)
        } else {
            (p11, spec.prevalences[block.second] - p11)
        };
        partner[lower] = Some((upper, p11_lu, p10_lu));
        skip[upper] = true;
    }

    let mut beta = vec![0.0; p];
    for &(j, b) in &spec.effects {
        beta[j] = b;
    }

    let mut rows = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut row: Vec<u32> = Vec::new();
        for j in 0..p {
            if skip[j] {
                continue;
            }
            match partner[j] {
                None => {
                    if rng.random_bool(spec.prevalences[j]) {
                        row.push(j as u32);
                    }
                }
                Some((other, p11, p10)) => {
                    let u: f64 = rng.random();
                    let pj = spec.prevalences[j];
                    if u < p11 {
                        row.push(j as u32);
                        row.push(other as u32);
                    } else if u < p11 + p10 {
                        row.push(j as u32);
                    } else if u < pj + spec.prevalences[other] - p11 {
                        row.push(other as u32);
                    }
                }
            }
        }
        row.sort_unstable();
        let eta = spec.beta0 + row.iter().map(|&j| beta[j as usize]).sum::<f64>();
        y.push(rng.random_bool(sigmoid(eta)) as u8);
        rows.push(row);
    }

    let x = ReportMatrix::new(rows, spec.drug_ids())?;
    let y = EventVector::new(spec.event_id.clone(), y)?;
    Ok((x, y))
}
