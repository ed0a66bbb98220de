//! Reference numerics for the two training objectives.
//!
//! Both losses consume sequence-level log-probabilities computed elsewhere.
//!
//! ```text
//! L_sft   = -mean(log p(r_c | image, q_c))
//! L_simpo = -log sigmoid(beta/|y_w| * log p(y_w) - beta/|y_l| * log p(y_l) - lambda)
//! ```
//!
//! `lambda` is the target reward margin. Some trainers call it `gamma_simpo`;
//! the config accepts that name as an alias.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `log p(y | x)` of a whole sequence together with its token count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceLogProb {
    logprob: f64,
    length: u32,
}

impl SequenceLogProb {
    pub fn new(logprob: f64, length: u32) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidLogProb("length must be >= 1".into()));
        }
        if !logprob.is_finite() || logprob > 0.0 {
            return Err(Error::InvalidLogProb(format!(
                "log-probability must be finite and <= 0, got {logprob}"
            )));
        }
        Ok(Self { logprob, length })
    }

    pub fn logprob(&self) -> f64 {
        self.logprob
    }

    pub fn length(&self) -> u32 {
        self.length
    }

    /// Length-normalized log-probability.
    pub fn per_token(&self) -> f64 {
        self.logprob / f64::from(self.length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimPOParams {
    pub beta: f64,
    #[serde(alias = "gamma_simpo")]
    pub lambda: f64,
}

impl Default for SimPOParams {
    /// `beta = 2.0`, `lambda = 1.0`.
    fn default() -> Self {
        Self {
            beta: 2.0,
            lambda: 1.0,
        }
    }
}

impl SimPOParams {
    pub fn new(beta: f64, lambda: f64) -> Result<Self> {
        let p = Self { beta, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood over the stream.
pub fn sft_loss<'a>(samples: impl IntoIterator<Item = &'a SequenceLogProb>) -> Result<f64> {
    let (sum, n) = samples
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x.logprob, n + 1));
    if n == 0 {
        return Err(Error::EmptyStream);
    }
    Ok(-sum / n as f64)
}

/// The sigmoid argument `beta/|y_w| log p_w - beta/|y_l| log p_l - lambda`.
pub fn simpo_margin(w: &SequenceLogProb, l: &SequenceLogProb, p: &SimPOParams) -> f64 {
    p.beta * w.per_token() - p.beta * l.per_token() - p.lambda
}

pub fn simpo_loss(w: &SequenceLogProb, l: &SequenceLogProb, p: &SimPOParams) -> f64 {
    softplus(-simpo_margin(w, l, p))
}

/// `(d loss / d logprob_w, d loss / d logprob_l)`.
pub fn simpo_grad(w: &SequenceLogProb, l: &SequenceLogProb, p: &SimPOParams) -> (f64, f64) {
    // d/du softplus(-u) = -(1 - sigmoid(u)) = -sigmoid(-u)
    let s = sigmoid(-simpo_margin(w, l, p));
    (
        -p.beta / f64::from(w.length) * s,
        p.beta / f64::from(l.length) * s,
    )
}

/// One line of the loss-evaluation input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferencePairInput {
    pub logprob_w: f64,
    pub len_w: u32,
    pub logprob_l: f64,
    pub len_l: u32,
}

impl PreferencePairInput {
    pub fn sequences(&self) -> Result<(SequenceLogProb, SequenceLogProb)> {
        Ok((
            SequenceLogProb::new(self.logprob_w, self.len_w)?,
            SequenceLogProb::new(self.logprob_l, self.len_l)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLoss {
    pub index: usize,
    pub margin: f64,
    pub loss: f64,
    pub grad_w: f64,
    pub grad_l: f64,
}

/// Evaluates every pair; fails on the first invalid one.
pub fn evaluate_pairs(
    pairs: &[PreferencePairInput],
    p: &SimPOParams,
) -> Result<(Vec<PairLoss>, f64)> {
    p.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyStream);
    }
    let mut rows = Vec::with_capacity(pairs.len());
    for (index, pair) in pairs.iter().enumerate() {
        let (w, l) = pair.sequences()?;
        let (grad_w, grad_l) = simpo_grad(&w, &l, p);
        rows.push(PairLoss {
            index,
            margin: simpo_margin(&w, &l, p),
            loss: simpo_loss(&w, &l, p),
            grad_w,
            grad_l,
        });
    }
    let mean = rows.iter().map(|r| r.loss).sum::<f64>() / rows.len() as f64;
    Ok((rows, mean))
}
