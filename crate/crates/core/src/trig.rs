//! Real trigonometric polynomials on `R^n` with integer frequencies, hence
//! `Z^n`-periodic: `f(x) = c + sum_j a_j cos(2π k_j·x) + b_j sin(2π k_j·x)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub k: Vec<i64>,
    #[serde(alias = "amp", default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPoly {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn cosine(k: Vec<i64>, amp: f64) -> Self {
        Self { constant: 0.0, terms: vec![TrigTerm { k, cos: amp, sin: 0.0 }] }
    }

    pub fn with_term(mut self, k: Vec<i64>, cos: f64, sin: f64) -> Self {
        self.terms.push(TrigTerm { k, cos, sin });
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !self.constant.is_finite() {
            return Err(Error::Domain("trig constant not finite".into()));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if t.k.len() != dim {
                return Err(Error::Domain(format!(
                    "trig term {i}: frequency has {} entries, expected {dim}",
                    t.k.len()
                )));
            }
            if !t.cos.is_finite() || !t.sin.is_finite() {
                return Err(Error::Domain(format!("trig term {i}: amplitude not finite")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    fn phase(k: &[i64], x: &[f64]) -> f64 {
        TAU * k.iter().zip(x).map(|(&k, &x)| k as f64 * x).sum::<f64>()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for t in &self.terms {
            let (s, c) = Self::phase(&t.k, x).sin_cos();
            v += t.cos * c + t.sin * s;
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for t in &self.terms {
            let (s, c) = Self::phase(&t.k, x).sin_cos();
            let d = TAU * (-t.cos * s + t.sin * c);
            for (gi, &ki) in g.iter_mut().zip(&t.k) {
                *gi += d * ki as f64;
            }
        }
        g
    }

    /// Average over the fundamental domain.
    pub fn mean(&self) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .filter(|t| t.k.iter().all(|&k| k == 0))
                .map(|t| t.cos)
                .sum::<f64>()
    }

    /// Certified upper bound of `f`.
    pub fn upper_bound(&self) -> f64 {
        self.constant + self.terms.iter().map(|t| t.cos.hypot(t.sin)).sum::<f64>()
    }

    /// Certified lower bound of `f`.
    pub fn lower_bound(&self) -> f64 {
        self.constant - self.terms.iter().map(|t| t.cos.hypot(t.sin)).sum::<f64>()
    }

    /// Certified bound on the Euclidean norm of the gradient.
    pub fn gradient_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let kn = t.k.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt();
                TAU * kn * t.cos.hypot(t.sin)
            })
            .sum()
    }
}
