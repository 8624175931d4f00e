use crate::error::{ChanError, Result};

use super::tape::{Accumulator, Op, Tape, Var};

/// Scores are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

impl Tape {
    /// Mean binary cross-entropy, `-(1/T) Σ [y·ln s + (1-y)·ln(1-s)]`.
    ///
    /// Clamped scores pass no gradient.
    pub fn bce_loss(&mut self, scores: Var, labels: &[f64]) -> Result<Var> {
        let sv = self.value(scores);
        if sv.len() != labels.len() {
            return Err(ChanError::shape("bce_loss", self.shape(scores), &[labels.len()]));
        }
        if let Some(bad) = labels.iter().find(|y| !(0.0..=1.0).contains(*y)) {
            return Err(ChanError::invalid("bce_loss", format!("label {bad} outside [0, 1]")));
        }
        let total: f64 = sv
            .iter()
            .zip(labels)
            .map(|(&s, &y)| {
                let s = s.clamp(BCE_EPS, 1.0 - BCE_EPS);
                y * s.ln() + (1.0 - y) * (1.0 - s).ln()
            })
            .sum();
        let loss = -total / labels.len() as f64;
        let op = Op::Bce { scores, labels: labels.to_vec() };
        Ok(self.push(vec![1], vec![loss], op, &[scores]))
    }
}

pub(super) fn bce_backward(scores: Var, labels: &[f64], g: f64, acc: &mut Accumulator<'_>) {
    let sv = acc.tape.value(scores);
    let n = labels.len() as f64;
    acc.add(scores, |buf| {
        for ((d, &s), &y) in buf.iter_mut().zip(sv).zip(labels) {
            if (BCE_EPS..=1.0 - BCE_EPS).contains(&s) {
                *d -= g * (y / s - (1.0 - y) / (1.0 - s)) / n;
            }
        }
    });
}
