//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GradcheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Coordinates checked per tensor; larger tensors are sampled.
    pub max_coords: usize,
    /// Denominator floor for the relative error, so that two vanishing
    /// gradients do not register as a mismatch.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            max_coords: 64,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradcheckEntry {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Coordinate with the largest error, with its analytic and numeric values.
    pub worst: Option<(usize, f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub entries: Vec<GradcheckEntry>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the tape gradient of `f` against central differences for every
/// tensor in `params`. `f` receives the registered parameter handles and
/// must return a scalar.
pub fn gradient_check<F>(f: F, params: &[(String, Tensor)], opts: &GradcheckOptions) -> Result<GradcheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t)).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.scalar(out))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|(_, t)| tape.param(t)).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut values: Vec<Tensor> = params.iter().map(|(_, t)| t.clone()).collect();
    let mut entries = Vec::with_capacity(params.len());
    for (i, (name, tensor)) in params.iter().enumerate() {
        let zeros = vec![0.0; tensor.numel()];
        let analytic = grads.get(vars[i]).unwrap_or(&zeros);
        let coords: Vec<usize> = if tensor.numel() <= opts.max_coords {
            (0..tensor.numel()).collect()
        } else {
            let mut c = sample(&mut rng, tensor.numel(), opts.max_coords).into_vec();
            c.sort_unstable();
            c
        };
        let mut entry = GradcheckEntry {
            name: name.clone(),
            checked: coords.len(),
            max_rel_error: 0.0,
            worst: None,
        };
        for &c in &coords {
            let orig = values[i].data()[c];
            values[i].data_mut()[c] = orig + opts.step;
            let plus = eval(&values)?;
            values[i].data_mut()[c] = orig - opts.step;
            let minus = eval(&values)?;
            values[i].data_mut()[c] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let err = relative_error(analytic[c], numeric, opts.floor);
            if err > entry.max_rel_error || entry.worst.is_none() {
                entry.max_rel_error = err.max(entry.max_rel_error);
                entry.worst = Some((c, analytic[c], numeric));
            }
        }
        entries.push(entry);
    }
    let max_rel_error = entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        entries,
        max_rel_error,
        tolerance: opts.tolerance,
        passed: max_rel_error < opts.tolerance,
    })
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / scale
}
