//! Gradient self-check: every differentiable op and the end-to-end tiny
//! network, each against central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ConceptId, ShotFeatureSequence};
use crate::error::Result;
use crate::gradcheck::{gradient_check, GradcheckOptions, GradcheckReport};
use crate::model::{ChanConfig, ChanModel, QueryEmbedding};
use crate::segmentation::SegmentBoundaries;
use crate::tensor::{Padding, Tape, Tensor, Var};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseResult {
    pub name: String,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub cases: Vec<CaseResult>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

type Case = (String, Vec<Tensor>, Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>);

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape matches data")
}

/// Weighted sum of every output coordinate, so all of them are checked.
fn probe(tape: &mut Tape, out: Var) -> Result<Var> {
    let n = tape.value(out).len();
    let w: Vec<f64> = (0..n).map(|i| ((i * 7919 % 97) as f64 / 97.0) - 0.4).collect();
    let w = tape.constant(Tensor::new(tape.shape(out).to_vec(), w)?);
    let prod = tape.mul(out, w)?;
    Ok(tape.sum_all(prod))
}

fn case(name: impl Into<String>, inputs: Vec<Tensor>, f: impl Fn(&mut Tape, &[Var]) -> Result<Var> + 'static) -> Case {
    (name.into(), inputs, Box::new(f))
}

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<Case> {
    let a = random(&[3, 4], rng);
    let b = random(&[3, 4], rng);
    let row = random(&[4], rng);
    let w = random(&[5, 4], rng);
    let m = random(&[4, 2], rng);
    let bias = random(&[5], rng);
    let short = random(&[2, 4], rng);
    let narrow = random(&[3, 2], rng);
    let cube = random(&[2, 3, 4], rng);
    let seq = random(&[7, 3], rng);
    let deconv_in = random(&[4, 3], rng);
    let logits = random(&[6], rng);

    let mut cases = vec![
        case("add", vec![a.clone(), b.clone()], |t, v| t.add(v[0], v[1])),
        case("sub", vec![a.clone(), b.clone()], |t, v| t.sub(v[0], v[1])),
        case("mul", vec![a.clone(), b.clone()], |t, v| t.mul(v[0], v[1])),
        case("scale", vec![a.clone()], |t, v| Ok(t.scale(v[0], -1.7))),
        case("add_row", vec![a.clone(), row.clone()], |t, v| t.add_row(v[0], v[1])),
        case("mul_row", vec![a.clone(), row.clone()], |t, v| t.mul_row(v[0], v[1])),
        case("matmul", vec![a.clone(), m], |t, v| t.matmul(v[0], v[1])),
        case("matmul_nt", vec![a.clone(), w.clone()], |t, v| t.matmul_nt(v[0], v[1])),
        case("linear", vec![a.clone(), w, bias], |t, v| t.linear(v[0], v[1], Some(v[2]))),
        case("transpose", vec![a.clone()], |t, v| t.transpose(v[0])),
        case("tanh", vec![a.clone()], |t, v| Ok(t.tanh(v[0]))),
        case("sigmoid", vec![a.clone()], |t, v| Ok(t.sigmoid(v[0]))),
        case("concat_rows", vec![a.clone(), short], |t, v| t.concat(&[v[0], v[1]], 0)),
        case("concat_cols", vec![a.clone(), narrow], |t, v| t.concat(&[v[0], v[1]], 1)),
        case("slice", vec![a.clone()], |t, v| t.slice(v[0], 1, 1, 2)),
        case("sum_all", vec![a], |t, v| Ok(t.sum_all(v[0]))),
        case("reshape", vec![cube.clone()], |t, v| t.reshape(v[0], &[6, 4])),
        case("max_pool1d", vec![seq.clone()], |t, v| t.max_pool1d(v[0], 2)),
        case("bce_loss", vec![logits], |t, v| {
            let s = t.sigmoid(v[0]);
            t.bce_loss(s, &[0.0, 0.5, 1.0, 0.2, 0.9, 0.0])
        }),
    ];
    for axis in 0..3 {
        cases.push(case(format!("sum[{axis}]"), vec![cube.clone()], move |t, v| t.sum(v[0], axis)));
        cases.push(case(format!("mean[{axis}]"), vec![cube.clone()], move |t, v| t.mean(v[0], axis)));
        cases.push(case(format!("softmax[{axis}]"), vec![cube.clone()], move |t, v| t.softmax(v[0], axis)));
        cases.push(case(format!("expand[{axis}]"), vec![cube.clone()], move |t, v| t.expand(v[0], axis, 3)));
    }
    for (taps, dilation) in [(3, 1), (3, 2), (5, 2)] {
        let filter = random(&[taps, 3, 2], rng);
        cases.push(case(format!("conv1d[k={taps},d={dilation}]"), vec![seq.clone(), filter], move |t, v| {
            t.conv1d(v[0], v[1], dilation, Padding::Same)
        }));
    }
    for (stride, target) in [(2, 8), (2, 7)] {
        let filter = random(&[4, 3, 2], rng);
        cases.push(case(format!("conv_transpose1d[s={stride},n={target}]"), vec![deconv_in.clone(), filter], move |t, v| {
            t.conv_transpose1d(v[0], v[1], stride, target)
        }));
    }
    cases
}

/// The tiny end-to-end network: input 8, `d_c` 4, two segments of 6 shots.
pub fn tiny_model_gradcheck(seed: u64, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = ChanModel::new(ChanConfig { seed, ..ChanConfig::tiny() })?;
    let data: Vec<f64> = (0..12 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let features = ShotFeatureSequence::new(12, 8, data)?;
    let boundaries = SegmentBoundaries::new(vec![6], 12)?;
    let mut emb = || (0..4).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let query = QueryEmbedding::from_vectors([ConceptId(0), ConceptId(1)], emb(), emb());
    let labels: Vec<f64> = (0..12).map(|_| [0.0, 0.5, 1.0][rng.random_range(0..3)]).collect();
    gradient_check(
        |tape, vars| {
            let bound = model.bind_vars(vars)?;
            let scores = bound.forward(tape, &features, &boundaries, &query)?;
            tape.bce_loss(scores, &labels)
        },
        &model.params.to_named_vec(),
        opts,
    )
}

/// Runs every op case and the tiny network.
pub fn run_gradcheck_suite(seed: u64, opts: &GradcheckOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for (name, inputs, f) in op_cases(&mut rng) {
        let named: Vec<(String, Tensor)> = inputs.into_iter().enumerate().map(|(i, t)| (format!("x{i}"), t)).collect();
        let report = gradient_check(
            |t, v| {
                let out = f(t, v)?;
                probe(t, out)
            },
            &named,
            opts,
        )?;
        cases.push(CaseResult { name, max_rel_error: report.max_rel_error, passed: report.passed });
    }
    let model = tiny_model_gradcheck(seed, opts)?;
    cases.push(CaseResult { name: "chan_tiny_end_to_end".into(), max_rel_error: model.max_rel_error, passed: model.passed });
    let max_rel_error = cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(SuiteReport {
        passed: cases.iter().all(|c| c.passed),
        cases,
        max_rel_error,
        tolerance: opts.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let report = run_gradcheck_suite(0, &GradcheckOptions::default()).unwrap();
        assert!(report.passed, "{report:#?}");
        assert!(report.cases.len() > 30);
    }
}
