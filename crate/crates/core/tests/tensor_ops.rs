use chan_core::gradcheck::{gradient_check, GradcheckOptions};
use chan_core::tensor::{Padding, Tape, Tensor, Var};
use chan_core::{ChanError, Result};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn named(tensors: Vec<Tensor>) -> Vec<(String, Tensor)> {
    tensors.into_iter().enumerate().map(|(i, t)| (format!("x{i}"), t)).collect()
}

/// Contracts `out` with a fixed pseudo-random weight so every output
/// coordinate contributes to the scalar being differentiated.
fn probe(tape: &mut Tape, out: Var) -> Result<Var> {
    let n = tape.value(out).len();
    let w: Vec<f64> = (0..n).map(|i| ((i * 7919 % 97) as f64 / 97.0) - 0.4).collect();
    let w = tape.constant(Tensor::new(tape.shape(out).to_vec(), w)?);
    let prod = tape.mul(out, w)?;
    Ok(tape.sum_all(prod))
}

fn check(params: Vec<Tensor>, f: impl Fn(&mut Tape, &[Var]) -> Result<Var>) {
    let opts = GradcheckOptions::default();
    let report = gradient_check(|t, v| { let o = f(t, v)?; probe(t, o) }, &named(params), &opts).unwrap();
    assert!(report.passed, "{report:#?}");
}

#[test]
fn every_elementwise_and_linear_op_passes_gradcheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random(&[3, 4], &mut rng);
    let b = random(&[3, 4], &mut rng);
    let row = random(&[4], &mut rng);
    let w = random(&[5, 4], &mut rng);
    let m = random(&[4, 2], &mut rng);
    check(vec![a.clone(), b.clone()], |t, v| t.add(v[0], v[1]));
    check(vec![a.clone(), b.clone()], |t, v| t.sub(v[0], v[1]));
    check(vec![a.clone(), b.clone()], |t, v| t.mul(v[0], v[1]));
    check(vec![a.clone()], |t, v| Ok(t.scale(v[0], -1.7)));
    check(vec![a.clone(), row.clone()], |t, v| t.add_row(v[0], v[1]));
    check(vec![a.clone(), row.clone()], |t, v| t.mul_row(v[0], v[1]));
    check(vec![a.clone(), m.clone()], |t, v| t.matmul(v[0], v[1]));
    check(vec![a.clone(), w.clone(), random(&[5], &mut rng)], |t, v| t.linear(v[0], v[1], Some(v[2])));
    check(vec![a.clone()], |t, v| t.transpose(v[0]));
    check(vec![a.clone()], |t, v| Ok(t.tanh(v[0])));
    check(vec![a.clone()], |t, v| Ok(t.sigmoid(v[0])));
}

#[test]
fn every_structural_op_passes_gradcheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random(&[3, 4], &mut rng);
    let b = random(&[2, 4], &mut rng);
    let c = random(&[3, 2], &mut rng);
    let cube = random(&[2, 3, 4], &mut rng);
    check(vec![a.clone(), b.clone()], |t, v| t.concat(&[v[0], v[1]], 0));
    check(vec![a.clone(), c.clone()], |t, v| t.concat(&[v[0], v[1]], 1));
    check(vec![a.clone()], |t, v| t.slice(v[0], 1, 1, 2));
    for axis in 0..3 {
        check(vec![cube.clone()], move |t, v| t.sum(v[0], axis));
        check(vec![cube.clone()], move |t, v| t.mean(v[0], axis));
        check(vec![cube.clone()], move |t, v| t.softmax(v[0], axis));
        check(vec![cube.clone()], move |t, v| t.expand(v[0], axis, 3));
    }
    check(vec![a.clone()], |t, v| Ok(t.sum_all(v[0])));
    check(vec![cube.clone()], |t, v| t.reshape(v[0], &[6, 4]));
}

#[test]
fn convolution_ops_pass_gradcheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = random(&[7, 3], &mut rng);
    for (taps, dilation) in [(1, 1), (3, 1), (3, 2), (5, 2), (5, 3)] {
        let w = random(&[taps, 3, 2], &mut rng);
        check(vec![x.clone(), w], move |t, v| t.conv1d(v[0], v[1], dilation, Padding::Same));
    }
    check(vec![x.clone()], |t, v| t.max_pool1d(v[0], 2));
    check(vec![x.clone()], |t, v| t.max_pool1d(v[0], 3));
    let short = random(&[4, 3], &mut rng);
    for (stride, target) in [(1, 4), (2, 8), (2, 7), (2, 10), (3, 9)] {
        let w = random(&[4, 3, 2], &mut rng);
        check(vec![short.clone(), w], move |t, v| t.conv_transpose1d(v[0], v[1], stride, target));
    }
}

#[test]
fn bce_passes_gradcheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let logits = random(&[6], &mut rng);
    let labels = [0.0, 0.5, 1.0, 0.2, 0.9, 0.0];
    let report = gradient_check(
        |t, v| {
            let s = t.sigmoid(v[0]);
            t.bce_loss(s, &labels)
        },
        &named(vec![logits]),
        &GradcheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed, "{report:#?}");
}

#[test]
fn softmax_of_constant_is_uniform() {
    for c in [-50.0, 0.0, 3.3, 800.0] {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[3], c));
        let y = tape.softmax(x, 0).unwrap();
        for &p in tape.value(y) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}

#[test]
fn tanh_and_sigmoid_at_zero() {
    let mut tape = Tape::new();
    let x = tape.zeros(&[2, 3]);
    let t = tape.tanh(x);
    let s = tape.sigmoid(x);
    assert!(tape.value(t).iter().all(|&v| v == 0.0));
    assert!(tape.value(s).iter().all(|&v| v == 0.5));
}

#[test]
fn shape_mismatch_names_op_and_shapes() {
    let mut tape = Tape::new();
    let a = tape.zeros(&[3, 4]);
    let b = tape.zeros(&[4, 3]);
    match tape.add(a, b).unwrap_err() {
        ChanError::ShapeMismatch { op, lhs, rhs } => {
            assert_eq!(op, "add");
            assert_eq!(lhs, vec![3, 4]);
            assert_eq!(rhs, vec![4, 3]);
        }
        e => panic!("unexpected {e}"),
    }
    assert!(matches!(tape.matmul(a, a), Err(ChanError::ShapeMismatch { op: "matmul", .. })));
}

/// Independent sliding-window reference for dilated same-padded convolution.
fn conv_oracle(x: &[f64], filter: &[f64], dilation: usize) -> Vec<f64> {
    let k = (filter.len() / 2) as isize;
    (0..x.len() as isize)
        .map(|i| {
            (-k..=k)
                .map(|t| {
                    let j = i + dilation as isize * t;
                    if j < 0 || j >= x.len() as isize { 0.0 } else { filter[(t + k) as usize] * x[j as usize] }
                })
                .sum()
        })
        .collect()
}

fn conv_single_channel(x: &[f64], filter: &[f64], dilation: usize) -> Vec<f64> {
    let mut tape = Tape::new();
    let xv = tape.constant(Tensor::matrix(x.len(), 1, x.to_vec()).unwrap());
    let wv = tape.constant(Tensor::new(vec![filter.len(), 1, 1], filter.to_vec()).unwrap());
    let y = tape.conv1d(xv, wv, dilation, Padding::Same).unwrap();
    tape.value(y).to_vec()
}

#[test]
fn dilated_conv_matches_sliding_window() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let expected = conv_oracle(&x, &[1.0, 0.0, 1.0], 2);
    // frozen from the oracle: taps at i-2 and i+2
    assert_eq!(expected, vec![3.0, 4.0, 6.0, 2.0, 3.0]);
    assert_eq!(conv_single_channel(&x, &[1.0, 0.0, 1.0], 2), expected);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let n = rng.random_range(1..12);
        let taps = 2 * rng.random_range(0..3) + 1;
        let d = rng.random_range(1..4);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f: Vec<f64> = (0..taps).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = conv_single_channel(&x, &f, d);
        for (g, e) in got.iter().zip(conv_oracle(&x, &f, d)) {
            assert!((g - e).abs() < 1e-12);
        }
    }
}

#[test]
fn identity_filter_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random(&[6, 3], &mut rng);
    let mut eye = vec![0.0; 3 * 3 * 3];
    for c in 0..3 {
        eye[9 + c * 3 + c] = 1.0;
    }
    for d in 1..4 {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let w = tape.constant(Tensor::new(vec![3, 3, 3], eye.clone()).unwrap());
        let y = tape.conv1d(xv, w, d, Padding::Same).unwrap();
        assert_eq!(tape.value(y), x.data());
        let w1 = tape.constant(Tensor::new(vec![1, 3, 3], eye[9..18].to_vec()).unwrap());
        let z = tape.conv_transpose1d(xv, w1, 1, 6).unwrap();
        assert_eq!(tape.value(z), x.data());
    }
}

#[test]
fn even_filter_rejected() {
    let mut tape = Tape::new();
    let x = tape.zeros(&[5, 1]);
    let w = tape.zeros(&[2, 1, 1]);
    assert!(matches!(tape.conv1d(x, w, 1, Padding::Same), Err(ChanError::InvalidArgument { op: "conv1d", .. })));
}

#[test]
fn max_pool_examples() {
    let mut tape = Tape::new();
    let x = tape.param(&Tensor::matrix(5, 1, vec![3.0, 1.0, 4.0, 1.0, 5.0]).unwrap());
    let y = tape.max_pool1d(x, 2).unwrap();
    assert_eq!(tape.value(y), &[3.0, 4.0, 5.0]);
    let id = tape.max_pool1d(x, 1).unwrap();
    assert_eq!(tape.value(id), tape.value(x));

    let s = tape.sum_all(y);
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap(), &[1.0, 0.0, 1.0, 0.0, 1.0]);
}

#[test]
fn max_pool_ties_route_to_first() {
    let mut tape = Tape::new();
    let x = tape.param(&Tensor::matrix(4, 1, vec![2.0, 2.0, 7.0, 7.0]).unwrap());
    let y = tape.max_pool1d(x, 2).unwrap();
    let s = tape.sum_all(y);
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap(), &[1.0, 0.0, 1.0, 0.0]);
}

#[test]
fn transposed_conv_is_adjoint_of_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..25 {
        let len = rng.random_range(1..9);
        let taps = 2 * rng.random_range(0..3) + 1;
        let (cin, cout) = (rng.random_range(1..4), rng.random_range(1..4));
        let x = random(&[len, cin], &mut rng);
        let y = random(&[len, cout], &mut rng);
        let w = random(&[taps, cin, cout], &mut rng);
        // channel-transposed filter: [taps, cout, cin]
        let mut wt = vec![0.0; taps * cin * cout];
        for t in 0..taps {
            for i in 0..cin {
                for o in 0..cout {
                    wt[(t * cout + o) * cin + i] = w.data()[(t * cin + i) * cout + o];
                }
            }
        }
        let mut tape = Tape::new();
        let (xv, yv) = (tape.constant(x.clone()), tape.constant(y.clone()));
        let wv = tape.constant(w);
        let wtv = tape.constant(Tensor::new(vec![taps, cout, cin], wt).unwrap());
        let cx = tape.conv1d(xv, wv, 1, Padding::Same).unwrap();
        let ty = tape.conv_transpose1d(yv, wtv, 1, len).unwrap();
        let lhs: f64 = tape.value(cx).iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(tape.value(ty)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }
}

#[test]
fn transposed_conv_rejects_unreachable_length() {
    let mut tape = Tape::new();
    let x = tape.zeros(&[3, 1]);
    let w = tape.zeros(&[4, 1, 1]);
    // full length (3-1)*2+4 = 8
    assert!(tape.conv_transpose1d(x, w, 2, 8).is_ok());
    assert!(tape.conv_transpose1d(x, w, 2, 9).is_err());
}

fn bce_oracle(s: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..s.len() {
        let p = s[i].clamp(1e-7, 1.0 - 1e-7);
        acc += y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln();
    }
    -acc / s.len() as f64
}

#[test]
fn bce_examples() {
    let mut tape = Tape::new();
    let half = tape.constant(Tensor::full(&[4], 0.5));
    let l = tape.bce_loss(half, &[0.5; 4]).unwrap();
    assert!((tape.scalar(l) - std::f64::consts::LN_2).abs() < 1e-15);

    let perfect = tape.constant(Tensor::vector(vec![0.0, 1.0, 1.0, 0.0]).unwrap());
    let l = tape.bce_loss(perfect, &[0.0, 1.0, 1.0, 0.0]).unwrap();
    assert!(tape.scalar(l) >= 0.0 && tape.scalar(l) < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s: Vec<f64> = (0..5).map(|_| rng.random_range(0.01..0.99)).collect();
    let y: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
    let sv = tape.constant(Tensor::vector(s.clone()).unwrap());
    let l = tape.bce_loss(sv, &y).unwrap();
    assert!((tape.scalar(l) - bce_oracle(&s, &y)).abs() < 1e-10);

    assert!(tape.bce_loss(sv, &[0.5; 4]).is_err());
}

#[test]
fn concat_then_split_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let parts = [random(&[2, 3], &mut rng), random(&[4, 3], &mut rng), random(&[1, 3], &mut rng)];
    let mut tape = Tape::new();
    let vars: Vec<Var> = parts.iter().map(|p| tape.constant(p.clone())).collect();
    let joined = tape.concat(&vars, 0).unwrap();
    let back = tape.split(joined, 0, &[2, 4, 1]).unwrap();
    for (v, p) in back.iter().zip(&parts) {
        assert_eq!(tape.value(*v), p.data());
    }
}

proptest! {
    #[test]
    fn softmax_normalised_and_shift_invariant(
        rows in 1usize..5,
        cols in 1usize..6,
        seed in any::<u64>(),
        shift in -100.0f64..100.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::matrix(rows, cols, x.clone()).unwrap());
        let b = tape.constant(Tensor::matrix(rows, cols, x.iter().map(|v| v + shift).collect()).unwrap());
        let sa = tape.softmax(a, 1).unwrap();
        let sb = tape.softmax(b, 1).unwrap();
        for r in 0..rows {
            let row = &tape.value(sa)[r * cols..(r + 1) * cols];
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
        }
        for (p, q) in tape.value(sa).iter().zip(tape.value(sb)) {
            prop_assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn random_shapes_pass_gradcheck(
        t in 1usize..7,
        c in 1usize..4,
        half in 0usize..3,
        dilation in 1usize..3,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&[t, c], &mut rng);
        let w = random(&[2 * half + 1, c, 2], &mut rng);
        let opts = GradcheckOptions::default();
        let report = gradient_check(
            |tape, v| {
                let y = tape.conv1d(v[0], v[1], dilation, Padding::Same)?;
                let y = tape.tanh(y);
                let y = tape.softmax(y, 0)?;
                probe(tape, y)
            },
            &named(vec![x, w]),
            &opts,
        ).unwrap();
        prop_assert!(report.passed, "{:?}", report);
    }
}
