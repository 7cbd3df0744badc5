//! Central finite-difference verification of every tape operation.
//!
//! The oracle only evaluates forward passes, so it is independent of the
//! reverse-mode implementation it checks. Step 1e-5, 64-bit, relative error
//! bound 1e-4.

use rand::Rng;
use wirebench_core::nn::{Graph, Tensor, Var};
use wirebench_core::rng::stream_rng;

const FD_STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

/// Check d(loss)/d(leaf) for every leaf element against central differences.
/// `build` must be a pure function of the leaves (internal randomness must be
/// seeded identically on every call).
fn check_grads(name: &str, leaves: &[Tensor], build: &dyn Fn(&mut Graph, &[Var]) -> Var) {
    // Reverse-mode gradients.
    let mut g = Graph::new();
    let vars: Vec<Var> = leaves.iter().map(|t| g.param(t.clone())).collect();
    let loss = build(&mut g, &vars);
    assert!(
        g.value(loss).is_scalar(),
        "{name}: loss must be scalar, got {:?}",
        g.value(loss).shape()
    );
    g.backward(loss).unwrap();
    let grads: Vec<Vec<f64>> = vars.iter().map(|v| g.grad(*v)).collect();

    let eval = |perturbed: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.input(t.clone())).collect();
        let loss = build(&mut g, &vars);
        g.value(loss).item().unwrap()
    };

    for (li, leaf) in leaves.iter().enumerate() {
        for j in 0..leaf.numel() {
            let mut hi = leaves.to_vec();
            hi[li].data_mut()[j] += FD_STEP;
            let mut lo = leaves.to_vec();
            lo[li].data_mut()[j] -= FD_STEP;
            let fd = (eval(&hi) - eval(&lo)) / (2.0 * FD_STEP);
            let ad = grads[li][j];
            assert!(
                rel_err(ad, fd) < TOL,
                "{name}: leaf {li} element {j}: reverse-mode {ad} vs finite-diff {fd}"
            );
        }
    }
}

fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = stream_rng(seed, 77);
    let data = (0..shape.iter().product::<usize>())
        .map(|_| {
            // Keep values away from ReLU/maxpool kinks.
            let v: f64 = rng.gen_range(0.1..1.0);
            if rng.gen::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn positive_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = stream_rng(seed, 78);
    let data = (0..shape.iter().product::<usize>())
        .map(|_| rng.gen_range(0.05..0.95))
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

#[test]
fn elementwise_and_reductions() {
    let a = rand_tensor(&[3, 4], 1);
    let b = rand_tensor(&[3, 4], 2);
    check_grads("add+sum", &[a.clone(), b.clone()], &|g, v| {
        let y = g.add(v[0], v[1]).unwrap();
        g.sum(y)
    });
    check_grads("sub+mean", &[a.clone(), b.clone()], &|g, v| {
        let y = g.sub(v[0], v[1]).unwrap();
        g.mean(y)
    });
    check_grads("mul+sum", &[a.clone(), b.clone()], &|g, v| {
        let y = g.mul(v[0], v[1]).unwrap();
        g.sum(y)
    });
    check_grads("scale+mean", &[a.clone()], &|g, v| {
        let y = g.scale(v[0], -2.5);
        g.mean(y)
    });
    check_grads("reshape+sum-of-squares", &[a], &|g, v| {
        let y = g.reshape(v[0], &[4, 3]).unwrap();
        let y2 = g.mul(y, y).unwrap();
        g.sum(y2)
    });
}

#[test]
fn activations() {
    let a = rand_tensor(&[4, 5], 3);
    check_grads("relu", &[a.clone()], &|g, v| {
        let y = g.relu(v[0]);
        let y2 = g.mul(y, y).unwrap();
        g.sum(y2)
    });
    check_grads("sigmoid", &[a.clone()], &|g, v| {
        let y = g.sigmoid(v[0]);
        g.sum(y)
    });
    check_grads("softmax", &[a], &|g, v| {
        let y = g.softmax_rows(v[0]).unwrap();
        let y2 = g.mul(y, y).unwrap();
        g.sum(y2)
    });
}

#[test]
fn dense_layer_with_mse() {
    let x = rand_tensor(&[4, 6], 4);
    let w = rand_tensor(&[6, 3], 5);
    let b = rand_tensor(&[3], 6);
    let target = rand_tensor(&[4, 3], 7);
    check_grads("dense+mse", &[x, w, b], &|g, v| {
        let y = g.dense(v[0], v[1], v[2]).unwrap();
        g.mse(y, &target).unwrap()
    });
}

#[test]
fn conv2d_batchnorm_relu_chain() {
    let x = rand_tensor(&[2, 2, 4, 4], 8);
    let w = rand_tensor(&[3, 2, 3, 3], 9);
    let b = rand_tensor(&[3], 10);
    let gamma = positive_tensor(&[3], 11);
    let beta = rand_tensor(&[3], 12);
    check_grads("conv2d+bn+relu", &[x, w, b, gamma, beta], &|g, v| {
        let y = g.conv2d(v[0], v[1], v[2], 1, 1).unwrap();
        let (y, _) = g.batchnorm_train(y, v[3], v[4]).unwrap();
        let y = g.relu(y);
        let y2 = g.mul(y, y).unwrap();
        g.mean(y2)
    });
}

#[test]
fn conv2d_stride_2_no_padding() {
    let x = rand_tensor(&[2, 3, 5, 5], 13);
    let w = rand_tensor(&[2, 3, 3, 3], 14);
    let b = rand_tensor(&[2], 15);
    check_grads("conv2d-s2", &[x, w, b], &|g, v| {
        let y = g.conv2d(v[0], v[1], v[2], 2, 0).unwrap();
        let y2 = g.mul(y, y).unwrap();
        g.sum(y2)
    });
}

#[test]
fn conv1d_chain() {
    let x = rand_tensor(&[3, 4, 6], 16);
    let w = rand_tensor(&[5, 4, 3], 17);
    let b = rand_tensor(&[5], 18);
    let gamma = positive_tensor(&[5], 19);
    let beta = rand_tensor(&[5], 20);
    check_grads("conv1d+bn1d", &[x, w, b, gamma, beta], &|g, v| {
        let y = g.conv1d(v[0], v[1], v[2], 1, 1).unwrap();
        let (y, _) = g.batchnorm_train(y, v[3], v[4]).unwrap();
        let y2 = g.mul(y, y).unwrap();
        g.mean(y2)
    });
}

#[test]
fn pooling_and_upsampling() {
    let x = rand_tensor(&[2, 2, 4, 4], 21);
    check_grads("maxpool", &[x.clone()], &|g, v| {
        let y = g.maxpool2x2(v[0]).unwrap();
        let y2 = g.mul(y, y).unwrap();
        g.sum(y2)
    });
    check_grads("upsample", &[x], &|g, v| {
        let y = g.upsample2x(v[0]).unwrap();
        let y2 = g.mul(y, y).unwrap();
        g.mean(y2)
    });
}

#[test]
fn batchnorm_eval_mode() {
    let x = rand_tensor(&[3, 4], 22);
    let gamma = positive_tensor(&[4], 23);
    let beta = rand_tensor(&[4], 24);
    check_grads("bn-eval", &[x, gamma, beta], &|g, v| {
        let y = g
            .batchnorm_eval(v[0], v[1], v[2], &[0.1, -0.2, 0.3, 0.0], &[1.1, 0.9, 1.3, 0.7])
            .unwrap();
        let y2 = g.mul(y, y).unwrap();
        g.sum(y2)
    });
}

#[test]
fn dropout_fixed_mask() {
    let x = rand_tensor(&[4, 4], 25);
    check_grads("dropout", &[x], &|g, v| {
        // Same seed every call: the mask is part of the function.
        let mut rng = stream_rng(1234, 0);
        let y = g.dropout(v[0], 0.4, &mut rng).unwrap();
        let y2 = g.mul(y, y).unwrap();
        g.sum(y2)
    });
}

#[test]
fn losses() {
    let probs = positive_tensor(&[5], 26);
    check_grads("bce", &[probs], &|g, v| {
        g.bce(v[0], &[1.0, 0.0, 1.0, 1.0, 0.0]).unwrap()
    });

    let logits = rand_tensor(&[4, 3], 27);
    check_grads("softmax+ce", &[logits], &|g, v| {
        let p = g.softmax_rows(v[0]).unwrap();
        g.cross_entropy(p, &[0, 2, 1, 2]).unwrap()
    });

    let pred = rand_tensor(&[3, 4], 28);
    let target = rand_tensor(&[3, 4], 29);
    check_grads("mse", &[pred], &|g, v| g.mse(v[0], &target).unwrap());
}

#[test]
fn neg_se_loss_grad() {
    // Strictly positive powers away from the simplex boundary.
    let p = positive_tensor(&[2, 3], 30);
    let mut rng = stream_rng(31, 0);
    let gains: Vec<Vec<f64>> = (0..2)
        .map(|_| {
            let mut g: Vec<f64> = (0..9).map(|_| rng.gen_range(0.05..1.0)).collect();
            for i in 0..3 {
                g[i * 3 + i] += 1.0;
            }
            g
        })
        .collect();
    check_grads("neg_se", &[p], &|g, v| {
        g.neg_se(v[0], &gains, &[0.2, 0.35]).unwrap()
    });
}

#[test]
fn composite_network_through_everything() {
    // One chain exercising dense -> reshape -> conv -> pool -> flatten ->
    // dense -> softmax -> ce, all parameters checked.
    let x = rand_tensor(&[2, 8], 32);
    let w1 = rand_tensor(&[8, 16], 33);
    let b1 = rand_tensor(&[16], 34);
    let wc = rand_tensor(&[2, 1, 3, 3], 35);
    let bc = rand_tensor(&[2], 36);
    let w2 = rand_tensor(&[8, 3], 37);
    let b2 = rand_tensor(&[3], 38);
    check_grads("composite", &[x, w1, b1, wc, bc, w2, b2], &|g, v| {
        let h = g.dense(v[0], v[1], v[2]).unwrap();
        let h = g.reshape(h, &[2, 1, 4, 4]).unwrap();
        let h = g.conv2d(h, v[3], v[4], 1, 1).unwrap();
        let h = g.relu(h);
        let h = g.maxpool2x2(h).unwrap();
        let h = g.reshape(h, &[2, 8]).unwrap();
        let h = g.dense(h, v[5], v[6]).unwrap();
        let p = g.softmax_rows(h).unwrap();
        g.cross_entropy(p, &[1, 0]).unwrap()
    });
}
