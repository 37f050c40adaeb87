//! Helpers shared by integration tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saa_core::model::{backward, ArchConfig, ClassifierParams, LossSpec, Tensor};

pub fn random_batch(arch: &ArchConfig, n: usize, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * arch.image_len()).map(|_| rng.gen_range(0.0..255.0)).collect();
    Tensor::new(vec![n, arch.channels, arch.height, arch.width], data).unwrap()
}

fn conv3x3(input: &[f64], cin: usize, cout: usize, h: usize, w: usize, wt: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cout * h * w];
    for o in 0..cout {
        for y in 0..h {
            for x in 0..w {
                let mut acc = bias[o];
                for c in 0..cin {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let (sy, sx) = (y as isize + ky as isize - 1, x as isize + kx as isize - 1);
                            if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                                acc += wt[((o * cin + c) * 3 + ky) * 3 + kx] * input[(c * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                }
                out[(o * h + y) * w + x] = acc;
            }
        }
    }
    out
}

/// 2x2 max pool of `relu(z)`. Also returns the smallest gap between the two largest
/// entries of any window whose maximum is positive.
fn relu_pool(z: &[f64], ch: usize, h: usize, w: usize) -> (Vec<f64>, f64) {
    let mut out = vec![0.0; ch * (h / 2) * (w / 2)];
    let mut gap = f64::INFINITY;
    for c in 0..ch {
        for y in 0..h / 2 {
            for x in 0..w / 2 {
                let mut v: Vec<f64> =
                    (0..4).map(|k| z[(c * h + 2 * y + k / 2) * w + 2 * x + k % 2].max(0.0)).collect();
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if v[0] > 0.0 {
                    gap = gap.min(v[0] - v[1]);
                }
                out[(c * (h / 2) + y) * (w / 2) + x] = v[0];
            }
        }
    }
    (out, gap)
}

/// True when no ReLU input and no pooling decision of any image can change under a
/// change of at most `step` to any single parameter.
///
/// Uses per-layer worst-case bounds: inputs lie in [0, 1] and every later activation
/// moves by at most the row-sum of absolute weights times the change upstream.
pub fn kink_free(p: &ClassifierParams<f64>, images: &Tensor<f64>, step: f64) -> bool {
    let arch = p.arch();
    let (c_in, h, w) = (arch.channels, arch.height, arch.width);
    let get = |n: &str| p.get(n).unwrap().data();
    let (w1, b1, w2, b2, w3, b3) =
        (get("conv1.weight"), get("conv1.bias"), get("conv2.weight"), get("conv2.bias"), get("fc1.weight"), get("fc1.bias"));
    let (c1, c2) = (b1.len(), b2.len());
    let flat_len = w3.len() / b3.len();
    let row_sum = |m: &[f64], cols: usize| m.chunks(cols).map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let (l2, l3) = (row_sum(w2, c1 * 9), row_sum(w3, flat_len));

    let mut z_min = [f64::INFINITY; 3];
    let mut gaps = [f64::INFINITY; 2];
    let (mut p1_max, mut flat_max) = (0.0f64, 0.0f64);
    for img in images.rows() {
        let x: Vec<f64> = img.iter().map(|v| v / 255.0).collect();
        let z1 = conv3x3(&x, c_in, c1, h, w, w1, b1);
        let (p1, g1) = relu_pool(&z1, c1, h, w);
        let z2 = conv3x3(&p1, c1, c2, h / 2, w / 2, w2, b2);
        let (flat, g2) = relu_pool(&z2, c2, h / 2, w / 2);
        let z3: Vec<f64> = w3.chunks(flat_len).zip(b3).map(|(r, b)| b + r.iter().zip(&flat).map(|(a, v)| a * v).sum::<f64>()).collect();
        for (m, z) in z_min.iter_mut().zip([&z1, &z2, &z3]) {
            *m = z.iter().fold(*m, |acc, v| acc.min(v.abs()));
        }
        gaps = [gaps[0].min(g1), gaps[1].min(g2)];
        p1_max = p1.iter().fold(p1_max, |a, &v| a.max(v));
        flat_max = flat.iter().fold(flat_max, |a, &v| a.max(v));
    }
    let d1 = step;
    let d2 = step * l2.max(p1_max).max(1.0);
    let d3 = step * (l2 * l3).max(p1_max.max(1.0) * l3).max(flat_max.max(1.0));
    z_min[0] > d1 && gaps[0] > 2.0 * d1 && z_min[1] > d2 && gaps[1] > 2.0 * d2 && z_min[2] > d3
}

/// A random network with non-zero biases and an input batch, redrawn until no
/// finite-difference probe of size `step` can cross a ReLU or pooling kink.
/// Returns the fixture and the number of draws it took.
pub fn smooth_fixture(seed: u64, step: f64) -> (ClassifierParams<f64>, Tensor<f64>, u64) {
    let arch = ArchConfig::new(2, 8, 8, 3).unwrap();
    for draw in 0.. {
        let sub = seed.wrapping_mul(1_000_003).wrapping_add(draw);
        let mut params = ClassifierParams::<f64>::init(arch, sub);
        let mut rng = ChaCha8Rng::seed_from_u64(sub ^ 0xb1a5);
        for (i, t) in params.tensors_mut().iter_mut().enumerate() {
            if i % 2 == 1 {
                t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.05..0.05));
            }
        }
        let images = random_batch(&arch, 2, sub + 100);
        if kink_free(&params, &images, step) {
            return (params, images, draw + 1);
        }
    }
    unreachable!()
}

/// Relative error of every parameter's analytic gradient against central differences,
/// on a fixture from [`smooth_fixture`].
/// Returns the worst entry as (relative error, tensor name, index).
pub fn worst_gradient_error(seed: u64) -> (f64, String, usize) {
    let step = 1e-5;
    let (mut params, images, _) = smooth_fixture(seed, step);
    let spec = LossSpec { targets: vec![0, 2], weights: vec![1.0, 0.7] };
    let (_, grads) = backward(&params, &images, &spec).unwrap();

    let mut worst = (0.0, String::new(), 0);
    let names: Vec<&str> = params.named().map(|(n, _)| n).collect();
    for t in 0..names.len() {
        for i in 0..params.tensors()[t].len() {
            let orig = params.tensors()[t].data()[i];
            params.tensors_mut()[t].data_mut()[i] = orig + step;
            let (up, _) = backward(&params, &images, &spec).unwrap();
            params.tensors_mut()[t].data_mut()[i] = orig - step;
            let (down, _) = backward(&params, &images, &spec).unwrap();
            params.tensors_mut()[t].data_mut()[i] = orig;
            let fd = (up - down) / (2.0 * step);
            let analytic = grads.tensors()[t].data()[i];
            let rel = (analytic - fd).abs() / fd.abs().max(1e-8);
            if rel > worst.0 {
                worst = (rel, names[t].to_string(), i);
            }
        }
    }
    worst
}
