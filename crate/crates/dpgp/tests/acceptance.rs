//! Acceptance run on the default surrogate dataset: one PASS/FAIL line per
//! criterion. Set `DPGP_ACCEPTANCE_STRICT=1` to exit non-zero on a FAIL.

use std::path::Path;
use std::time::{Duration, Instant};

use dpgp::commands::{self, LOG_FILE};
use dpgp::config::RunConfig;
use dpgp::dataset_io::save_dataset;
use dpgp_core::ensemble::{assess_member, summarize, MemberOutcome};
use dpgp_core::linalg::{norm, Matrix};
use dpgp_core::metrics::{calibration_curve, distance_report};
use dpgp_core::models::{
    build_model, gp_posterior_sigma, ArchConfig, GpHead, ModelAssembly, ModelKind, PreparedData, Stage, TrainConfig,
};
use dpgp_core::nn::{
    concrete_dropout_forward, dense_backward, dense_forward, dropout_backward, dropout_forward,
    finite_difference_check, gaussian_nll, quantile_loss, relu, relu_backward, BlockDropout, ConcreteDropout, Dense,
    FrozenProjection, Linear, Mode, ResidualBlock, RffLayer, SpectralDense, CONCRETE_TEMPERATURE, FD_STEP,
    QUANTILES, SIGMA_FLOOR,
};
use dpgp_core::signal::{lulu_lower, lulu_smooth, lulu_upper, RegionSpec};
use dpgp_core::simgen::{build_dataset, Dataset, DatasetSpec, SimConfig, Split};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

const FD_TOL: f64 = 1e-4;
const SEEDS: u64 = 5;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

#[derive(Default)]
struct Board {
    failed: Vec<u8>,
}

impl Board {
    fn record(&mut self, id: u8, title: &str, elapsed: Duration, budget: Option<Duration>, v: Verdict) {
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let pass = v.pass && in_time;
        if !pass {
            self.failed.push(id);
        }
        let budget = budget.map(|b| format!(", budget {b:.1?}")).unwrap_or_default();
        println!(
            "{} criterion {id:>2} {title}: {} ({elapsed:.1?}{budget})",
            if pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }

    fn run(&mut self, id: u8, title: &str, budget: Option<Duration>, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let v = f();
        self.record(id, title, start.elapsed(), budget, v);
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

fn with(m: &Matrix, data: &[f64]) -> Matrix {
    Matrix::from_vec(m.rows(), m.cols(), data.to_vec()).unwrap()
}

/// `Σ R ⊙ Y`; its gradient with respect to `Y` is `R`.
fn probe(y: &Matrix, r: &Matrix) -> f64 {
    y.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn tiny_dataset() -> Dataset {
    let spec = DatasetSpec {
        id_values: vec![3000.0, 3300.0, 3600.0],
        ood_values: vec![2600.0, 2800.0],
        train_count: 20,
        region: RegionSpec {
            window_len: 10,
            ..RegionSpec::default()
        },
        ..DatasetSpec::default()
    };
    build_dataset(&spec, &SimConfig::default()).unwrap()
}

fn tiny_arch() -> ArchConfig {
    ArchConfig {
        latent_dim: 6,
        rff_features: 16,
        residual_blocks: 2,
        median_rows: 20,
        ..ArchConfig::default()
    }
}

// ---------------------------------------------------------------- criterion 1

fn svd_bound(d: &Dataset) -> Verdict {
    let (_, r) = commands::svd_summary(d, 64).unwrap();
    verdict(
        r.bound_violations == 0 && r.rows == d.train.len(),
        format!(
            "{} of {} rows violate the bracket, max norm loss {:.4} <= tail energy {:.4}",
            r.bound_violations, r.rows, r.max_norm_loss, r.tail_energy
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

struct Checks(Vec<(String, f64)>);

impl Checks {
    fn add(&mut self, name: &str, err: f64) {
        self.0.push((name.to_string(), err));
    }

    fn fd(&mut self, name: &str, f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64]) {
        self.add(name, finite_difference_check(f, x, analytic, FD_STEP));
    }
}

fn block(alpha: Option<f64>, dropout: BlockDropout, width: usize, r: &mut ChaCha8Rng) -> ResidualBlock {
    let dense = Dense::he(width, width, true, r);
    let linear = match alpha {
        Some(a) => Linear::Spectral(SpectralDense::new(dense, a, r)),
        None => Linear::Plain(dense),
    };
    ResidualBlock::new(linear, dropout).unwrap()
}

fn layer_checks(c: &mut Checks) {
    let mut r = rng(2);

    let x = gaussian(4, 5, &mut r);
    let w = gaussian(5, 3, &mut r);
    let b = vec![0.1, -0.2, 0.3];
    let rp = gaussian(4, 3, &mut r);
    let g = dense_backward(&x, &w, &rp).unwrap();
    c.fd("dense dx", |v| probe(&dense_forward(&with(&x, v), &w, Some(&b)).unwrap(), &rp), x.as_slice(), g.dx.as_slice());
    c.fd("dense dw", |v| probe(&dense_forward(&x, &with(&w, v), Some(&b)).unwrap(), &rp), w.as_slice(), g.dw.as_slice());
    c.fd("dense db", |v| probe(&dense_forward(&x, &w, Some(v)).unwrap(), &rp), &b, &g.db);

    let w = gaussian(4, 3, &mut r);
    let x = gaussian(3, 4, &mut r);
    let rp = gaussian(3, 3, &mut r);
    let mut layer = SpectralDense::new(Dense::new(w.clone(), true), 0.5, &mut r);
    let power = layer.power.clone();
    let dx = layer.backward(&x, &rp, true).unwrap();
    let spectral = |wv: &Matrix, xv: &Matrix| {
        let l = SpectralDense {
            dense: Dense::new(wv.clone(), true),
            alpha: 0.5,
            power: power.clone(),
        };
        probe(&l.forward(xv).unwrap(), &rp)
    };
    c.fd("spectral dense dw", |v| spectral(&with(&w, v), &x), w.as_slice(), layer.dense.w.grad.as_slice());
    c.fd("spectral dense dx", |v| spectral(&w, &with(&x, v)), x.as_slice(), dx.as_slice());

    let x = gaussian(3, 6, &mut r);
    let p = FrozenProjection { w: gaussian(6, 2, &mut r) };
    let rp = gaussian(3, 2, &mut r);
    c.fd("svd projection dx", |v| probe(&p.forward(&with(&x, v)).unwrap(), &rp), x.as_slice(), p.backward(&rp).as_slice());

    let x = Matrix::from_fn(3, 4, |i, j| if (i + j) % 2 == 0 { 0.5 + i as f64 } else { -0.7 - j as f64 });
    let rp = gaussian(3, 4, &mut r);
    let dx = relu_backward(&relu(&x), &rp);
    c.fd("relu dx", |v| probe(&relu(&with(&x, v)), &rp), x.as_slice(), dx.as_slice());

    let x = gaussian(4, 5, &mut r);
    let rp = gaussian(4, 5, &mut r);
    let (_, mask) = dropout_forward(&x, 0.3, Mode::Train, &mut rng(3)).unwrap();
    let dx = dropout_backward(mask.as_ref(), &rp);
    c.fd(
        "dropout dx",
        |v| probe(&dropout_forward(&with(&x, v), 0.3, Mode::Train, &mut rng(3)).unwrap().0, &rp),
        x.as_slice(),
        dx.as_slice(),
    );

    let mut cd = ConcreteDropout::new(0.1);
    let l0 = cd.logit.get();
    let (_, cache) = cd.forward(&x, Mode::Train, &mut rng(4));
    let dx = cd.backward(&x, cache.as_ref(), &rp);
    let concrete = |xv: &Matrix, l: f64| {
        probe(&concrete_dropout_forward(xv, l, CONCRETE_TEMPERATURE, Mode::Train, &mut rng(4)).0, &rp)
    };
    c.fd("concrete dropout dx", |v| concrete(&with(&x, v), l0), x.as_slice(), dx.as_slice());
    c.fd("concrete dropout dlogit", |v| concrete(&x, v[0]), &[l0], &[cd.logit.grad.get(0, 0)]);

    for (name, alpha, dropout, logit) in [
        ("residual block (capped, fixed dropout)", Some(0.3), BlockDropout::Fixed(0.2), 0.0),
        ("residual block (plain, concrete dropout)", None, BlockDropout::Concrete, -1.0),
    ] {
        let b = block(alpha, dropout, 5, &mut r);
        let x = gaussian(4, 5, &mut r);
        let rp = gaussian(4, 5, &mut r);
        let run = |blk: &ResidualBlock, xv: &Matrix, l: f64| {
            let (y, cache) = blk.forward(xv, Mode::Train, l, &mut rng(99)).unwrap();
            (probe(&y, &rp), cache)
        };
        let (_, cache) = run(&b, &x, logit);
        let mut grads = b.clone();
        let mut dlogit = 0.0;
        let dx = grads.backward(&cache, &rp, &mut dlogit);
        c.fd(&format!("{name} dx"), |v| run(&b, &with(&x, v), logit).0, x.as_slice(), dx.as_slice());
        if dropout == BlockDropout::Concrete {
            c.fd(&format!("{name} dlogit"), |v| run(&b, &x, v[0]).0, &[logit], &[dlogit]);
        }
        let analytic = grads.linear.params_mut()[0].grad.clone();
        let w0 = b.clone().linear.params_mut()[0].value.clone();
        let fw = |v: &[f64]| {
            let mut bb = b.clone();
            bb.linear.params_mut()[0].value = with(&w0, v);
            run(&bb, &x, logit).0
        };
        c.fd(&format!("{name} dw"), fw, w0.as_slice(), analytic.as_slice());
    }

    let mut rff = RffLayer::new(4, 16, 0.7, &mut r);
    let x = gaussian(3, 4, &mut r);
    let rp = gaussian(3, 16, &mut r);
    let (_, cache) = rff.forward(&x).unwrap();
    let dx = rff.backward(&cache, &rp);
    c.fd("rff dx", |v| probe(&rff.forward(&with(&x, v)).unwrap().0, &rp), x.as_slice(), dx.as_slice());
    let rho = rff.rho.get();
    let frho = |v: &[f64]| {
        let mut l = rff.clone();
        l.rho.value.as_mut_slice()[0] = v[0];
        probe(&l.forward(&x).unwrap().0, &rp)
    };
    c.fd("rff dlengthscale", frho, &[rho], &[rff.rho.grad.get(0, 0)]);

    let mut head = GpHead::new(5, 0.4).unwrap();
    head.refresh(&gaussian(12, 5, &mut r)).unwrap();
    let star = gaussian(4, 5, &mut r);
    let ds: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
    let (_, frozen) = head.sigma_frozen(&star);
    let mut grads = head.clone();
    let dphi = grads.sigma_backward(&frozen, &ds);
    let weighted = |h: &GpHead, s: &Matrix| h.sigma_frozen(s).0.iter().zip(&ds).map(|(a, b)| a * b).sum::<f64>();
    c.fd("gp sigma dphi", |v| weighted(&head, &with(&star, v)), star.as_slice(), dphi.as_slice());
    let raw = head.noise_raw.get();
    let fnoise = |v: &[f64]| {
        let mut h = head.clone();
        h.noise_raw.value.as_mut_slice()[0] = v[0];
        weighted(&h, &star)
    };
    c.fd("gp sigma dnoise", fnoise, &[raw], &[grads.noise_raw.grad.get(0, 0)]);

    let y = gaussian(4, 3, &mut r);
    let pred = gaussian(4, 9, &mut r);
    let (_, g) = quantile_loss(&y, &pred, &QUANTILES).unwrap();
    c.fd("quantile loss", |v| quantile_loss(&y, &with(&pred, v), &QUANTILES).unwrap().0, pred.as_slice(), g.as_slice());

    let y = gaussian(5, 3, &mut r);
    let mu = gaussian(5, 3, &mut r);
    let sigma = Matrix::from_fn(5, 3, |_, _| r.random_range(0.3..2.0));
    let out = gaussian_nll(&y, &mu, &sigma, SIGMA_FLOOR).unwrap();
    c.fd("gaussian nll dmean", |v| gaussian_nll(&y, &with(&mu, v), &sigma, SIGMA_FLOOR).unwrap().value, mu.as_slice(), out.d_mean.as_slice());
    c.fd("gaussian nll dsigma", |v| gaussian_nll(&y, &mu, &with(&sigma, v), SIGMA_FLOOR).unwrap().value, sigma.as_slice(), out.d_sigma.as_slice());
}

/// Per-entry mean and population standard deviation over passes.
fn moments(outs: &[Matrix]) -> (Matrix, Matrix) {
    let (rows, cols) = outs[0].shape();
    let m = outs.len() as f64;
    let mu = Matrix::from_fn(rows, cols, |i, j| outs.iter().map(|o| o.get(i, j)).sum::<f64>() / m);
    let sd = Matrix::from_fn(rows, cols, |i, j| {
        let v = outs.iter().map(|o| (o.get(i, j) - mu.get(i, j)).powi(2)).sum::<f64>() / m;
        v.sqrt()
    });
    (mu, sd)
}

fn rel_err(num: f64, a: f64) -> f64 {
    (num - a).abs() / num.abs().max(a.abs()).max(1e-6)
}

/// Whole training objective of every kind against central differences. The
/// BNN weights treat σ as a constant; only its dropout logit follows σ.
fn objective_checks(c: &mut Checks) {
    let d = tiny_dataset();
    let data = PreparedData::new(&d);
    let rows: Vec<usize> = (0..6).collect();
    let y = data.y_train.select_rows(&rows);
    let cfg = TrainConfig {
        mc_train_passes: 4,
        ..TrainConfig::default()
    };
    let h = FD_STEP;
    for kind in ModelKind::ALL {
        let mut m = build_model(kind, &tiny_arch(), &d, 8, None).unwrap();
        let z = m.extract(&data.x_train.select_rows(&rows)).unwrap();
        let full = |m: &mut ModelAssembly, z: &Matrix| m.objective(z, &y, &cfg, Mode::Train, false, &mut rng(77)).unwrap().0;
        let passes = |m: &ModelAssembly, z: &Matrix| {
            let mut r = rng(77);
            let outs: Vec<Matrix> =
                (0..cfg.mc_train_passes).map(|_| m.trunk_forward(z, Mode::Train, &mut r).unwrap().0).collect();
            moments(&outs)
        };
        let bnn = kind == ModelKind::Bnn;
        let fixed_sd = bnn.then(|| passes(&m, &z).1);
        let eval = |m: &mut ModelAssembly, z: &Matrix, logit: bool| match &fixed_sd {
            Some(sd) if !logit => gaussian_nll(&y, &passes(m, z).0, sd, cfg.sigma_floor).unwrap().value,
            _ => full(m, z),
        };
        m.zero_grad();
        let dz = m.objective(&z, &y, &cfg, Mode::Train, true, &mut rng(77)).unwrap().1.unwrap();
        let grads: Vec<Vec<f64>> = m.params_mut().iter().map(|p| p.grad.as_slice().to_vec()).collect();
        let mut pick = rng(1);
        let last = grads.len() - 1;
        let mut worst: f64 = 0.0;
        for (pi, g) in grads.iter().enumerate() {
            for _ in 0..g.len().min(6) {
                let k = pick.random_range(0..g.len());
                let orig = m.params_mut()[pi].value.as_slice()[k];
                m.params_mut()[pi].value.as_mut_slice()[k] = orig + h;
                let up = eval(&mut m, &z, bnn && pi == last);
                m.params_mut()[pi].value.as_mut_slice()[k] = orig - h;
                let down = eval(&mut m, &z, bnn && pi == last);
                m.params_mut()[pi].value.as_mut_slice()[k] = orig;
                worst = worst.max(rel_err((up - down) / (2.0 * h), g[k]));
            }
        }
        c.add(&format!("{} objective parameters", kind.name()), worst);
        let mut worst: f64 = 0.0;
        for k in (0..z.as_slice().len()).step_by(5) {
            let mut zp = z.clone();
            zp.as_mut_slice()[k] += h;
            let mut zm = z.clone();
            zm.as_mut_slice()[k] -= h;
            let num = (eval(&mut m, &zp, false) - eval(&mut m, &zm, false)) / (2.0 * h);
            worst = worst.max(rel_err(num, dz.as_slice()[k]));
        }
        c.add(&format!("{} objective latent input", kind.name()), worst);
    }
}

fn gradient_suite() -> Verdict {
    let mut c = Checks(Vec::new());
    layer_checks(&mut c);
    objective_checks(&mut c);
    let (name, worst) = c.0.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().clone();
    let failing: Vec<&str> = c.0.iter().filter(|(_, e)| e.is_nan() || *e > FD_TOL).map(|(n, _)| n.as_str()).collect();
    verdict(
        failing.is_empty(),
        format!("{} checks, worst relative error {worst:.2e} ({name}), failing {failing:?}", c.0.len()),
    )
}

// ---------------------------------------------------------------- criterion 3

/// Conditional covariance `k** − k*ᵀ (K + σ_n² I)⁻¹ k*` of `f* = φ*ᵀw`,
/// `w ~ N(0, I)`, given noisy observations of `Φw`.
fn conditional_sigma(phi: &Matrix, star: &[f64], noise: f64) -> f64 {
    let n = phi.rows();
    let f = DMatrix::from_row_slice(n, phi.cols(), phi.as_slice());
    let s = DVector::from_column_slice(star);
    let k = &f * f.transpose() + DMatrix::identity(n, n) * (noise * noise);
    let ks = &f * &s;
    let solved = k.lu().solve(&ks).unwrap();
    (s.dot(&s) - ks.dot(&solved)).max(0.0).sqrt()
}

fn gp_oracle() -> Verdict {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(1..=20);
        let d = r.random_range(1..=8);
        let noise = r.random_range(0.05..2.0);
        let phi = Matrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0));
        let star: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut head = GpHead::new(d, noise).unwrap();
        head.refresh(&phi).unwrap();
        let got = gp_posterior_sigma(&head, &star).unwrap();
        worst = worst.max((got - conditional_sigma(&phi, &star, head.noise())).abs());
    }
    verdict(worst <= 1e-10, format!("100 instances, max |Δσ| {worst:.2e} (tolerance 1e-10)"))
}

// ---------------------------------------------------------------- criterion 4

fn unit(dim: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(r)).collect();
    let n = norm(&v);
    v.into_iter().map(|a| a / n).collect()
}

fn rff_fidelity() -> Verdict {
    let mut r = rng(4);
    let dim = 64;
    let layer = RffLayer::new(dim, 128, 1.0, &mut r);
    let mut total = 0.0;
    let pairs = 1000;
    for _ in 0..pairs {
        let (x, y) = (unit(dim, &mut r), unit(dim, &mut r));
        let (phi, _) = layer.forward(&Matrix::from_rows(&[&x, &y]).unwrap()).unwrap();
        let approx: f64 = phi.row(0).iter().zip(phi.row(1)).map(|(a, b)| a * b).sum();
        let sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        total += (approx - (-sq / 2.0).exp()).abs();
    }
    let mad = total / pairs as f64;
    verdict(mad <= 0.08, format!("D=128, λ=1, mean absolute deviation {mad:.4} over {pairs} unit pairs (limit 0.08)"))
}

// ---------------------------------------------------------------- criterion 5

fn lulu_properties() -> Verdict {
    let mut r = rng(5);
    let mut idempotent = 0;
    for _ in 0..1000 {
        let n = r.random_range(1..=3);
        let len = r.random_range(2 * n + 1..200);
        let mut x: Vec<f64> = (0..len).map(|i| (i as f64 * 0.1).sin() + 0.05 * r.random::<f64>()).collect();
        for _ in 0..r.random_range(0..len / 5 + 1) {
            let at = r.random_range(0..len);
            let width = r.random_range(1..=n + 1).min(len - at);
            let amp = if r.random::<bool>() { 10.0 } else { -10.0 } * r.random::<f64>();
            x[at..at + width].iter_mut().for_each(|v| *v += amp);
        }
        let s = lulu_smooth(&x, n).unwrap();
        let l = lulu_lower(&x, n).unwrap();
        let u = lulu_upper(&x, n).unwrap();
        if lulu_smooth(&s, n).unwrap() == s && lulu_lower(&l, n).unwrap() == l && lulu_upper(&u, n).unwrap() == u {
            idempotent += 1;
        }
    }
    let spike = lulu_smooth(&[0.0, 0.0, 10.0, 0.0, 0.0], 1).unwrap() == vec![0.0; 5];
    let mut monotone = 0;
    for k in 0..100 {
        let n = r.random_range(1..=3);
        let mut acc = 0.0;
        let mut x: Vec<f64> = (0..50)
            .map(|_| {
                acc += r.random::<f64>();
                acc
            })
            .collect();
        if k % 2 == 1 {
            x.reverse();
        }
        if lulu_smooth(&x, n).unwrap() == x && lulu_lower(&x, n).unwrap() == x && lulu_upper(&x, n).unwrap() == x {
            monotone += 1;
        }
    }
    verdict(
        idempotent == 1000 && spike && monotone == 100,
        format!("idempotent {idempotent}/1000, spike removed {spike}, monotone fixed points {monotone}/100"),
    )
}

// ---------------------------------------------------------------- criterion 6

/// Direct evaluation: for each level count the points whose predicted CDF
/// value lies at or below it.
fn brute_calibration(y: &[f64], mu: &[f64], sigma: &[f64], m: usize) -> [f64; 3] {
    let (mut abs, mut sq, mut area) = (0.0, 0.0, 0.0);
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..m {
        let p = 0.01 + 0.98 * i as f64 / (m - 1) as f64;
        let hits = (0..y.len())
            .filter(|&k| 0.5 * libm::erfc(-(y[k] - mu[k]) / sigma[k] / 2f64.sqrt()) <= p)
            .count();
        let gap = (hits as f64 / y.len() as f64 - p).abs();
        abs += gap;
        sq += gap * gap;
        if let Some((p0, g0)) = prev {
            area += (gap + g0) * (p - p0) / 2.0;
        }
        prev = Some((p, gap));
    }
    [(sq / m as f64).sqrt(), abs / m as f64, area]
}

fn calibration_oracle() -> Verdict {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(1..200);
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        let mu: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| r.random_range(0.1..3.0)).collect();
        let c = calibration_curve(&y, &mu, &s, 100).unwrap();
        let b = brute_calibration(&y, &mu, &s, 100);
        for (got, want) in [c.rmsce, c.mace, c.miscalibration_area].into_iter().zip(b) {
            worst = worst.max((got - want).abs());
        }
    }
    let n = 100_000;
    let mu: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
    let s: Vec<f64> = (0..n).map(|_| r.random_range(0.2..4.0)).collect();
    let y: Vec<f64> = mu
        .iter()
        .zip(&s)
        .map(|(m, s)| {
            let z: f64 = StandardNormal.sample(&mut r);
            m + s * z
        })
        .collect();
    let mace = calibration_curve(&y, &mu, &s, 100).unwrap().mace;
    verdict(
        worst <= 1e-12 && mace <= 0.01,
        format!("max deviation from brute force {worst:.1e} (limit 1e-12), calibrated MACE {mace:.4} at N=1e5 (limit 0.01)"),
    )
}

// ---------------------------------------------------------- trained criteria

struct KindRun {
    kind: ModelKind,
    members: Vec<MemberOutcome>,
}

impl KindRun {
    fn mean_of(&self, f: impl Fn(&MemberOutcome) -> f64) -> f64 {
        mean(&self.members.iter().map(f).collect::<Vec<_>>())
    }
}

fn first_seeds(members: &[MemberOutcome]) -> Vec<MemberOutcome> {
    members.iter().filter(|m| m.seed < SEEDS).cloned().collect()
}

fn ensemble_of(cfg: &RunConfig, d: &Dataset, kind: ModelKind) -> KindRun {
    let mut cfg = cfg.resolved(kind);
    cfg.training.ensemble_size = SEEDS as usize;
    let report = commands::run_ensemble_parallel(&cfg, d, kind).unwrap();
    KindRun {
        kind,
        members: report.members,
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != LOG_FILE)
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

/// Runs the report pipeline into `root` and returns every output file.
fn pipeline(cfg: &RunConfig, root: &Path) -> Vec<(String, Vec<u8>)> {
    let data = root.join("data");
    let model = root.join("model");
    let reports = root.join("reports");
    commands::gen_data(cfg, &data).unwrap();
    commands::train_cmd(cfg, &data, ModelKind::SvdDngpa, 0, &model).unwrap();
    commands::evaluate_cmd(cfg, &model, &data, Split::IdTest, &reports).unwrap();
    commands::evaluate_cmd(cfg, &model, &data, Split::Ood, &reports).unwrap();
    commands::ood_grid_cmd(cfg, &model, &data, &reports).unwrap();
    commands::distance_cmd(cfg, &model, &data, &reports).unwrap();
    let mut all = Vec::new();
    for dir in [&data, &model, &reports] {
        let tag = dir.file_name().unwrap().to_string_lossy().into_owned();
        all.extend(files(dir).into_iter().map(|(n, b)| (format!("{tag}/{n}"), b)));
    }
    all
}

fn main() {
    let mut board = Board::default();
    let cfg = RunConfig::default();
    let start = Instant::now();
    let d = commands::generate(&cfg).unwrap();
    println!(
        "default dataset: {} train, {} ID test, {} OOD, {} features ({:.1?})",
        d.train.len(),
        d.id_test.len(),
        d.ood.len(),
        d.width,
        start.elapsed()
    );

    board.run(1, "SVD norm bracket", secs(10), || svd_bound(&d));
    board.run(2, "gradient suite", secs(60), gradient_suite);
    board.run(3, "GP head oracle", secs(5), gp_oracle);
    board.run(4, "RFF kernel fidelity", secs(5), rff_fidelity);
    board.run(5, "LULU properties", secs(5), lulu_properties);
    board.run(6, "calibration oracle", secs(10), calibration_oracle);

    // criterion 7: one SVD-DNGPA member end to end
    let svd_cfg = cfg.resolved(ModelKind::SvdDngpa);
    let data = PreparedData::new(&d);
    let start = Instant::now();
    let (model, history) = commands::train_model(&svd_cfg, &d, ModelKind::SvdDngpa, 0).unwrap();
    let single = assess_member(&model, &history, &svd_cfg.training, &d, &data).unwrap();
    let single_time = start.elapsed();
    let id = &single.id.pooled;
    board.record(
        7,
        "ID accuracy of SVD-DNGPA",
        single_time,
        secs(20 * 60),
        verdict(
            id.r2 >= 0.99 && id.rmse <= 10.0,
            format!("seed 0: R² {:.5} (>= 0.99), RMSE {:.2} pF (<= 10), best epoch {}", id.r2, id.rmse, single.best_epoch),
        ),
    );

    // criterion 11: the 15-member protocol through the ensemble command
    let tmp = tempfile::TempDir::new().unwrap();
    let data_dir = tmp.path().join("data");
    save_dataset(&d, &data_dir).unwrap();
    let start = Instant::now();
    let ens = commands::ensemble_cmd(&cfg, &data_dir, ModelKind::SvdDngpa, &tmp.path().join("ensemble")).unwrap();
    let ens_time = start.elapsed();
    let summary = std::fs::read_to_string(tmp.path().join("ensemble/summary.csv")).unwrap();
    let shape_ok = ["id_test", "ood"].iter().all(|split| {
        ["r2", "rmse", "rmsce", "mace"].iter().all(|metric| {
            ens.summary
                .iter()
                .any(|row| row.split == *split && row.metric == *metric && row.mean.is_finite() && row.std.is_finite())
        })
    }) && summary.starts_with("split,metric,mean,std\n");
    let one = summarize(ModelKind::SvdDngpa, &svd_cfg.training, vec![(0, Ok(single.clone()))]).unwrap();
    let zero_std = one.summary.iter().all(|row| row.std == 0.0);
    let budget = single_time * 15;
    let row = |split: &str, metric: &str| {
        let r = ens.summary.iter().find(|r| r.split == split && r.metric == metric).unwrap();
        format!("{} {metric} {:.4} ± {:.4}", split, r.mean, r.std)
    };
    board.record(
        11,
        "ensemble protocol",
        ens_time,
        Some(budget),
        verdict(
            ens.requested == 15 && ens.members.len() == 15 && shape_ok && zero_std,
            format!(
                "{} of {} members, {}, {}, {}, {}; n=1 stds all zero: {zero_std}",
                ens.members.len(),
                ens.requested,
                row("id_test", "r2"),
                row("id_test", "rmse"),
                row("ood", "rmsce"),
                row("ood", "mace"),
            ),
        ),
    );

    // five seeds of each kind
    let start = Instant::now();
    let svd = KindRun {
        kind: ModelKind::SvdDngpa,
        members: first_seeds(&ens.members),
    };
    let dngpa_cfg = cfg.resolved(ModelKind::Dngpa);
    let mc = &cfg.metrics;
    let x_train = d.features(Split::Train);
    let dense: Vec<(MemberOutcome, f64)> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let (m, h) = commands::train_model(&dngpa_cfg, &d, ModelKind::Dngpa, seed).unwrap();
            let out = assess_member(&m, &h, &dngpa_cfg.training, &d, &data).unwrap();
            let r = distance_report(&m, &x_train, Stage::Extractor, mc.pair_fraction, mc.pair_seed).unwrap();
            (out, r.pearson)
        })
        .collect();
    let dngpa = KindRun {
        kind: ModelKind::Dngpa,
        members: dense.iter().map(|(o, _)| o.clone()).collect(),
    };
    let dqr = ensemble_of(&cfg, &d, ModelKind::Dqr);
    let bnn = ensemble_of(&cfg, &d, ModelKind::Bnn);
    let runs = [&svd, &dngpa, &dqr, &bnn];
    let train_time = start.elapsed();
    println!("five-seed runs of the remaining kinds trained in {train_time:.1?}");
    for run in runs {
        println!(
            "  {:<9} ID RMSE {:>7.2} pF σ {:>6.2} | OOD RMSE {:>7.2} pF σ {:>6.2} | far {:>7.2} near {:>7.2}",
            run.kind.name(),
            run.mean_of(|m| m.id.pooled.rmse),
            run.mean_of(|m| m.id.pooled.mean_sigma),
            run.mean_of(|m| m.ood.pooled.rmse),
            run.mean_of(|m| m.ood.pooled.mean_sigma),
            run.mean_of(|m| m.grid.far),
            run.mean_of(|m| m.grid.near),
        );
    }

    // criterion 8
    let start = Instant::now();
    let svd_r: Vec<f64> = (0..SEEDS)
        .map(|seed| {
            let m = build_model(ModelKind::SvdDngpa, &svd_cfg.model, &d, seed, None).unwrap();
            distance_report(&m, &x_train, Stage::Extractor, mc.pair_fraction, mc.pair_seed).unwrap().pearson
        })
        .collect();
    let dense_r: Vec<f64> = dense.iter().map(|(_, r)| *r).collect();
    let (a, b) = (mean(&svd_r), mean(&dense_r));
    board.record(
        8,
        "distance preservation ordering",
        start.elapsed(),
        None,
        verdict(
            a - b >= 0.01,
            format!("extractor Pearson r: SVD {a:.4}, spectral dense {b:.4}, margin {:.4} (>= 0.01)", a - b),
        ),
    );

    // criterion 9
    let ratios: Vec<(ModelKind, f64)> = runs
        .iter()
        .map(|r| (r.kind, r.mean_of(|m| m.ood.pooled.rmse) / r.mean_of(|m| m.id.pooled.rmse)))
        .collect();
    let growth = ratios.iter().all(|(_, q)| *q > 2.0);
    let (far, near) = (svd.mean_of(|m| m.grid.far), svd.mean_of(|m| m.grid.near));
    let ood = |r: &KindRun| r.mean_of(|m| m.ood.pooled.rmse);
    let (s, q, b) = (ood(&svd), ood(&dqr), ood(&bnn));
    let ratio_text: Vec<String> = ratios.iter().map(|(k, q)| format!("{} {q:.1}", k.name())).collect();
    board.record(
        9,
        "OOD trend",
        Duration::ZERO,
        None,
        verdict(
            growth && far > near && s <= q && s <= b,
            format!(
                "OOD/ID RMSE ratio {} (> 2); SVD far {far:.1} vs near {near:.1} pF; mean OOD RMSE SVD {s:.1}, DQR {q:.1}, BNN {b:.1} pF",
                ratio_text.join(", ")
            ),
        ),
    );

    // criterion 10
    let mut lines = Vec::new();
    let mut every = true;
    for run in [&svd, &dngpa] {
        let ok = run.members.iter().filter(|m| m.ood.pooled.mean_sigma > m.id.pooled.mean_sigma).count();
        every &= ok == run.members.len() && run.members.len() == SEEDS as usize;
        lines.push(format!(
            "{} {ok}/{} seeds (mean σ OOD {:.1} vs ID {:.1} pF)",
            run.kind.name(),
            run.members.len(),
            run.mean_of(|m| m.ood.pooled.mean_sigma),
            run.mean_of(|m| m.id.pooled.mean_sigma)
        ));
    }
    board.record(10, "GP uncertainty growth", Duration::ZERO, None, verdict(every, lines.join("; ")));

    // criterion 12
    let start = Instant::now();
    let (a, b) = (tempfile::TempDir::new().unwrap(), tempfile::TempDir::new().unwrap());
    let first = pipeline(&cfg, a.path());
    let second = pipeline(&cfg, b.path());
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    board.record(
        12,
        "determinism",
        start.elapsed(),
        None,
        verdict(
            first.len() == second.len() && differing.is_empty(),
            format!("{} report files compared byte for byte, differing {differing:?}", first.len()),
        ),
    );

    if board.failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
    } else {
        println!("acceptance: failing criteria {:?}", board.failed);
        if std::env::var_os("DPGP_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
