//! Monte Carlo oracles for the simulator, pilots, kernel and QMLE.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use volblocks::avar::{self, Estimator, VolPath};
use volblocks::kernels::{self, KernelFamily};
use volblocks::preavg::{self, PreAvgConfig};
use volblocks::qmle;
use volblocks::rk;
use volblocks::series::{Window, DAY};
use volblocks::simulate::{self, AlphaSpec, JumpSize, ModelConfig, Sampling, UDist};
use volblocks::{BlockPartition, TickSeries};

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn model2(n: usize) -> ModelConfig {
    let mut cfg = ModelConfig::preset("model2").unwrap();
    cfg.n_euler = n;
    cfg.sampling = Sampling::Regular { n_obs: n };
    cfg
}

/// Brownian motion with volatility `sigma` on `[0, T]` sampled `n` times,
/// with `margin` extra observations on either side.
fn brownian(sigma: f64, horizon: f64, n: usize, margin: usize, rng: &mut ChaCha8Rng) -> (TickSeries, Window) {
    let dt = horizon / n as f64;
    let len = n + 1 + 2 * margin;
    let mut x = 0.0;
    let mut values = Vec::with_capacity(len);
    let mut times = Vec::with_capacity(len);
    for i in 0..len {
        if i > 0 {
            x += sigma * dt.sqrt() * normal(rng);
        }
        values.push(x);
        times.push((i as f64 - margin as f64) * dt);
    }
    let s = TickSeries::new(times, values, 0.0, horizon).unwrap();
    (s, Window { lo: margin, hi: margin + n })
}

#[test]
fn random_times_follow_the_intensity() {
    let scheme = Sampling::Random {
        n_obs: 100_000,
        alpha: AlphaSpec::Constant { value: 1.0 },
        u: UDist::Exponential,
    };
    let t = simulate::sample_times(&scheme, 1.0, 3).unwrap();
    let frac = t.iter().filter(|&&s| s <= 0.5).count() as f64 / 100_000.0;
    assert!((frac - 0.5).abs() < 0.01, "{frac}");
}

#[test]
fn poisson_jump_counts() {
    let mut cfg = model2(100);
    cfg.burn = 10;
    let base = simulate::simulate(&cfg, 1).unwrap();
    let lambda = 504.0;
    let size = JumpSize { mean: 0.0, sd: 0.001 };
    let counts: Vec<f64> = (0..10_000u64)
        .map(|s| {
            let mut b = base.clone();
            simulate::add_price_jumps(&mut b, lambda, size, s).unwrap() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let lt = lambda * DAY;
    assert!((mean - lt).abs() < 3.0 * (lt / 1e4).sqrt(), "mean {mean} vs {lt}");

    let mut b = base.clone();
    assert_eq!(simulate::add_price_jumps(&mut b, 0.0, size, 9).unwrap(), 0);
    assert_eq!(b, base);
}

#[test]
fn realized_variance_tracks_quadratic_variation_without_noise() {
    let mut cfg = model2(23_400);
    cfg.noise.xi2 = 0.0;
    let mut b = simulate::simulate(&cfg, 8).unwrap();
    let half = b.horizon / 2.0;
    simulate::add_jump(&mut b, half, 0.004).unwrap();
    let f = b.functionals();
    let s = b.series();
    let w = s.sample_window().unwrap();
    let rv: f64 = s.window_returns(w).iter().map(|r| r * r).sum();
    let se = (2.0 * f.quarticity * f.horizon / w.n_returns() as f64).sqrt();
    assert!((rv - f.qv).abs() < 3.0 * se, "rv {rv} qv {} se {se}", f.qv);
    assert!((f.qv - f.iv - 0.004f64.powi(2)).abs() < 1e-15);
}

#[test]
fn noise_variance_of_pure_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a0 = 0.01;
    let n = 100_000;
    let z: Vec<f64> = (0..=n).map(|_| a0 * normal(&mut rng)).collect();
    let a2 = preavg::noise_variance(&z).unwrap();
    // Var(â²) = 3 a0⁴ / n for Gaussian noise (lag-one overlap included)
    let se = a0 * a0 * (3.0 / n as f64).sqrt();
    assert!((a2 - 1e-4).abs() < 3.0 * se, "{a2}");
}

#[test]
fn noise_variance_on_model_paths() {
    let cfg = model2(23_400);
    let reps = 400;
    let hits = (0..reps)
        .filter(|&s| {
            let b = simulate::simulate(&cfg, 1000 + s).unwrap();
            let series = b.series();
            let w = series.sample_window().unwrap();
            let r = preavg::noise_variance(series.window_values(w)).unwrap() / (b.a0 * b.a0);
            (0.95..=1.05).contains(&r)
        })
        .count();
    assert!(hits as f64 >= 0.95 * reps as f64, "{hits}/{reps}");
}

#[test]
fn preaveraged_pilots_on_noiseless_brownian_days() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = PreAvgConfig::default();
    let (mut ivs, mut qs) = (Vec::new(), Vec::new());
    for _ in 0..1000 {
        let (s, w) = brownian(1.0, DAY, 23_400, 0, &mut rng);
        let z = s.window_values(w);
        ivs.push(preavg::preavg_iv(z, DAY, &cfg).unwrap());
        qs.push(preavg::preavg_quarticity(z, DAY, &cfg).unwrap());
    }
    // without noise the estimator carries an O(1/k²) window bias: the
    // discrete weights give Σ g(i/k)² != k ψ2, only n - k + 2 averaged
    // returns exist, and the noise correction removes ψ1 RV/(2k²ψ2)
    let n = 23_400usize;
    let k = cfg.window(DAY / n as f64);
    assert_eq!(k, 30);
    let sum_g2: f64 = (1..k).map(|i| cfg.weight.eval(i as f64 / k as f64).powi(2)).sum();
    let psi2 = cfg.weight.psi2();
    let kf = k as f64;
    let expected = DAY
        * ((n - k + 2) as f64 / n as f64 * sum_g2 / (kf * psi2) - cfg.weight.psi1() / (2.0 * kf * kf * psi2));
    let (m, se) = mean_se(&ivs);
    assert!((m - expected).abs() < 3.0 * se, "iv {m} expected {expected} se {se}");
    assert!((m / DAY - 1.0).abs() < 0.01, "iv {m}");

    // quarticity: E Z̄⁴ = 3(σ²Δ Σg²)², the cross term pairs disjoint windows
    // and the lag-two term is tiny
    let r = sum_g2 / (kf * psi2);
    let psi1 = cfg.weight.psi1();
    let nf = n as f64;
    let expected = DAY
        * ((nf - kf + 2.0) / nf * r * r - (nf + 2.0 - 2.0 * kf) / nf * psi1 * r / (kf * kf * psi2)
            + (nf - 2.0) / nf * psi1 * psi1 / (4.0 * kf.powi(4) * psi2 * psi2));
    let (m, se) = mean_se(&qs);
    assert!((m - expected).abs() < 3.0 * se, "quarticity {m} expected {expected} se {se}");
    assert!((m / DAY - 1.0).abs() < 0.02, "quarticity {m}");
}

#[test]
fn preaveraged_iv_is_consistent_on_model_paths() {
    let cfg = model2(23_400);
    let pa = PreAvgConfig::default();
    let ratios: Vec<f64> = (0..1000u64)
        .map(|s| {
            let b = simulate::simulate(&cfg, 5000 + s).unwrap();
            let series = b.series();
            let w = series.sample_window().unwrap();
            preavg::preavg_iv(series.window_values(w), b.horizon, &pa).unwrap() / b.truth.iv
        })
        .collect();
    let (m, _) = mean_se(&ratios);
    assert!((m - 1.0).abs() < 0.02, "{m}");
}

#[test]
fn preaveraged_quarticity_is_consistent_on_model_paths() {
    let cfg = ModelConfig::preset("model2").unwrap();
    let pa = PreAvgConfig::default();
    let ratios: Vec<f64> = (0..1000u64)
        .map(|s| {
            let b = simulate::simulate(&cfg, 9000 + s).unwrap();
            let series = b.series();
            let w = series.sample_window().unwrap();
            preavg::preavg_quarticity(series.window_values(w), b.horizon, &pa).unwrap() / b.truth.quarticity
        })
        .collect();
    let (m, _) = mean_se(&ratios);
    assert!((m - 1.0).abs() < 0.05, "{m}");
}

#[test]
fn feasible_bandwidth_constant_tracks_the_truth() {
    let cfg = model2(23_400);
    let pa = PreAvgConfig::default();
    let p = kernels::profile(KernelFamily::TukeyHanning(2));
    let mut errs: Vec<f64> = (0..200u64)
        .map(|s| {
            let b = simulate::simulate(&cfg, 300 + s).unwrap();
            let series = b.series();
            let w = series.sample_window().unwrap();
            let hat = preavg::c_hat_star(series.window_values(w), b.horizon, &pa, &p).unwrap();
            let truth = kernels::c_star(b.truth.rho, &p).unwrap();
            (hat - truth).abs() / truth
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    let median = errs[errs.len() / 2];
    assert!(median < 0.15, "{median}");
}

#[test]
fn first_autocovariance_of_pure_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let a0 = 0.01;
    let n = 100_000;
    let vals: Vec<f64> = (0..200)
        .map(|_| {
            let values: Vec<f64> = (0..n + 3).map(|_| a0 * normal(&mut rng)).collect();
            let times = (0..n + 3).map(|i| i as f64).collect();
            let s = TickSeries::new(times, values, 1.0, n as f64 + 1.0).unwrap();
            rk::realized_autocov(&s, Window { lo: 1, hi: n + 1 }, 1).unwrap()
        })
        .collect();
    let (m, se) = mean_se(&vals);
    let want = -(n as f64) * a0 * a0;
    assert!((m - want).abs() < 3.0 * se, "{m} vs {want} (se {se})");
}

#[test]
fn kernel_on_noiseless_brownian_days() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let fam = KernelFamily::TukeyHanning(2);
    let n = 23_400;
    let h = (kernels::c_star(1.0, &kernels::profile(fam)).unwrap() * (n as f64).sqrt()).round() as usize;
    let vals: Vec<f64> = (0..200)
        .map(|_| {
            let (s, w) = brownian(1.0, DAY, n, h + 1, &mut rng);
            rk::rk_block(&s, w, h, fam).unwrap()
        })
        .collect();
    let (m, se) = mean_se(&vals);
    assert!((m - DAY).abs() < 3.0 * se, "{m} se {se}");
}

fn ma1_returns(n: usize, sigma2: f64, a2: f64, delta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut prev = a2.sqrt() * normal(rng);
    (0..n)
        .map(|_| {
            let e = a2.sqrt() * normal(rng);
            let y = (sigma2 * delta).sqrt() * normal(rng) + e - prev;
            prev = e;
            y
        })
        .collect()
}

#[test]
fn likelihood_prefers_the_true_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (sigma2, a2) = (0.1, 1e-7);
    let n = 5000;
    let delta = DAY / n as f64;
    let wins = (0..1000)
        .filter(|_| {
            let y = ma1_returns(n, sigma2, a2, delta, &mut rng);
            qmle::quasi_loglik(&y, sigma2, a2, delta).unwrap() >= qmle::quasi_loglik(&y, 2.0 * sigma2, a2, delta).unwrap()
        })
        .count();
    assert!(wins >= 950, "{wins}");
}

#[test]
fn fit_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let n = 500;
    let delta = DAY / n as f64;
    let y = ma1_returns(n, 0.1, 1e-7, delta, &mut rng);
    let bx = qmle::QmleBox::from_moments(&y, delta).unwrap();
    let fit = qmle::fit_qmle(&y, delta, Some(bx)).unwrap();
    let grid = |lo: f64, hi: f64, i: usize| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / 399.0).exp();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..400 {
        let s2 = grid(bx.sigma2.0, bx.sigma2.1, i);
        for j in 0..400 {
            let a2 = grid(bx.a2.0, bx.a2.1, j);
            let l = qmle::quasi_loglik(&y, s2, a2, delta).unwrap();
            if l > best.0 {
                best = (l, s2, a2);
            }
        }
    }
    assert!(fit.loglik >= best.0 - 1e-9, "fit {} grid {}", fit.loglik, best.0);
    // refine the grid maximiser locally so both sides are true argmaxima
    let step = |lo: f64, hi: f64| (hi / lo).ln() / 399.0;
    let (ds, da) = (step(bx.sigma2.0, bx.sigma2.1), step(bx.a2.0, bx.a2.1));
    let mut fine = best;
    for i in -50..=50 {
        let s2 = best.1 * (ds * i as f64 / 50.0).exp();
        for j in -50..=50 {
            let a2 = best.2 * (da * j as f64 / 50.0).exp();
            let l = qmle::quasi_loglik(&y, s2, a2, delta).unwrap();
            if l > fine.0 {
                fine = (l, s2, a2);
            }
        }
    }
    assert!((fit.sigma2_hat / fine.1 - 1.0).abs() < 1e-3, "{} vs {}", fit.sigma2_hat, fine.1);
    assert!((fit.a2_hat / fine.2 - 1.0).abs() < 1e-3, "{} vs {}", fit.a2_hat, fine.2);
}

/// `n Var(â²)` from the inverse Whittle information of the MA(1) spectrum
/// `f(λ) = σ²Δ + 2a²(1 - cos λ)` (trapezoid rule on `[-π, π]`).
fn whittle_a2_variance(sigma2: f64, a2: f64, delta: f64) -> f64 {
    let m = 400_000;
    let h = 2.0 * std::f64::consts::PI / m as f64;
    let (mut iss, mut isa, mut iaa) = (0.0, 0.0, 0.0);
    for i in 0..=m {
        let lam = -std::f64::consts::PI + h * i as f64;
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        let da = 2.0 * (1.0 - lam.cos());
        let f = sigma2 * delta + a2 * da;
        iss += w * delta * delta / (f * f);
        isa += w * delta * da / (f * f);
        iaa += w * da * da / (f * f);
    }
    let c = h / (4.0 * std::f64::consts::PI);
    let (iss, isa, iaa) = (iss * c, isa * c, iaa * c);
    iss / (iss * iaa - isa * isa)
}

/// Mean of `σ̂²/σ²` and the sample variance of `n^{1/2}(â² - a²)` over `reps`
/// parametric samples.
fn qmle_moments(sigma2: f64, a2: f64, n: usize, reps: usize, seed: u64, bx: Option<qmle::QmleBox>) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = DAY / n as f64;
    let (mut s, mut a) = (Vec::new(), Vec::new());
    for _ in 0..reps {
        let y = ma1_returns(n, sigma2, a2, delta, &mut rng);
        let f = qmle::fit_qmle(&y, delta, bx).unwrap();
        assert!(f.converged);
        s.push(f.sigma2_hat / sigma2);
        a.push((n as f64).sqrt() * (f.a2_hat - a2));
    }
    let ms = s.iter().sum::<f64>() / reps as f64;
    let m = a.iter().sum::<f64>() / reps as f64;
    let var = a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
    (ms, var)
}

#[test]
fn parametric_qmle_moments() {
    // strong noise (ξ² ≈ 0.25): the asymptotic 2a⁴ is within 1.5% of the
    // finite-n information bound. RV/T is then about 10⁴ σ², beyond the
    // default moment box, so the box is given explicitly
    let (sigma2, a2, n) = (0.1, 1e-4, 23_400);
    let delta = DAY / n as f64;
    let whittle = whittle_a2_variance(sigma2, a2, delta);
    assert!((whittle / (2.0 * a2 * a2) - 1.0).abs() < 0.015);
    let bx = qmle::QmleBox {
        sigma2: (1e-3, 10.0),
        a2: (1e-7, 1e-2),
    };
    let (ms, var) = qmle_moments(sigma2, a2, n, 1000, 77, Some(bx));
    assert!((ms - 1.0).abs() < 0.02, "{ms}");
    assert!((var / (2.0 * a2 * a2) - 1.0).abs() < 0.1, "{var}");
}

#[test]
fn parametric_qmle_noise_variance_at_desk_noise_level() {
    // ξ² ≈ 0.00025: the n^{-1/4} correction is large and the finite-n
    // information gives about 1.63 · 2a⁴
    let (sigma2, a2, n) = (0.1, 1e-7, 23_400);
    let delta = DAY / n as f64;
    let want = whittle_a2_variance(sigma2, a2, delta);
    let (ms, var) = qmle_moments(sigma2, a2, n, 1000, 78, None);
    assert!((ms - 1.0).abs() < 0.02, "{ms}");
    assert!((var / want - 1.0).abs() < 0.1, "{var} vs {want}");
}

#[test]
fn feasible_avar_is_consistent() {
    let cfg = ModelConfig::preset("model2").unwrap();
    let pa = PreAvgConfig::default();
    let reps = 200;
    for est in [Estimator::Qmle, Estimator::Rk(KernelFamily::TukeyHanning(2))] {
        for blocks in [1, 4] {
            let hits = (0..reps)
                .filter(|&s| {
                    let b = simulate::simulate(&cfg, 700 + s).unwrap();
                    let series = b.series();
                    let part = BlockPartition::for_series(blocks, &series).unwrap();
                    let feas = avar::avar_feasible(&series, &part, est, &pa).unwrap();
                    let inf = avar::avar_blocked(&b.block_functionals(blocks), &b.functionals(), est).unwrap().avar;
                    (0.8..=1.25).contains(&(feas / inf))
                })
                .count();
            assert!(hits as f64 >= 0.9 * reps as f64, "{est} B={blocks}: {hits}/{reps}");
        }
    }
}

#[test]
fn blocked_avar_approaches_its_limit_on_smooth_paths() {
    let cfg = ModelConfig::preset("model1").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let b = simulate::simulate_latent(&cfg, &mut rng).unwrap();
    let sigma = b.vol_path().sigma.to_vec();
    let path = VolPath {
        sigma: &sigma,
        dt: b.dt,
        a0: 1.0,
    };
    let total = path.total();
    let fam = KernelFamily::TukeyHanning(2);
    let g1 = kernels::g(1.0, &kernels::profile(fam)).unwrap();
    let r = avar::avar_blocked(&path.blocks(64), &total, Estimator::Rk(fam)).unwrap();
    assert!((r.avar / (g1 / 8.0 * r.bound) - 1.0).abs() < 0.01, "{}", r.avar / (g1 / 8.0 * r.bound));
    let q = avar::avar_blocked(&path.blocks(64), &total, Estimator::Qmle).unwrap();
    assert!((q.avar / q.bound - 1.0).abs() < 0.01, "{}", q.avar / q.bound);
}
