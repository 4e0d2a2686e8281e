//! Synthetic data generators and numerical theory checks.
//!
//! These exercise the partitioned-regression bias formulas, the
//! reweighted marginal-treatment-effect estimator, the
//! aggregation-preserves-decorrelation property, and the uniqueness
//! regime of the sample-weight objective — all at 64-bit precision with
//! seeded generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decorr::{optimize_sample_weights, DecorrConfig, DecorrObjective, SampleWeights};
use crate::dense::Dense;
use crate::linalg::{ols, solve};
use crate::{Error, Result};

type Mat = Dense<f64>;

/// Standard normal draw via Box–Muller, so the stream does not depend
/// on any distribution-crate version.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let mut u1: f64 = rng.gen();
    while u1 <= f64::MIN_POSITIVE {
        u1 = rng.gen();
    }
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Nonlinear transform applied to the first stable column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GKind {
    None,
    /// Shifted square `(s+1)² − 2`. The shift gives the transform a
    /// nonzero odd moment against Gaussian inputs, so the
    /// misspecification bias is systematic rather than pure
    /// finite-sample noise.
    Square,
    Sin,
}

impl GKind {
    pub fn apply(self, s: f64) -> f64 {
        match self {
            GKind::None => 0.0,
            GKind::Square => (s + 1.0) * (s + 1.0) - 2.0,
            GKind::Sin => s.sin(),
        }
    }
}

/// Hermite mixing strength of the unstable columns. The quadratic and
/// cubic components give `V` a dependence on `S` beyond its linear
/// span; a purely linear mixture would be fully partialled out by the
/// stable block and no systematic coefficient bias could survive.
pub const MIX_KAPPA: f64 = 0.5;

/// Specification of the partitioned label-generation model
/// `Y = S β_S + g(S_[0]) + ε` with `q` unstable columns correlated to
/// the stable ones at level `rho`.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Stable-variable count.
    pub m: usize,
    /// Unstable-variable count (their true coefficients are zero).
    pub q: usize,
    /// Mixture level between each unstable column and its paired
    /// stable column, in [0, 1).
    pub rho: f64,
    pub beta_s: Vec<f64>,
    pub g_kind: GKind,
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Analytic `corr(V_k, S_{k mod m})` implied by the construction:
    /// `ρ / √(1 + 8κ²)` (the Hermite components are orthogonal to the
    /// linear one and carry variances 2κ² and 6κ²).
    pub fn target_feature_corr(&self) -> f64 {
        self.rho / (1.0 + 8.0 * MIX_KAPPA * MIX_KAPPA).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct PartitionedData {
    pub s: Mat,
    pub v: Mat,
    pub y: Vec<f64>,
}

/// Unit-variance, zero-mean mixture of a stable column: the linear term
/// plus Hermite quadratic/cubic terms at strength `MIX_KAPPA`.
fn stable_mixture(s: f64) -> f64 {
    let he2 = s * s - 1.0;
    let he3 = s * s * s - 3.0 * s;
    (s + MIX_KAPPA * (he2 + he3)) / (1.0 + 8.0 * MIX_KAPPA * MIX_KAPPA).sqrt()
}

/// Draw the partitioned data set: `S` has iid standard-normal columns,
/// `V_k = ρ·mix(S_{k mod m}) + √(1−ρ²)·noise`, and `Y` follows the spec.
pub fn generate_partitioned_data(spec: &SyntheticSpec) -> PartitionedData {
    assert_eq!(spec.beta_s.len(), spec.m, "beta_s length must equal m");
    assert!((0.0..1.0).contains(&spec.rho));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut s = Mat::zeros(spec.n, spec.m);
    for i in 0..spec.n {
        for j in 0..spec.m {
            s.set(i, j, standard_normal(&mut rng));
        }
    }
    let noise_scale = (1.0 - spec.rho * spec.rho).sqrt();
    let mut v = Mat::zeros(spec.n, spec.q);
    for i in 0..spec.n {
        for k in 0..spec.q {
            let base = stable_mixture(s.get(i, k % spec.m));
            v.set(i, k, spec.rho * base + noise_scale * standard_normal(&mut rng));
        }
    }
    let mut y = vec![0.0; spec.n];
    for i in 0..spec.n {
        let mut acc = 0.0;
        for j in 0..spec.m {
            acc += s.get(i, j) * spec.beta_s[j];
        }
        acc += spec.g_kind.apply(s.get(i, 0));
        if spec.noise_std > 0.0 {
            acc += spec.noise_std * standard_normal(&mut rng);
        }
        y[i] = acc;
    }
    PartitionedData { s, v, y }
}

/// Output of the partitioned-regression bias check.
#[derive(Debug, Clone)]
pub struct BiasCheck {
    pub beta_s_hat: Vec<f64>,
    pub beta_v_hat: Vec<f64>,
    /// Partitioned-regression prediction of `β̃_V − β_V` from sample
    /// moments.
    pub predicted_bias: Vec<f64>,
    /// `β̃_V − β_V` from the joint OLS solve (β_V = 0 by construction).
    pub realized_bias: Vec<f64>,
}

/// Fit OLS of `Y` on `[S V]` and compare the realized coefficient bias
/// on the unstable block against the partitioned-regression formula
/// `(VᵀV/n)⁻¹(Vᵀg/n) + (VᵀV/n)⁻¹(VᵀS/n)(β_S − β̃_S)` evaluated with
/// sample moments.
pub fn estimation_bias_check(data: &PartitionedData, spec: &SyntheticSpec) -> Result<BiasCheck> {
    let n = data.s.rows();
    let m = data.s.cols();
    let q = data.v.cols();
    if n <= m + q {
        return Err(Error::Validation(format!(
            "need n >> m+q, got n={n} with m+q={}",
            m + q
        )));
    }
    let mut z = Mat::zeros(n, m + q);
    for i in 0..n {
        z.row_mut(i)[..m].copy_from_slice(data.s.row(i));
        z.row_mut(i)[m..].copy_from_slice(data.v.row(i));
    }
    let beta = ols(&z, &data.y)?;
    let beta_s_hat = beta[..m].to_vec();
    let beta_v_hat = beta[m..].to_vec();
    let realized_bias = beta_v_hat.clone(); // β_V = 0

    let nf = n as f64;
    let mut vtv = data.v.transpose_matmul(&data.v)?;
    vtv.scale(1.0 / nf);
    let g_vals: Vec<f64> = (0..n).map(|i| spec.g_kind.apply(data.s.get(i, 0))).collect();
    let mut vtg = vec![0.0; q];
    for i in 0..n {
        for k in 0..q {
            vtg[k] += data.v.get(i, k) * g_vals[i];
        }
    }
    vtg.iter_mut().for_each(|x| *x /= nf);
    let mut vts = data.v.transpose_matmul(&data.s)?;
    vts.scale(1.0 / nf);
    let gap: Vec<f64> = (0..m).map(|j| spec.beta_s[j] - beta_s_hat[j]).collect();
    let mut rhs = vtg;
    for k in 0..q {
        let row = vts.row(k);
        for j in 0..m {
            rhs[k] += row[j] * gap[j];
        }
    }
    let predicted_bias = solve(&vtv, &rhs)?;

    Ok(BiasCheck {
        beta_s_hat,
        beta_v_hat,
        predicted_bias,
        realized_bias,
    })
}

/// Sample weights for the reweighted-OLS check.
///
/// The bias formula needs both `E_w(VᵀS) = 0` and `E_w(Vᵀg(S)) = 0`, so
/// the decorrelation runs on the stacked matrix `[S, V, g(S)]`; the
/// variable weights come from regressing `Y` on those columns, which
/// concentrates the effort on decorrelating everything from the
/// outcome-relevant dimensions.
pub fn bias_check_weights(
    data: &PartitionedData,
    spec: &SyntheticSpec,
    cfg: &DecorrConfig,
) -> Result<Vec<f64>> {
    let n = data.s.rows();
    let m = data.s.cols();
    let q = data.v.cols();
    let mut h = Mat::zeros(n, m + q + 1);
    for i in 0..n {
        h.row_mut(i)[..m].copy_from_slice(data.s.row(i));
        h.row_mut(i)[m..m + q].copy_from_slice(data.v.row(i));
        h.set(i, m + q, spec.g_kind.apply(data.s.get(i, 0)));
    }
    let coef = ols(&h, &data.y)?;
    let alpha: Vec<f64> = coef.iter().map(|c| c.abs()).collect();
    let fit = optimize_sample_weights(
        &h,
        DecorrObjective::Dvd { alpha: &alpha },
        cfg,
        SampleWeights::ones(n),
    )?;
    Ok(fit.weights.w())
}

/// Weighted OLS coefficients of `Y` on `[S V]` (rows scaled by √w);
/// returns the unstable-block coefficients.
pub fn weighted_unstable_coefficients(
    data: &PartitionedData,
    w: &[f64],
) -> Result<Vec<f64>> {
    let n = data.s.rows();
    if w.len() != n {
        return Err(Error::Shape(format!("{} rows but {} weights", n, w.len())));
    }
    let m = data.s.cols();
    let q = data.v.cols();
    let mut z = Mat::zeros(n, m + q);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let sw = w[i].max(0.0).sqrt();
        for j in 0..m {
            z.set(i, j, sw * data.s.get(i, j));
        }
        for k in 0..q {
            z.set(i, m + k, sw * data.v.get(i, k));
        }
        y[i] = sw * data.y[i];
    }
    let beta = ols(&z, &y)?;
    Ok(beta[m..].to_vec())
}

/// Difference of weighted group means at treatment levels `t` and
/// `t − Δt`, divided by `Δt`. Group membership is exact up to 1e-9;
/// weights are normalized within each group.
pub fn mtef_estimate(
    t_vals: &[f64],
    y: &[f64],
    w: &[f64],
    t_level: f64,
    delta_t: f64,
) -> Result<f64> {
    if t_vals.len() != y.len() || t_vals.len() != w.len() {
        return Err(Error::Shape(format!(
            "mtef inputs disagree: {} treatments, {} outcomes, {} weights",
            t_vals.len(),
            y.len(),
            w.len()
        )));
    }
    if delta_t == 0.0 {
        return Err(Error::Validation("delta_t must be nonzero".into()));
    }
    let group_mean = |level: f64| -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        let mut count = 0usize;
        for i in 0..t_vals.len() {
            if (t_vals[i] - level).abs() <= 1e-9 {
                num += w[i] * y[i];
                den += w[i];
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyGroup(format!("no samples at treatment {level}")));
        }
        if den <= 0.0 {
            return Err(Error::EmptyGroup(format!(
                "zero total weight at treatment {level}"
            )));
        }
        Ok(num / den)
    };
    Ok((group_mean(t_level)? - group_mean(t_level - delta_t)?) / delta_t)
}

/// Confounded treatment data for the reweighted-MTEF check:
/// binary treatment driven by a latent factor that also drives the
/// confounders, outcome `Y = Σ ξ_k X_k + γT + g(X_0) + ε`.
#[derive(Debug, Clone)]
pub struct ConfoundedData {
    pub x: Mat,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub gamma: f64,
}

pub fn generate_confounded_treatment(n: usize, gamma: f64, seed: u64) -> ConfoundedData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = [0.85, 0.7, 0.5];
    let xi = [1.0, 0.8, -0.6];
    let d = coeffs.len();
    let mut x = Mat::zeros(n, d);
    let mut t = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        let z = standard_normal(&mut rng);
        t[i] = if z + 0.6 * standard_normal(&mut rng) > 0.0 {
            1.0
        } else {
            0.0
        };
        let mut acc = gamma * t[i];
        for k in 0..d {
            let c = coeffs[k];
            let xv = c * z + (1.0 - c * c).sqrt() * standard_normal(&mut rng);
            x.set(i, k, xv);
            acc += xi[k] * xv;
        }
        acc += 0.25 * (x.get(i, 0)).sin();
        acc += 0.05 * standard_normal(&mut rng);
        y[i] = acc;
    }
    ConfoundedData { x, t, y, gamma }
}

/// Learn decorrelation weights over `[X, T]` so the treatment column
/// decouples from the confounders; α comes from regressing Y on [X, T].
pub fn confounder_balance_weights(data: &ConfoundedData, cfg: &DecorrConfig) -> Result<Vec<f64>> {
    let n = data.x.rows();
    let d = data.x.cols();
    let mut h = Mat::zeros(n, d + 1);
    for i in 0..n {
        h.row_mut(i)[..d].copy_from_slice(data.x.row(i));
        h.set(i, d, data.t[i]);
    }
    let coef = ols(&h, &data.y)?;
    let alpha: Vec<f64> = coef.iter().map(|c| c.abs()).collect();
    let fit = optimize_sample_weights(
        &h,
        DecorrObjective::Dvd { alpha: &alpha },
        cfg,
        SampleWeights::ones(n),
    )?;
    Ok(fit.weights.w())
}

/// Apply the aggregator blockwise over independent sample batches and
/// return the largest off-diagonal sample covariance magnitude of the
/// aggregated columns. `a_hat` is r×r and r must divide into `z`'s rows
/// at least once; trailing rows that do not fill a batch are ignored.
pub fn theorem3_check(z: &Mat, a_hat: &Mat) -> Result<f64> {
    let r = a_hat.rows();
    if a_hat.cols() != r {
        return Err(Error::Shape(format!(
            "aggregator must be square, got {}x{}",
            a_hat.rows(),
            a_hat.cols()
        )));
    }
    let batches = z.rows() / r;
    if batches == 0 {
        return Err(Error::Shape(format!(
            "need at least {r} rows, got {}",
            z.rows()
        )));
    }
    let p = z.cols();
    let used = batches * r;
    let mut y = Mat::zeros(used, p);
    for b in 0..batches {
        for s in 0..r {
            let out_row = y.row_mut(b * r + s);
            for k in 0..r {
                let a = a_hat.get(s, k);
                if a == 0.0 {
                    continue;
                }
                for (o, &zv) in out_row.iter_mut().zip(z.row(b * r + k)) {
                    *o += a * zv;
                }
            }
        }
    }
    let nf = used as f64;
    let mut mean = vec![0.0; p];
    for i in 0..used {
        for j in 0..p {
            mean[j] += y.get(i, j);
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut max_off = 0.0f64;
    for j in 0..p {
        for k in (j + 1)..p {
            let mut c = 0.0;
            for i in 0..used {
                c += (y.get(i, j) - mean[j]) * (y.get(i, k) - mean[k]);
            }
            max_off = max_off.max((c / nf).abs());
        }
    }
    Ok(max_off)
}

/// Zero-mean, Gram-orthogonalized columns with unit sample variance.
pub fn orthogonalized_columns(n: usize, p: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Mat::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z.set(i, j, standard_normal(&mut rng));
        }
    }
    let nf = n as f64;
    for j in 0..p {
        let mean: f64 = (0..n).map(|i| z.get(i, j)).sum::<f64>() / nf;
        for i in 0..n {
            z.set(i, j, z.get(i, j) - mean);
        }
        for prev in 0..j {
            let dot: f64 = (0..n).map(|i| z.get(i, j) * z.get(i, prev)).sum();
            let norm: f64 = (0..n).map(|i| z.get(i, prev).powi(2)).sum();
            let coef = dot / norm;
            for i in 0..n {
                z.set(i, j, z.get(i, j) - coef * z.get(i, prev));
            }
        }
        let var: f64 = (0..n).map(|i| z.get(i, j).powi(2)).sum::<f64>() / nf;
        let scale = 1.0 / var.sqrt();
        for i in 0..n {
            z.set(i, j, z.get(i, j) * scale);
        }
    }
    z
}

/// Max pairwise ℓ∞ distance among sample-weight solutions from random
/// restarts (ω drawn uniformly in [0.5, 1.5]). Errors if any restart
/// exhausts its budget without converging.
pub fn uniqueness_probe(
    h: &Mat,
    alpha: &[f64],
    lambda1: f64,
    lambda2: f64,
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    if restarts < 2 {
        return Err(Error::Validation("need at least 2 restarts".into()));
    }
    let cfg = DecorrConfig {
        lambda1,
        lambda2,
        lr: 0.02,
        inner_iters: 50_000,
    };
    let mut solutions: Vec<Vec<f64>> = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let omega: Vec<f64> = (0..h.rows()).map(|_| rng.gen_range(0.5..1.5)).collect();
        let fit = crate::decorr::optimize_with_tol(
            h,
            DecorrObjective::Dvd { alpha },
            &cfg,
            SampleWeights::from_omega(omega),
            1e-14,
        )?;
        if !fit.converged {
            return Err(Error::NoConvergence {
                iters: cfg.inner_iters,
            });
        }
        solutions.push(fit.weights.w());
    }
    let mut dispersion = 0.0f64;
    for a in &solutions {
        for b in &solutions {
            let d = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            dispersion = dispersion.max(d);
        }
    }
    Ok(dispersion)
}
