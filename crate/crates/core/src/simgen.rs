//! Synthetic Tucker truths and observations.
//!
//! All randomness flows through [`SimRng`], a ChaCha20 stream seeded from a
//! `u64`. ChaCha20 output is specified bit for bit, so a seed reproduces the
//! same draws on every platform. Normals are drawn with the ziggurat sampler
//! of `rand_distr::StandardNormal`; Poisson and binomial counts use the exact
//! samplers of `rand_distr` (no normal approximation). Independent streams
//! for parallel work come from [`child_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};

use crate::decomp::check_ranks;
use crate::error::{ensure, Error, Result};
use crate::linalg::{qr_orthonormalize, sigma_r};
use crate::matrix::Matrix;
use crate::models::{ModelKind, ObservationModel};
use crate::tensor::{Dims, Tensor3, TuckerState};

/// Seeded generator used by every simulation routine.
pub type SimRng = ChaCha20Rng;

pub fn sim_rng(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Seed of the `index`-th child stream of `seed`: two rounds of the
/// SplitMix64 finalizer applied to `seed` and `index`.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(seed.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1))
}

pub fn standard_normal(rng: &mut SimRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_matrix(rng: &mut SimRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| standard_normal(rng))
}

/// Tensor with iid N(0, 1) entries, drawn in storage order.
pub fn gaussian_tensor(rng: &mut SimRng, dims: Dims) -> Tensor3 {
    let len = dims.iter().product();
    let data = (0..len).map(|_| standard_normal(rng)).collect();
    Tensor3::from_vec(dims, data).expect("length matches dims")
}

/// Haar-distributed `p × r` matrix with orthonormal columns: QR of a
/// Gaussian draw with the signs of `R`'s diagonal made positive.
pub fn random_stiefel(rng: &mut SimRng, p: usize, r: usize) -> Result<Matrix> {
    ensure!(r >= 1 && r <= p, InvalidArgument, "cannot draw {r} orthonormal columns in dimension {p}");
    qr_orthonormalize(&gaussian_matrix(rng, p, r))
}

fn random_factors(rng: &mut SimRng, dims: Dims, ranks: Dims) -> Result<[Matrix; 3]> {
    Ok([
        random_stiefel(rng, dims[0], ranks[0])?,
        random_stiefel(rng, dims[1], ranks[1])?,
        random_stiefel(rng, dims[2], ranks[2])?,
    ])
}

/// Smallest of `σ_{r_k}(M_k(x))` over the three modes.
pub fn min_mode_sigma(x: &Tensor3, ranks: Dims) -> Result<f64> {
    let mut out = f64::INFINITY;
    for mode in 1..=3 {
        out = out.min(sigma_r(&x.matricize(mode)?, ranks[mode - 1])?);
    }
    Ok(out)
}

/// Signal-controlled truth in factored form: Gaussian core rescaled by
/// `λ / min_k σ_{r_k}(M_k(S̄))`, Stiefel factors. Orthonormal factors leave
/// the mode-wise singular values of the core unchanged, so the smallest of
/// them equals `λ`.
pub fn make_truth_signal_factored(rng: &mut SimRng, dims: Dims, ranks: Dims, lambda: f64) -> Result<TuckerState> {
    check_ranks(dims, ranks)?;
    ensure!(lambda > 0.0 && lambda.is_finite(), InvalidArgument, "signal level must be positive, got {lambda}");
    let core = gaussian_tensor(rng, ranks);
    let factors = random_factors(rng, dims, ranks)?;
    let s = min_mode_sigma(&core, ranks)?;
    ensure!(s > 0.0, Numeric, "degenerate core draw");
    TuckerState::new(core.scale(lambda / s), factors, 1.0)
}

pub fn make_truth_signal(rng: &mut SimRng, dims: Dims, ranks: Dims, lambda: f64) -> Result<Tensor3> {
    Ok(make_truth_signal_factored(rng, dims, ranks, lambda)?.reconstruct())
}

/// Entrywise-bounded truth in factored form: `X̄ = [[S; U1, U2, U3]]` with a
/// Gaussian core and Stiefel factors, rescaled so `‖X*‖_∞ = B`. The scale is
/// folded into the core.
pub fn make_truth_bounded_factored(rng: &mut SimRng, dims: Dims, ranks: Dims, big_b: f64) -> Result<TuckerState> {
    check_ranks(dims, ranks)?;
    ensure!(big_b > 0.0 && big_b.is_finite(), InvalidArgument, "entry bound must be positive, got {big_b}");
    let core = gaussian_tensor(rng, ranks);
    let factors = random_factors(rng, dims, ranks)?;
    let bar = TuckerState::new(core, factors, 1.0)?;
    let m = bar.reconstruct().max_abs();
    ensure!(m > 0.0, Numeric, "degenerate truth draw");
    let TuckerState { core, factors, .. } = bar;
    TuckerState::new(core.scale(big_b / m), factors, 1.0)
}

/// `X̄ · B / ‖X̄‖_∞`.
pub fn make_truth_bounded(rng: &mut SimRng, dims: Dims, ranks: Dims, big_b: f64) -> Result<Tensor3> {
    check_ranks(dims, ranks)?;
    ensure!(big_b > 0.0 && big_b.is_finite(), InvalidArgument, "entry bound must be positive, got {big_b}");
    let core = gaussian_tensor(rng, ranks);
    let factors = random_factors(rng, dims, ranks)?;
    let bar = TuckerState::new(core, factors, 1.0)?.reconstruct();
    let m = bar.max_abs();
    ensure!(m > 0.0, Numeric, "degenerate truth draw");
    Ok(bar.scale(big_b / m))
}

/// Entrywise noise standard deviations drawn uniformly from `[lo, hi]`.
pub fn heteroskedastic_sd(rng: &mut SimRng, dims: Dims, lo: f64, hi: f64) -> Result<Tensor3> {
    ensure!(0.0 <= lo && lo <= hi && hi.is_finite(), InvalidArgument, "need 0 <= lo <= hi, got [{lo}, {hi}]");
    let len = dims.iter().product();
    let data = (0..len).map(|_| rng.random_range(lo..=hi)).collect();
    Tensor3::from_vec(dims, data)
}

/// Observation law and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseParams {
    /// `Y = X* + σ Z`.
    Gaussian { sigma: f64 },
    /// `Y = X* + sd ⊙ Z` with a per-entry standard deviation.
    GaussianProfile { sd: Tensor3 },
    /// `n` iid standard Gaussian designs, `y_i = <A_i, X*> + σ ε_i`.
    Regression { n: usize, sigma: f64 },
    /// `Y ~ Poisson(I exp(X*))`.
    Poisson { intensity: f64 },
    /// `Y ~ Binomial(N, s(X*))` with a common population size.
    Binomial { population: u64 },
}

impl NoiseParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            NoiseParams::Gaussian { .. } | NoiseParams::GaussianProfile { .. } => ModelKind::SubGaussianPca,
            NoiseParams::Regression { .. } => ModelKind::TensorRegression,
            NoiseParams::Poisson { .. } => ModelKind::PoissonPca,
            NoiseParams::Binomial { .. } => ModelKind::BinomialPca,
        }
    }
}

/// Draws data from the model law at `x_star`.
pub fn observe(rng: &mut SimRng, x_star: &Tensor3, params: &NoiseParams) -> Result<ObservationModel> {
    match params {
        NoiseParams::Gaussian { sigma } => {
            ensure!(*sigma >= 0.0 && sigma.is_finite(), InvalidArgument, "sigma must be non-negative, got {sigma}");
            let y = if *sigma == 0.0 {
                x_star.clone()
            } else {
                let mut y = x_star.clone();
                for v in y.as_mut_slice() {
                    *v += sigma * standard_normal(rng);
                }
                y
            };
            ObservationModel::sub_gaussian(y)
        }
        NoiseParams::GaussianProfile { sd } => {
            x_star.check_same_dims(sd)?;
            ensure!(
                sd.as_slice().iter().all(|&s| s >= 0.0 && s.is_finite()),
                InvalidArgument,
                "noise profile must be non-negative"
            );
            let mut y = x_star.clone();
            for (v, s) in y.as_mut_slice().iter_mut().zip(sd.as_slice()) {
                *v += s * standard_normal(rng);
            }
            ObservationModel::sub_gaussian(y)
        }
        NoiseParams::Regression { n, sigma } => {
            ensure!(*n >= 1, InvalidArgument, "regression needs n >= 1");
            ensure!(*sigma >= 0.0 && sigma.is_finite(), InvalidArgument, "sigma must be non-negative, got {sigma}");
            let len = x_star.len();
            let mut designs = Vec::with_capacity(n * len);
            let mut responses = Vec::with_capacity(*n);
            for _ in 0..*n {
                let start = designs.len();
                designs.extend((0..len).map(|_| standard_normal(rng)));
                let signal = crate::matrix::dot(&designs[start..], x_star.as_slice());
                let noise = if *sigma == 0.0 { 0.0 } else { sigma * standard_normal(rng) };
                responses.push(signal + noise);
            }
            ObservationModel::regression_flat(x_star.dims(), designs, responses)
        }
        NoiseParams::Poisson { intensity } => {
            ensure!(
                *intensity > 0.0 && intensity.is_finite(),
                InvalidArgument,
                "intensity must be positive, got {intensity}"
            );
            let mut y = x_star.clone();
            for v in y.as_mut_slice() {
                let mean = intensity * v.exp();
                let dist = Poisson::new(mean).map_err(|e| Error::InvalidArgument(format!("Poisson mean {mean}: {e}")))?;
                *v = dist.sample(rng);
            }
            ObservationModel::poisson(y, *intensity)
        }
        NoiseParams::Binomial { population } => {
            ensure!(*population >= 1, InvalidArgument, "population size must be at least 1");
            let mut y = x_star.clone();
            for v in y.as_mut_slice() {
                let p = 1.0 / (1.0 + (-*v).exp());
                let dist = Binomial::new(*population, p).map_err(|e| Error::InvalidArgument(format!("binomial p {p}: {e}")))?;
                *v = dist.sample(rng) as f64;
            }
            ObservationModel::binomial(y, Tensor3::filled(x_star.dims(), *population as f64))
        }
    }
}

/// `⌈1.2 p̄^{3/2} r̄⌉`, the default regression sample size.
pub fn default_sample_size(dims: Dims, ranks: Dims) -> usize {
    let p = *dims.iter().max().expect("three dims") as f64;
    let r = *ranks.iter().max().expect("three ranks") as f64;
    (1.2 * p.powf(1.5) * r).ceil() as usize
}

/// Everything needed to regenerate one synthetic instance.
///
/// Denoising and regression truths use the signal-level generator with
/// `lambda`; Poisson and binomial truths use the entry-bounded generator
/// with `big_b`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InstanceSpec {
    pub model: ModelKind,
    pub dims: Dims,
    pub ranks: Dims,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Per-entry noise sd drawn uniformly from this range (denoising).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<u64>,
}

/// A drawn truth together with its observations.
pub struct Instance {
    pub truth: TuckerState,
    pub model: ObservationModel,
}

fn required<T: Copy>(v: Option<T>, what: &str, model: ModelKind) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("the {model} model needs {what}")))
}

impl InstanceSpec {
    /// Draws the truth, then the noise profile (if any), then the data, all
    /// from one stream seeded by `seed`.
    pub fn generate(&self) -> Result<Instance> {
        check_ranks(self.dims, self.ranks)?;
        let mut rng = sim_rng(self.seed);
        let truth = match self.model {
            ModelKind::SubGaussianPca | ModelKind::TensorRegression => {
                make_truth_signal_factored(&mut rng, self.dims, self.ranks, required(self.lambda, "lambda", self.model)?)?
            }
            ModelKind::PoissonPca | ModelKind::BinomialPca => {
                make_truth_bounded_factored(&mut rng, self.dims, self.ranks, required(self.big_b, "B", self.model)?)?
            }
        };
        let noise = match self.model {
            ModelKind::SubGaussianPca => match self.sd_range {
                Some([lo, hi]) => NoiseParams::GaussianProfile { sd: heteroskedastic_sd(&mut rng, self.dims, lo, hi)? },
                None => NoiseParams::Gaussian { sigma: required(self.sigma, "sigma", self.model)? },
            },
            ModelKind::TensorRegression => NoiseParams::Regression {
                n: self.n.unwrap_or_else(|| default_sample_size(self.dims, self.ranks)),
                sigma: required(self.sigma, "sigma", self.model)?,
            },
            ModelKind::PoissonPca => NoiseParams::Poisson { intensity: required(self.intensity, "intensity I", self.model)? },
            ModelKind::BinomialPca => {
                NoiseParams::Binomial { population: required(self.population, "population N", self.model)? }
            }
        };
        let model = observe(&mut rng, &truth.reconstruct(), &noise)?;
        Ok(Instance { truth, model })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;
    use proptest::prelude::*;

    #[test]
    fn stiefel_draws_are_orthonormal() {
        let mut rng = sim_rng(1);
        let u = random_stiefel(&mut rng, 9, 4).unwrap();
        assert!((&u.t_matmul(&u).unwrap() - &Matrix::identity(4)).frob_norm() <= 1e-12);
        assert!(random_stiefel(&mut rng, 3, 4).is_err());
    }

    #[test]
    fn square_stiefel_has_unit_determinant() {
        let mut rng = sim_rng(2);
        let q = random_stiefel(&mut rng, 3, 3).unwrap();
        let det = q[(0, 0)] * (q[(1, 1)] * q[(2, 2)] - q[(1, 2)] * q[(2, 1)])
            - q[(0, 1)] * (q[(1, 0)] * q[(2, 2)] - q[(1, 2)] * q[(2, 0)])
            + q[(0, 2)] * (q[(1, 0)] * q[(2, 1)] - q[(1, 1)] * q[(2, 0)]);
        assert!((det.abs() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn signal_truth_hits_lambda_at_binding_mode() {
        let mut rng = sim_rng(3);
        let ranks = [2, 3, 2];
        let t = make_truth_signal_factored(&mut rng, [8, 7, 6], ranks, 2.5).unwrap();
        let x = t.reconstruct();
        assert!((min_mode_sigma(&x, ranks).unwrap() - 2.5).abs() <= 1e-8);
        for u in &t.factors {
            assert!((&u.t_matmul(u).unwrap() - &Matrix::identity(u.cols())).frob_norm() <= 1e-12);
        }
    }

    #[test]
    fn rank_one_signal_truth_has_norm_lambda() {
        let mut rng = sim_rng(4);
        let x = make_truth_signal(&mut rng, [5, 4, 3], [1, 1, 1], 3.0).unwrap();
        assert!((x.frob_norm() - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn bounded_truth_has_exact_sup_norm_and_low_rank() {
        let x = make_truth_bounded(&mut sim_rng(5), [6, 6, 5], [2, 2, 3], 2.0).unwrap();
        assert!((x.max_abs() - 2.0).abs() <= 1e-12);
        let ranks = [2, 2, 3];
        for mode in 1..=3 {
            let s = singular_values(&x.matricize(mode).unwrap()).unwrap();
            let numerical_rank = s.iter().filter(|&&v| v > 1e-8 * s[0]).count();
            assert!(numerical_rank <= ranks[mode - 1]);
        }
        let f = make_truth_bounded_factored(&mut sim_rng(5), [6, 6, 5], [2, 2, 3], 2.0).unwrap();
        assert!((&f.reconstruct() - &x).max_abs() <= 1e-12);
    }

    #[test]
    fn bounded_truth_scales_linearly_in_b() {
        let x1 = make_truth_bounded(&mut sim_rng(6), [4, 4, 4], [2, 2, 2], 1.0).unwrap();
        let x2 = make_truth_bounded(&mut sim_rng(6), [4, 4, 4], [2, 2, 2], 2.0).unwrap();
        assert_eq!(x1.scale(2.0), x2);
    }

    #[test]
    fn noiseless_observations() {
        let x = make_truth_signal(&mut sim_rng(7), [3, 4, 2], [1, 2, 2], 1.0).unwrap();
        let m = observe(&mut sim_rng(8), &x, &NoiseParams::Gaussian { sigma: 0.0 }).unwrap();
        assert_eq!(m.observations().unwrap(), &x);
        let r = observe(&mut sim_rng(8), &x, &NoiseParams::Regression { n: 1, sigma: 0.0 }).unwrap();
        let a = Tensor3::from_vec(x.dims(), r.designs().next().unwrap().to_vec()).unwrap();
        assert_eq!(r.responses().unwrap()[0], a.inner(&x).unwrap());
        assert_eq!(r.loss(&x).unwrap(), 0.0);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let x = Tensor3::zeros([2, 2, 2]);
        let mut rng = sim_rng(0);
        assert!(observe(&mut rng, &x, &NoiseParams::Gaussian { sigma: -1.0 }).is_err());
        assert!(observe(&mut rng, &x, &NoiseParams::Regression { n: 0, sigma: 1.0 }).is_err());
        assert!(observe(&mut rng, &x, &NoiseParams::Poisson { intensity: 0.0 }).is_err());
        assert!(observe(&mut rng, &x, &NoiseParams::Binomial { population: 0 }).is_err());
        assert!(make_truth_signal(&mut rng, [2, 2, 2], [3, 1, 1], 1.0).is_err());
        assert!(make_truth_bounded(&mut rng, [2, 2, 2], [1, 1, 1], 0.0).is_err());
    }

    // Sample mean of one Poisson entry over 1e5 draws lies within three
    // standard errors sqrt(mean / n) of the nominal mean I exp(x).
    #[test]
    fn poisson_mean_matches_intensity() {
        let x = Tensor3::from_vec([1, 1, 2], vec![0.7, -1.5]).unwrap();
        let intensity = 3.0;
        let mut rng = sim_rng(9);
        let reps = 100_000;
        let mut sums = [0.0; 2];
        for _ in 0..reps {
            let m = observe(&mut rng, &x, &NoiseParams::Poisson { intensity }).unwrap();
            for (s, v) in sums.iter_mut().zip(m.observations().unwrap().as_slice()) {
                *s += v;
            }
        }
        for (s, xv) in sums.iter().zip(x.as_slice()) {
            let mean = intensity * xv.exp();
            let se = (mean / reps as f64).sqrt();
            assert!((s / reps as f64 - mean).abs() <= 3.0 * se, "{} vs {mean}", s / reps as f64);
        }
    }

    #[test]
    fn gaussian_noise_moments() {
        let x = Tensor3::zeros([40, 50, 50]);
        let m = observe(&mut sim_rng(10), &x, &NoiseParams::Gaussian { sigma: 2.0 }).unwrap();
        let y = m.observations().unwrap().as_slice();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 3.0 * 2.0 / n.sqrt());
        // sd of the sample variance is about σ² sqrt(2 / n).
        assert!((var - 4.0).abs() <= 3.0 * 4.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn binomial_mean_matches_sigmoid() {
        let x = Tensor3::filled([10, 10, 10], 0.8);
        let m = observe(&mut sim_rng(11), &x, &NoiseParams::Binomial { population: 20 }).unwrap();
        let y = m.observations().unwrap().as_slice();
        let p = 1.0 / (1.0 + (-0.8f64).exp());
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let se = (20.0 * p * (1.0 - p) / y.len() as f64).sqrt();
        assert!((mean - 20.0 * p).abs() <= 3.0 * se);
        assert!(y.iter().all(|&v| (0.0..=20.0).contains(&v)));
    }

    #[test]
    fn heteroskedastic_profile_in_range() {
        let sd = heteroskedastic_sd(&mut sim_rng(12), [5, 5, 5], 0.5, 2.0).unwrap();
        assert!(sd.as_slice().iter().all(|&s| (0.5..=2.0).contains(&s)));
        assert!(heteroskedastic_sd(&mut sim_rng(12), [1, 1, 1], 2.0, 1.0).is_err());
    }

    #[test]
    fn child_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| child_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(child_seed(1, 0), child_seed(2, 0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn generators_are_bit_deterministic(seed in any::<u64>()) {
            let run = |seed: u64| {
                let mut rng = sim_rng(seed);
                let x = make_truth_bounded(&mut rng, [4, 3, 5], [2, 2, 2], 1.0).unwrap();
                let p = observe(&mut rng, &x, &NoiseParams::Poisson { intensity: 2.0 }).unwrap();
                let g = observe(&mut rng, &x, &NoiseParams::Regression { n: 3, sigma: 1.0 }).unwrap();
                let mut bits: Vec<u64> = x.as_slice().iter().map(|v| v.to_bits()).collect();
                bits.extend(p.observations().unwrap().as_slice().iter().map(|v| v.to_bits()));
                bits.extend(g.responses().unwrap().iter().map(|v| v.to_bits()));
                bits
            };
            prop_assert_eq!(run(seed), run(seed));
        }
    }

    fn instance_spec(model: ModelKind) -> InstanceSpec {
        InstanceSpec {
            model,
            dims: [6, 5, 4],
            ranks: [2, 2, 2],
            seed: 21,
            lambda: Some(3.0),
            big_b: Some(1.0),
            sigma: Some(0.2),
            sd_range: None,
            n: None,
            intensity: Some(4.0),
            population: Some(9),
        }
    }

    #[test]
    fn instance_spec_is_deterministic_and_follows_the_model() {
        for model in ModelKind::ALL {
            let spec = instance_spec(model);
            let a = spec.generate().unwrap();
            let b = spec.generate().unwrap();
            assert_eq!(a.truth, b.truth);
            assert_eq!(a.model.kind(), model);
            let x = a.truth.reconstruct();
            assert_eq!(a.model.loss(&x).unwrap().to_bits(), b.model.loss(&x).unwrap().to_bits());
        }
        let reg = instance_spec(ModelKind::TensorRegression).generate().unwrap();
        assert_eq!(reg.model.responses().unwrap().len(), default_sample_size([6, 5, 4], [2, 2, 2]));
        let bounded = instance_spec(ModelKind::PoissonPca).generate().unwrap().truth.reconstruct();
        assert!((bounded.max_abs() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn instance_spec_matches_manual_draws() {
        let spec = InstanceSpec { sd_range: Some([0.5, 2.0]), ..instance_spec(ModelKind::SubGaussianPca) };
        let mut rng = sim_rng(21);
        let truth = make_truth_signal_factored(&mut rng, [6, 5, 4], [2, 2, 2], 3.0).unwrap();
        let sd = heteroskedastic_sd(&mut rng, [6, 5, 4], 0.5, 2.0).unwrap();
        let manual = observe(&mut rng, &truth.reconstruct(), &NoiseParams::GaussianProfile { sd }).unwrap();
        let inst = spec.generate().unwrap();
        assert_eq!(inst.truth, truth);
        assert_eq!(inst.model.observations(), manual.observations());
    }

    #[test]
    fn instance_spec_requires_model_scalars() {
        let poisson = InstanceSpec { intensity: None, ..instance_spec(ModelKind::PoissonPca) };
        assert!(matches!(poisson.generate(), Err(Error::InvalidArgument(_))));
        let binomial = InstanceSpec { population: None, ..instance_spec(ModelKind::BinomialPca) };
        assert!(binomial.generate().is_err());
        let denoise = InstanceSpec { lambda: None, ..instance_spec(ModelKind::SubGaussianPca) };
        assert!(denoise.generate().is_err());
        let ranks = InstanceSpec { ranks: [7, 2, 2], ..instance_spec(ModelKind::SubGaussianPca) };
        assert!(ranks.generate().is_err());
    }
}
