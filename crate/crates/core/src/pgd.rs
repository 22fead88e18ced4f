//! Regularized projected gradient descent over the Tucker blocks.
//!
//! The objective is
//!
//! ```text
//! F(S, U1, U2, U3) = L([[S; U1, U2, U3]]) + (a/2) Σ_k ‖U_k^T U_k − b² I‖²_F
//! ```
//!
//! and one step updates every block from gradients taken at the current
//! iterate:
//!
//! ```text
//! U_k ← P_k(U_k − η (∇_{U_k} L + a U_k (U_k^T U_k − b² I)))
//! S   ← P_S(S − η ∇_S L)
//! ```
//!
//! `P_k` clips the rows of `U_k` to the radius `b sqrt(μ_k r_k / p_k)` and
//! `P_S` caps the mode-wise spectral norms of the core at
//! `b⁻³ B sqrt(Π p_k / Π μ_k r_k)`. Both are off by default.

use std::fmt;
use std::io::Write;

use crate::error::{ensure, Result};
use crate::linalg::{procrustes_rotation, spectral_norm, svd};
use crate::matrix::Matrix;
use crate::models::{partial_grads_from_full, ObservationModel};
use crate::tensor::{Tensor3, TuckerState};

/// Step size rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    /// Use this `η` as is.
    Fixed(f64),
    /// `η = η₀ / (c · λ̄⁽⁰⁾^{3/2})` with `λ̄⁽⁰⁾ = max_k ‖M_k(X⁽⁰⁾)‖` and `c` the
    /// model's [`ObservationModel::curvature_scale`].
    Scaled(f64),
}

/// Default `η₀` for [`StepSize::Scaled`].
pub const DEFAULT_ETA0: f64 = 0.25;
pub const DEFAULT_MAX_ITERS: usize = 2000;
pub const DEFAULT_REL_TOL: f64 = 1e-8;
/// Halvings tried by the backtracking search before the step is declared
/// a divergence.
const MAX_HALVINGS: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct PgdConfig {
    /// Weight of the balancing regularizer.
    pub a: f64,
    /// Target scale of the factors, `U_k^T U_k ≈ b² I`.
    pub b: f64,
    pub step: StepSize,
    pub max_iters: usize,
    /// Stop once `|F⁽ᵗ⁺¹⁾ − F⁽ᵗ⁾| ≤ rel_tol · |F⁽ᵗ⁾|`.
    pub rel_tol: f64,
    /// Halve `η` until the objective does not increase. The reduced `η` is
    /// kept for later steps.
    pub backtracking: bool,
    pub projections_enabled: bool,
    /// Incoherence parameters `μ_k`.
    pub mu: [f64; 3],
    /// Entrywise bound `B` on the truth.
    pub big_b: f64,
    /// Replace `a`, `b` by `a = λ̄⁽⁰⁾`, `b = (λ̄⁽⁰⁾)^{1/4}` and rescale the
    /// initial state to the new `b`.
    pub auto_tune: bool,
    /// With `auto_tune`, multiply `a` by the model's curvature scale so the
    /// regularizer stays commensurate with the loss (no effect for
    /// denoising, whose curvature scale is 1).
    pub curvature_scaled_a: bool,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            step: StepSize::Scaled(DEFAULT_ETA0),
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            backtracking: false,
            projections_enabled: false,
            mu: [3.0; 3],
            big_b: 2.0,
            auto_tune: true,
            curvature_scaled_a: true,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.a >= 0.0 && self.a.is_finite(), InvalidArgument, "a must be non-negative, got {}", self.a);
        ensure!(self.b > 0.0 && self.b.is_finite(), InvalidArgument, "b must be positive, got {}", self.b);
        match self.step {
            StepSize::Fixed(eta) => ensure!(eta >= 0.0 && eta.is_finite(), InvalidArgument, "step size must be non-negative, got {eta}"),
            StepSize::Scaled(eta0) => ensure!(eta0 > 0.0 && eta0.is_finite(), InvalidArgument, "eta0 must be positive, got {eta0}"),
        }
        ensure!(self.rel_tol >= 0.0, InvalidArgument, "rel_tol must be non-negative, got {}", self.rel_tol);
        if self.projections_enabled {
            ensure!(
                self.mu.iter().all(|&m| m > 0.0 && m.is_finite()),
                InvalidArgument,
                "incoherence parameters must be positive, got {:?}",
                self.mu
            );
            ensure!(self.big_b > 0.0 && self.big_b.is_finite(), InvalidArgument, "B must be positive, got {}", self.big_b);
        }
        Ok(())
    }

    /// Row-norm radius of the factor constraint for mode `k` (0-based).
    pub fn factor_radius(&self, t: &TuckerState, k: usize) -> f64 {
        let (p, r) = t.factors[k].shape();
        self.b * (self.mu[k] * r as f64 / p as f64).sqrt()
    }

    /// Mode-wise spectral cap of the core constraint.
    pub fn core_cap(&self, t: &TuckerState) -> f64 {
        let dims = t.dims();
        let ranks = t.ranks();
        let num: f64 = dims.iter().map(|&p| p as f64).product();
        let den: f64 = (0..3).map(|k| self.mu[k] * ranks[k] as f64).product();
        self.big_b * (num / den).sqrt() / self.b.powi(3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    RelTol,
    Diverged,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxIters => "max_iters",
            StopReason::RelTol => "rel_tol",
            StopReason::Diverged => "diverged",
        })
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    /// Last iterate with a finite objective.
    pub final_state: TuckerState,
    pub objective_trajectory: Vec<f64>,
    pub rmse_trajectory: Option<Vec<f64>>,
    pub e_diag_trajectory: Option<Vec<f64>>,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    /// `max_k ‖M_k(X⁽⁰⁾)‖`.
    pub lambda_bar0: f64,
    /// Values of `a`, `b` used (after auto-tuning).
    pub a: f64,
    pub b: f64,
    /// Step size in effect at the end (smaller than the initial one if
    /// backtracking kicked in).
    pub eta: f64,
}

impl FitReport {
    pub fn diverged(&self) -> bool {
        self.stop_reason == StopReason::Diverged
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trajectory.last().expect("trajectory has the initial point")
    }

    /// One row per iterate: `iter,objective,rmse,e_diag`; missing
    /// diagnostics are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,objective,rmse,e_diag")?;
        let cell = |v: Option<&Vec<f64>>, t: usize| v.map(|v| format!("{:e}", v[t])).unwrap_or_default();
        for (t, f) in self.objective_trajectory.iter().enumerate() {
            writeln!(
                w,
                "{t},{f:e},{},{}",
                cell(self.rmse_trajectory.as_ref(), t),
                cell(self.e_diag_trajectory.as_ref(), t)
            )?;
        }
        Ok(())
    }
}

/// `(a/2) Σ_k ‖U_k^T U_k − b² I‖²_F`.
pub fn regularizer(t: &TuckerState, a: f64, b: f64) -> Result<f64> {
    let mut sum = 0.0;
    for u in &t.factors {
        let g = gram_defect(u, b)?;
        sum += g.frob_norm().powi(2);
    }
    Ok(0.5 * a * sum)
}

fn gram_defect(u: &Matrix, b: f64) -> Result<Matrix> {
    let mut g = u.t_matmul(u)?;
    for i in 0..g.rows() {
        g[(i, i)] -= b * b;
    }
    Ok(g)
}

pub fn objective(model: &ObservationModel, t: &TuckerState, a: f64, b: f64) -> Result<f64> {
    Ok(model.loss(&t.reconstruct())? + regularizer(t, a, b)?)
}

/// Scales every row of `u` whose Euclidean norm exceeds `radius` back onto
/// the sphere of that radius.
pub fn project_factor(u: &Matrix, radius: f64) -> Matrix {
    let mut out = u.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            let s = radius / norm;
            row.iter_mut().for_each(|v| *v *= s);
        }
    }
    out
}

/// Caps the spectral norm of each matricization at `cap`, clipping singular
/// values of `M_1`, then `M_2`, then `M_3`. A core that already satisfies
/// every cap is returned unchanged.
pub fn project_core(s: &Tensor3, cap: f64) -> Result<Tensor3> {
    let mut feasible = true;
    for mode in 1..=3 {
        if spectral_norm(&s.matricize(mode)?)? > cap {
            feasible = false;
            break;
        }
    }
    if feasible {
        return Ok(s.clone());
    }
    let mut out = s.clone();
    for mode in 1..=3 {
        let m = out.matricize(mode)?;
        let d = svd(&m)?;
        if d.s.first().is_some_and(|&top| top > cap) {
            let us = Matrix::from_fn(d.u.rows(), d.s.len(), |i, j| d.u[(i, j)] * d.s[j].min(cap));
            out = Tensor3::unmatricize(&us.matmul(&d.vt)?, mode, out.dims())?;
        }
    }
    Ok(out)
}

/// One step from `t` given `∇L` at `reconstruct(t)`.
fn step_from_grad(t: &TuckerState, grad: &Tensor3, cfg: &PgdConfig, eta: f64) -> Result<TuckerState> {
    let pg = partial_grads_from_full(t, grad)?;
    let mut next = t.clone();
    for k in 0..3 {
        let u = &t.factors[k];
        let mut g = pg.g_u[k].clone();
        if cfg.a != 0.0 {
            g.axpy(cfg.a, &u.matmul(&gram_defect(u, cfg.b)?)?)?;
        }
        let mut nu = u.clone();
        nu.axpy(-eta, &g)?;
        if cfg.projections_enabled {
            nu = project_factor(&nu, cfg.factor_radius(t, k));
        }
        next.factors[k] = nu;
    }
    next.core.axpy(-eta, &pg.g_s)?;
    if cfg.projections_enabled {
        next.core = project_core(&next.core, cfg.core_cap(t))?;
    }
    Ok(next)
}

/// One simultaneous update of all four blocks with step size `eta`.
pub fn step(model: &ObservationModel, t: &TuckerState, cfg: &PgdConfig, eta: f64) -> Result<TuckerState> {
    let grad = model.grad(&t.reconstruct())?;
    step_from_grad(t, &grad, cfg, eta)
}

/// `max_k ‖M_k(x)‖`.
pub fn lambda_bar(x: &Tensor3) -> Result<f64> {
    let mut out = 0.0f64;
    for mode in 1..=3 {
        out = out.max(spectral_norm(&x.matricize(mode)?)?);
    }
    Ok(out)
}

/// Rotation-aligned distance to a truth in the same balanced scaling:
/// `Σ_k ‖U_k − U*_k R_k‖²_F + ‖S − S* ×_1 R_1^T ×_2 R_2^T ×_3 R_3^T‖²_F`
/// with each `R_k` the orthogonal Procrustes solution for mode `k` alone.
/// Upper bound on the minimum over all rotation triples.
pub fn e_diagnostic(t: &TuckerState, truth: &TuckerState) -> Result<f64> {
    ensure!(t.ranks() == truth.ranks(), InvalidArgument, "ranks {:?} vs truth ranks {:?}", t.ranks(), truth.ranks());
    ensure!(t.dims() == truth.dims(), DimensionMismatch, "dims {:?} vs truth dims {:?}", t.dims(), truth.dims());
    let mut total = 0.0;
    let mut rotated = truth.core.clone();
    for k in 0..3 {
        let r = procrustes_rotation(&truth.factors[k], &t.factors[k])?;
        let aligned = truth.factors[k].matmul(&r)?;
        total += (&t.factors[k] - &aligned).frob_norm().powi(2);
        rotated = rotated.mode_product_t(k + 1, &r)?;
    }
    Ok(total + (&t.core - &rotated).frob_norm().powi(2))
}

/// Root mean squared error `(p1 p2 p3)^{-1/2} ‖x_hat − x_star‖_F`.
pub fn rmse(x_hat: &Tensor3, x_star: &Tensor3) -> Result<f64> {
    x_hat.check_same_dims(x_star)?;
    Ok((x_hat - x_star).frob_norm() / (x_hat.len() as f64).sqrt())
}

/// Runs the descent from `init`, tracking the RMSE when a truth is given.
pub fn fit(model: &ObservationModel, init: &TuckerState, cfg: &PgdConfig, truth: Option<&Tensor3>) -> Result<FitReport> {
    run(model, init, cfg, truth, None)
}

/// As [`fit`], with a factored truth so that the rotation-aligned distance
/// is tracked as well. The truth's factors must satisfy
/// `U*^T U* = scale_b² I`; it is rescaled to the working `b`.
pub fn fit_with_diagnostics(
    model: &ObservationModel,
    init: &TuckerState,
    cfg: &PgdConfig,
    truth: &TuckerState,
) -> Result<FitReport> {
    let x_star = truth.reconstruct();
    run(model, init, cfg, Some(&x_star), Some(truth))
}

fn run(
    model: &ObservationModel,
    init: &TuckerState,
    cfg: &PgdConfig,
    truth: Option<&Tensor3>,
    truth_state: Option<&TuckerState>,
) -> Result<FitReport> {
    cfg.validate()?;
    ensure!(init.dims() == model.dims(), DimensionMismatch, "init dims {:?} vs model dims {:?}", init.dims(), model.dims());
    let x0 = init.reconstruct();
    let lambda_bar0 = lambda_bar(&x0)?;
    let mut cfg = cfg.clone();
    let mut state = init.clone();
    if cfg.auto_tune {
        ensure!(lambda_bar0 > 0.0, Numeric, "auto-tuning needs a nonzero initial estimate");
        cfg.a = if cfg.curvature_scaled_a { model.curvature_scale() * lambda_bar0 } else { lambda_bar0 };
        cfg.b = lambda_bar0.powf(0.25);
        state = state.rescale(cfg.b)?;
    }
    let mut eta = match cfg.step {
        StepSize::Fixed(eta) => eta,
        StepSize::Scaled(eta0) => {
            ensure!(lambda_bar0 > 0.0, Numeric, "scaled step size needs a nonzero initial estimate");
            eta0 / (model.curvature_scale() * lambda_bar0.powf(1.5))
        }
    };
    let truth_balanced = match truth_state {
        Some(t) => Some(t.rescale(cfg.b)?),
        None => None,
    };
    let diagnostics = |s: &TuckerState, x: &Tensor3, rm: &mut Vec<f64>, ed: &mut Vec<f64>| -> Result<()> {
        if let Some(x_star) = truth {
            rm.push(rmse(x, x_star)?);
        }
        if let Some(ts) = &truth_balanced {
            ed.push(e_diagnostic(s, ts)?);
        }
        Ok(())
    };

    let (loss0, mut grad) = model.loss_and_grad(&x0)?;
    let f0 = loss0 + regularizer(&state, cfg.a, cfg.b)?;
    ensure!(f0.is_finite(), Numeric, "initial objective is not finite");
    let blowup = f0 + 1e3 * f0.abs().max(1.0);
    let mut objective = vec![f0];
    let (mut rmse_traj, mut e_traj) = (Vec::new(), Vec::new());
    diagnostics(&state, &x0, &mut rmse_traj, &mut e_traj)?;

    let mut stop_reason = StopReason::MaxIters;
    let mut f = f0;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let mut accepted = None;
        let mut halvings = 0;
        loop {
            let candidate = step_from_grad(&state, &grad, &cfg, eta)?;
            let x = candidate.reconstruct();
            let evaluated = model
                .loss_and_grad(&x)
                .ok()
                .and_then(|(l, g)| Some((l + regularizer(&candidate, cfg.a, cfg.b).ok()?, g)))
                .filter(|(fv, _)| fv.is_finite());
            let acceptable = match &evaluated {
                Some((fv, _)) => !cfg.backtracking || *fv <= f,
                None => false,
            };
            if acceptable {
                accepted = Some((candidate, x, evaluated.expect("checked above")));
                break;
            }
            if !cfg.backtracking || halvings == MAX_HALVINGS {
                break;
            }
            eta *= 0.5;
            halvings += 1;
        }
        let Some((next, x, (f_next, g_next))) = accepted else {
            stop_reason = StopReason::Diverged;
            break;
        };
        iterations += 1;
        state = next;
        grad = g_next;
        objective.push(f_next);
        diagnostics(&state, &x, &mut rmse_traj, &mut e_traj)?;
        if f_next > blowup {
            stop_reason = StopReason::Diverged;
            break;
        }
        let converged = (f_next - f).abs() <= cfg.rel_tol * f.abs();
        f = f_next;
        if converged {
            stop_reason = StopReason::RelTol;
            break;
        }
    }

    state.scale_b = cfg.b;
    Ok(FitReport {
        final_state: state,
        objective_trajectory: objective,
        rmse_trajectory: truth.map(|_| rmse_traj),
        e_diag_trajectory: truth_balanced.map(|_| e_traj),
        iterations_run: iterations,
        stop_reason,
        lambda_bar0,
        a: cfg.a,
        b: cfg.b,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{initialize, Spectral};
    use crate::simgen::{make_truth_signal_factored, observe, random_stiefel, sim_rng, NoiseParams};
    use proptest::prelude::*;

    fn scalar_state(s: f64) -> TuckerState {
        TuckerState::new(
            Tensor3::filled([1, 1, 1], s),
            [Matrix::identity(1), Matrix::identity(1), Matrix::identity(1)],
            1.0,
        )
        .unwrap()
    }

    fn fixed(eta: f64, a: f64, b: f64) -> PgdConfig {
        PgdConfig { a, b, step: StepSize::Fixed(eta), auto_tune: false, ..PgdConfig::default() }
    }

    #[test]
    fn scalar_objective_and_step() {
        let model = ObservationModel::sub_gaussian(Tensor3::zeros([1, 1, 1])).unwrap();
        let t = scalar_state(2.0);
        assert_eq!(objective(&model, &t, 2.0, 1.0).unwrap(), 2.0);
        let next = step(&model, &t, &fixed(0.1, 2.0, 1.0), 0.1).unwrap();
        assert!((next.core.get(0, 0, 0) - 1.8).abs() <= 1e-15);
        // ∇_U L = ∇L · S · U·U = 4, regularizer gradient is zero.
        assert!((next.factors[0][(0, 0)] - 0.6).abs() <= 1e-15);
    }

    #[test]
    fn objective_without_regularizer_is_the_loss() {
        let mut rng = sim_rng(1);
        let t = make_truth_signal_factored(&mut rng, [4, 5, 3], [2, 2, 2], 1.0).unwrap();
        let model = observe(&mut rng, &t.reconstruct(), &NoiseParams::Gaussian { sigma: 1.0 }).unwrap();
        let skewed = t.rescale(1.7).unwrap();
        let loss = model.loss(&skewed.reconstruct()).unwrap();
        assert_eq!(objective(&model, &skewed, 0.0, 3.0).unwrap(), loss);
        assert!(regularizer(&skewed, 5.0, 1.7).unwrap() <= 1e-24);
    }

    #[test]
    fn zero_gradient_with_balanced_factors_is_a_fixed_point() {
        let mut rng = sim_rng(2);
        let t = make_truth_signal_factored(&mut rng, [5, 4, 6], [2, 2, 3], 2.0).unwrap().rescale(1.3).unwrap();
        let model = ObservationModel::sub_gaussian(t.reconstruct()).unwrap();
        let next = step(&model, &t, &fixed(0.5, 1.0, 1.3), 0.5).unwrap();
        assert!((&next.core - &t.core).max_abs() <= 1e-14);
        for k in 0..3 {
            assert!((&next.factors[k] - &t.factors[k]).frob_norm() <= 1e-14);
        }
    }

    #[test]
    fn zero_step_changes_nothing() {
        let mut rng = sim_rng(3);
        let t = make_truth_signal_factored(&mut rng, [4, 4, 4], [2, 2, 2], 2.0).unwrap();
        let model = observe(&mut rng, &t.reconstruct(), &NoiseParams::Gaussian { sigma: 1.0 }).unwrap();
        assert_eq!(step(&model, &t, &fixed(0.0, 1.0, 1.0), 0.0).unwrap(), t);
    }

    #[test]
    fn factor_projection_cases() {
        let u = Matrix::from_rows(&[[3.0, 4.0]]);
        assert!((&project_factor(&u, 1.0) - &Matrix::from_rows(&[[0.6, 0.8]])).frob_norm() <= 1e-15);
        let inside = Matrix::from_rows(&[[0.1, 0.2], [0.3, -0.1]]);
        assert_eq!(project_factor(&inside, 1.0), inside);
        assert_eq!(project_factor(&Matrix::zeros(3, 2), 0.5), Matrix::zeros(3, 2));
    }

    #[test]
    fn rank_one_core_clip_equalizes_all_modes() {
        let (a, b, c) = ([1.0, 2.0], [2.0, -1.0, 2.0], [1.0, 1.0]);
        // ‖a‖‖b‖‖c‖ = sqrt(5) · 3 · sqrt(2).
        let s = Tensor3::from_fn([2, 3, 2], |i, j, k| 2.0 * a[i] * b[j] * c[k]);
        let cap = 1.5;
        let out = project_core(&s, cap).unwrap();
        for mode in 1..=3 {
            assert!((spectral_norm(&out.matricize(mode).unwrap()).unwrap() - cap).abs() <= 1e-12);
        }
        assert!((&out.scale(2.0 * 5f64.sqrt() * 3.0 * 2f64.sqrt() / cap) - &s).max_abs() <= 1e-12);
        assert_eq!(project_core(&Tensor3::zeros([2, 2, 2]), 1.0).unwrap(), Tensor3::zeros([2, 2, 2]));
    }

    #[test]
    fn feasible_core_is_untouched() {
        let s = Tensor3::from_fn([2, 2, 3], |i, j, k| 0.01 * (i + j * k) as f64);
        assert_eq!(project_core(&s, 10.0).unwrap(), s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn projections_are_idempotent_and_feasible(seed in any::<u64>(), radius in 0.05f64..2.0, cap in 0.05f64..3.0) {
            let mut rng = sim_rng(seed);
            let u = crate::simgen::gaussian_matrix(&mut rng, 6, 3);
            let pu = project_factor(&u, radius);
            prop_assert!(pu.row_norms().iter().all(|&n| n <= radius + 1e-12));
            prop_assert!((&project_factor(&pu, radius) - &pu).frob_norm() <= 1e-12);
            let s = crate::simgen::gaussian_tensor(&mut rng, [3, 2, 3]);
            let ps = project_core(&s, cap).unwrap();
            let again = project_core(&ps, cap).unwrap();
            prop_assert!((&again - &ps).max_abs() <= 1e-10);
            prop_assert!(spectral_norm(&ps.matricize(3).unwrap()).unwrap() <= cap * (1.0 + 1e-12));
        }
    }

    fn regression_instance(seed: u64, n: usize, sigma: f64) -> (ObservationModel, TuckerState) {
        let mut rng = sim_rng(seed);
        let t = make_truth_signal_factored(&mut rng, [6, 5, 5], [2, 2, 2], 2.0).unwrap();
        let m = observe(&mut rng, &t.reconstruct(), &NoiseParams::Regression { n, sigma }).unwrap();
        (m, t)
    }

    #[test]
    fn max_iters_zero_returns_init() {
        let (m, _) = regression_instance(4, 100, 0.5);
        let init = initialize(&m, [2, 2, 2], 1.0, Spectral::default()).unwrap();
        let cfg = PgdConfig { max_iters: 0, auto_tune: false, ..PgdConfig::default() };
        let rep = fit(&m, &init, &cfg, None).unwrap();
        assert_eq!(rep.final_state, init);
        assert_eq!(rep.objective_trajectory.len(), 1);
        assert_eq!(rep.iterations_run, 0);
        assert!(rep.rmse_trajectory.is_none());
    }

    #[test]
    fn auto_tune_matches_independent_spectral_norms() {
        let (m, _) = regression_instance(5, 100, 0.5);
        let init = initialize(&m, [2, 2, 2], 1.0, Spectral::default()).unwrap();
        let x0 = init.reconstruct();
        let lam = (1..=3)
            .map(|k| crate::linalg::singular_values(&x0.matricize(k).unwrap()).unwrap()[0])
            .fold(0.0, f64::max);
        let literal = PgdConfig { max_iters: 1, curvature_scaled_a: false, ..PgdConfig::default() };
        let rep = fit(&m, &init, &literal, None).unwrap();
        assert_eq!(rep.a, lam);
        assert_eq!(rep.b, lam.powf(0.25));
        assert_eq!(rep.lambda_bar0, lam);
        let scaled = fit(&m, &init, &PgdConfig { max_iters: 1, ..PgdConfig::default() }, None).unwrap();
        assert_eq!(scaled.a, m.curvature_scale() * lam);
        assert_eq!(scaled.b, lam.powf(0.25));
    }

    #[test]
    fn trajectories_have_one_point_per_iterate() {
        let (m, t) = regression_instance(6, 150, 0.1);
        let init = initialize(&m, [2, 2, 2], 1.0, Spectral::default()).unwrap();
        let cfg = PgdConfig { max_iters: 25, rel_tol: 0.0, ..PgdConfig::default() };
        let rep = fit_with_diagnostics(&m, &init, &cfg, &t).unwrap();
        assert_eq!(rep.iterations_run, 25);
        assert_eq!(rep.stop_reason, StopReason::MaxIters);
        for traj in [&rep.objective_trajectory, rep.rmse_trajectory.as_ref().unwrap(), rep.e_diag_trajectory.as_ref().unwrap()] {
            assert_eq!(traj.len(), 26);
        }
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("iter,objective,rmse,e_diag\n0,"));
        assert_eq!(text.lines().count(), 27);
    }

    #[test]
    fn noiseless_regression_converges_to_truth() {
        let (m, t) = regression_instance(7, 300, 0.0);
        let init = initialize(&m, [2, 2, 2], 1.0, Spectral::default()).unwrap();
        let cfg = PgdConfig { rel_tol: 0.0, max_iters: 1500, ..PgdConfig::default() };
        let rep = fit(&m, &init, &cfg, Some(&t.reconstruct())).unwrap();
        let final_rmse = *rep.rmse_trajectory.as_ref().unwrap().last().unwrap();
        assert!(final_rmse <= 1e-6, "rmse {final_rmse:e} after {} iterations", rep.iterations_run);
        let f0 = rep.objective_trajectory[0];
        for (i, w) in rep.objective_trajectory.windows(2).enumerate() {
            assert!(w[1] <= w[0] + 1e-14 * f0, "objective rose at {i}: {w:?}");
        }
    }

    #[test]
    fn backtracking_gives_monotone_descent() {
        let mut rng = sim_rng(8);
        let t = make_truth_signal_factored(&mut rng, [6, 6, 6], [2, 2, 2], 3.0).unwrap();
        let m = observe(&mut rng, &t.reconstruct(), &NoiseParams::Gaussian { sigma: 0.5 }).unwrap();
        let init = initialize(&m, [2, 2, 2], 1.0, Spectral::default()).unwrap();
        let cfg = PgdConfig {
            a: 0.0,
            step: StepSize::Fixed(10.0),
            backtracking: true,
            auto_tune: false,
            rel_tol: 0.0,
            max_iters: 100,
            ..PgdConfig::default()
        };
        let rep = fit(&m, &init, &cfg, None).unwrap();
        assert_eq!(rep.iterations_run, 100);
        assert!(rep.eta < 10.0);
        for w in rep.objective_trajectory.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn huge_step_is_reported_as_divergence() {
        let (m, _) = regression_instance(9, 80, 0.5);
        let init = initialize(&m, [2, 2, 2], 1.0, Spectral::default()).unwrap();
        let cfg = PgdConfig { step: StepSize::Fixed(1.0), rel_tol: 0.0, max_iters: 200, ..PgdConfig::default() };
        let rep = fit(&m, &init, &cfg, None).unwrap();
        assert!(rep.diverged());
        assert!(rep.final_state.is_finite());
        assert_eq!(rep.objective_trajectory.len(), rep.iterations_run + 1);
    }

    #[test]
    fn projected_iterates_stay_feasible() {
        let mut rng = sim_rng(10);
        let x = crate::simgen::make_truth_bounded(&mut rng, [8, 8, 8], [2, 2, 2], 1.0).unwrap();
        let m = observe(&mut rng, &x, &NoiseParams::Poisson { intensity: 2.0 }).unwrap();
        let init = initialize(&m, [2, 2, 2], 1.0, Spectral::default()).unwrap();
        let cfg = PgdConfig {
            projections_enabled: true,
            mu: [1.0; 3],
            big_b: 1.0,
            step: StepSize::Scaled(0.5),
            rel_tol: 0.0,
            max_iters: 30,
            ..PgdConfig::default()
        };
        let mut state = init.rescale(lambda_bar(&init.reconstruct()).unwrap().powf(0.25)).unwrap();
        let tuned = PgdConfig { b: state.scale_b, a: 1.0, auto_tune: false, ..cfg };
        let radius: Vec<f64> = (0..3).map(|k| tuned.factor_radius(&state, k)).collect();
        for _ in 0..30 {
            state = step(&m, &state, &tuned, 0.05).unwrap();
            for k in 0..3 {
                assert!(state.factors[k].l2inf_norm() <= radius[k] + 1e-12);
            }
        }
    }

    fn rotation(rng: &mut crate::simgen::SimRng, r: usize) -> Matrix {
        random_stiefel(rng, r, r).unwrap()
    }

    fn rotate(t: &TuckerState, rs: &[Matrix; 3]) -> TuckerState {
        let mut out = t.clone();
        for k in 0..3 {
            out.factors[k] = t.factors[k].matmul(&rs[k]).unwrap();
            out.core = out.core.mode_product_t(k + 1, &rs[k]).unwrap();
        }
        out
    }

    #[test]
    fn objective_trajectory_is_rotation_invariant() {
        let (m, _) = regression_instance(11, 200, 0.3);
        let init = initialize(&m, [2, 2, 2], 1.0, Spectral::default()).unwrap();
        let mut rng = sim_rng(12);
        let rs = [rotation(&mut rng, 2), rotation(&mut rng, 2), rotation(&mut rng, 2)];
        let rotated = rotate(&init, &rs);
        assert!((&rotated.reconstruct() - &init.reconstruct()).max_abs() <= 1e-12);
        let cfg = PgdConfig { rel_tol: 0.0, max_iters: 60, ..PgdConfig::default() };
        let a = fit(&m, &init, &cfg, None).unwrap();
        let b = fit(&m, &rotated, &cfg, None).unwrap();
        for (x, y) in a.objective_trajectory.iter().zip(&b.objective_trajectory) {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
        }
    }

    #[test]
    fn e_diagnostic_vanishes_on_rotated_truth() {
        let mut rng = sim_rng(13);
        let t = make_truth_signal_factored(&mut rng, [5, 6, 4], [2, 3, 2], 2.0).unwrap();
        assert!(e_diagnostic(&t, &t).unwrap() <= 1e-20);
        let rs = [rotation(&mut rng, 2), rotation(&mut rng, 3), rotation(&mut rng, 2)];
        assert!(e_diagnostic(&rotate(&t, &rs), &t).unwrap() <= 1e-10);
        let other = make_truth_signal_factored(&mut rng, [5, 6, 4], [2, 2, 2], 2.0).unwrap();
        assert!(e_diagnostic(&other, &t).is_err());
    }

    #[test]
    fn e_diagnostic_matches_sign_search_for_rank_one() {
        // p = 2, r = 1: rotations are signs, and the surrogate picks each
        // sign to match its factor. Compare against all 8 sign patterns.
        let u = |a: f64, b: f64| Matrix::from_rows(&[[a], [b]]);
        let truth = TuckerState::new(
            Tensor3::filled([1, 1, 1], 2.0),
            [u(0.6, 0.8), u(1.0, 0.0), u(0.0, 1.0)],
            1.0,
        )
        .unwrap();
        let t = TuckerState::new(
            Tensor3::filled([1, 1, 1], -1.9),
            [u(-0.5, -0.8), u(0.9, 0.1), u(0.1, 1.1)],
            1.0,
        )
        .unwrap();
        let mut best = f64::INFINITY;
        for signs in 0..8u32 {
            let s: Vec<f64> = (0..3).map(|k| if signs >> k & 1 == 1 { -1.0 } else { 1.0 }).collect();
            let mut e = 0.0;
            for k in 0..3 {
                e += (&t.factors[k] - &truth.factors[k].scale(s[k])).frob_norm().powi(2);
            }
            e += (t.core.get(0, 0, 0) - 2.0 * s[0] * s[1] * s[2]).powi(2);
            best = best.min(e);
        }
        let surrogate = e_diagnostic(&t, &truth).unwrap();
        assert!((surrogate - best).abs() <= 1e-12, "{surrogate} vs {best}");
    }

    #[test]
    fn rmse_cases() {
        let x = Tensor3::zeros([3, 3, 3]);
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        assert_eq!(rmse(&Tensor3::filled([3, 3, 3], 1.0), &x).unwrap(), 1.0);
        let a = Tensor3::from_vec([2, 2, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let b = Tensor3::from_vec([2, 2, 2], vec![1.0, 0.0, 3.0, 4.0, 5.0, 6.0, 7.0, 4.0]).unwrap();
        // Differences 2 and 4: sqrt(20 / 8).
        assert!((rmse(&a, &b).unwrap() - 2.5f64.sqrt()).abs() <= 1e-15);
        assert!(rmse(&a, &Tensor3::zeros([2, 2, 1])).is_err());
    }
}
