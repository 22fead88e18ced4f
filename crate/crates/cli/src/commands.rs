//! The four subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use tucker_gd::bench::{run_experiment, ExperimentSpec};
use tucker_gd::dataset::{read_dataset, write_dataset};
use tucker_gd::init::{initialize, Spectral, INIT_HOOI_ITERS};
use tucker_gd::io::{load_tensor, save_tensor};
use tucker_gd::linalg::singular_values;
use tucker_gd::models::ModelKind;
use tucker_gd::pgd::{fit, rmse, PgdConfig, StepSize};
use tucker_gd::simgen::InstanceSpec;

use crate::opts::{triple, ConfigFile, DataOpts, InitMethod, ModelOpts, OutOpts, PgdOpts, SweepOpts};
use crate::CliError;

const DEFAULT_LAMBDA: f64 = 2.0;
const DEFAULT_BIG_B: f64 = 2.0;
const DEFAULT_SIGMA: f64 = 1.0;

fn spectral(init: Option<InitMethod>) -> Spectral {
    match init {
        Some(InitMethod::Hosvd) => Spectral::Hosvd,
        Some(InitMethod::Hooi) | None => Spectral::Hooi { t_max: INIT_HOOI_ITERS },
    }
}

fn out_paths(out: &OutOpts, default_dir: &Path, default_name: &str) -> (PathBuf, String) {
    let dir = out.out_dir.clone().unwrap_or_else(|| default_dir.to_path_buf());
    let name = out.name.clone().unwrap_or_else(|| default_name.to_string());
    (dir, name)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn gen(config: Option<&Path>, model: ModelOpts, out: OutOpts) -> Result<(), CliError> {
    let cfg = ConfigFile::load(config, &[ModelOpts::KEYS, OutOpts::KEYS])?;
    let m = model.over(cfg.group()?);
    let out = out.over(cfg.group()?);
    let kind = m.model.ok_or_else(|| CliError::Usage("--model is required".into()))?;
    let dims = triple(m.dims.as_deref().ok_or_else(|| CliError::Usage("--dims is required".into()))?, "dims")?;
    let ranks = triple(m.ranks.as_deref().ok_or_else(|| CliError::Usage("--ranks is required".into()))?, "ranks")?;
    let mut spec = InstanceSpec {
        model: kind,
        dims,
        ranks,
        seed: m.seed.unwrap_or(0),
        lambda: None,
        big_b: None,
        sigma: None,
        sd_range: None,
        n: None,
        intensity: None,
        population: None,
    };
    match kind {
        ModelKind::SubGaussianPca | ModelKind::TensorRegression => {
            spec.lambda = Some(m.lambda.unwrap_or(DEFAULT_LAMBDA));
            spec.sigma = Some(m.sigma.unwrap_or(DEFAULT_SIGMA));
            if kind == ModelKind::TensorRegression {
                spec.n = m.n;
            } else if let Some(r) = &m.sd_range {
                let [lo, hi] = <[f64; 2]>::try_from(r.as_slice())
                    .map_err(|_| CliError::Usage("--sd-range takes two values lo,hi".into()))?;
                spec.sd_range = Some([lo, hi]);
            }
        }
        ModelKind::PoissonPca => {
            spec.big_b = Some(m.big_b.unwrap_or(DEFAULT_BIG_B));
            spec.intensity = Some(m.intensity.ok_or_else(|| CliError::Usage("--I is required for poisson".into()))?);
        }
        ModelKind::BinomialPca => {
            spec.big_b = Some(m.big_b.unwrap_or(DEFAULT_BIG_B));
            spec.population =
                Some(m.population.ok_or_else(|| CliError::Usage("--N is required for binomial".into()))?);
        }
    }
    let inst = spec.generate()?;
    let (dir, name) = out_paths(&out, Path::new("."), kind.name());
    let truth = inst.truth.reconstruct();
    let written = write_dataset(&dir, &name, &inst.model, Some(ranks), Some(&truth), Some(&spec))?;
    eprintln!("generated {kind} data, dims {dims:?}, ranks {ranks:?}, seed {}", spec.seed);
    for p in &written {
        println!("{}", p.display());
    }
    Ok(())
}

fn pgd_config(p: &PgdOpts) -> Result<PgdConfig, CliError> {
    let d = PgdConfig::default();
    let step = match (p.eta, p.eta0) {
        (Some(eta), _) => StepSize::Fixed(eta),
        (None, Some(eta0)) => StepSize::Scaled(eta0),
        (None, None) => d.step,
    };
    let cfg = PgdConfig {
        a: p.a.unwrap_or(d.a),
        b: p.b.unwrap_or(d.b),
        step,
        max_iters: p.max_iters.unwrap_or(d.max_iters),
        rel_tol: p.rel_tol.unwrap_or(d.rel_tol),
        backtracking: p.backtracking.unwrap_or(d.backtracking),
        projections_enabled: p.projections.unwrap_or(d.projections_enabled),
        mu: match &p.mu {
            Some(mu) => triple(mu, "mu")?,
            None => d.mu,
        },
        auto_tune: p.auto_tune.unwrap_or(d.auto_tune),
        curvature_scaled_a: !p.literal_a.unwrap_or(!d.curvature_scaled_a),
        ..d
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn fit_cmd(config: Option<&Path>, data: DataOpts, pgd: PgdOpts, out: OutOpts) -> Result<(), CliError> {
    let cfg_file = ConfigFile::load(config, &[DataOpts::KEYS, PgdOpts::KEYS, OutOpts::KEYS])?;
    let data = data.over(cfg_file.group()?);
    let pgd = pgd.over(cfg_file.group()?);
    let out = out.over(cfg_file.group()?);
    let sidecar = data.data.ok_or_else(|| CliError::Usage("--data is required".into()))?;
    let dataset = read_dataset(&sidecar)?;
    let ranks = match (&data.ranks, dataset.sidecar.ranks) {
        (Some(r), _) => triple(r, "ranks")?,
        (None, Some(r)) => r,
        (None, None) => return Err(CliError::Usage("--ranks is required (the sidecar names none)".into())),
    };
    let truth = match &data.truth {
        Some(p) => Some(load_tensor(p)?),
        None => dataset.truth,
    };
    if let Some(t) = &truth {
        if t.dims() != dataset.model.dims() {
            return Err(CliError::Usage(format!("truth dims {:?} differ from data dims {:?}", t.dims(), dataset.model.dims())));
        }
    }
    let cfg = pgd_config(&pgd)?;
    let init = initialize(&dataset.model, ranks, cfg.b, spectral(pgd.init))?;
    let report = fit(&dataset.model, &init, &cfg, truth.as_ref())?;

    let default_dir = sidecar.parent().map(Path::to_path_buf).unwrap_or_default();
    let stem = sidecar.file_stem().and_then(|s| s.to_str()).unwrap_or("fit").to_string();
    let (dir, name) = out_paths(&out, &default_dir, &stem);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let est_path = dir.join(format!("{name}.estimate.t3"));
    let csv_path = dir.join(format!("{name}.report.csv"));
    let estimate = report.final_state.reconstruct();
    save_tensor(&est_path, &estimate)?;
    let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    report.write_csv(std::io::BufWriter::new(file))?;

    if cfg.auto_tune {
        eprintln!("auto-tuned a = {:e}, b = {:e} (lambda_bar0 = {:e})", report.a, report.b, report.lambda_bar0);
    }
    eprintln!(
        "{} iterations, stop: {}, final objective {:e}",
        report.iterations_run,
        report.stop_reason,
        report.final_objective()
    );
    println!("{}", est_path.display());
    println!("{}", csv_path.display());
    let mut summary = format!(
        "objective={:e} iterations={} stop={} a={:e} b={:e} eta={:e}",
        report.final_objective(),
        report.iterations_run,
        report.stop_reason,
        report.a,
        report.b,
        report.eta
    );
    if let Some(t) = &truth {
        let r = rmse(&estimate, t)?;
        eprintln!("final RMSE {r:e}");
        summary.push_str(&format!(" rmse={r:e}"));
    }
    println!("{summary}");
    if report.diverged() {
        return Err(CliError::Diverged(format!(
            "objective diverged after {} iterations; outputs written",
            report.iterations_run
        )));
    }
    Ok(())
}

fn experiment_spec(base: ExperimentSpec, m: &ModelOpts, s: &SweepOpts, p: &PgdOpts) -> Result<ExperimentSpec, CliError> {
    let mut spec = base;
    if let Some(v) = m.model {
        spec.model = v;
    }
    if let Some(v) = &m.dims {
        spec.dims = triple(v, "dims")?;
    }
    if let Some(v) = &m.ranks {
        spec.ranks = triple(v, "ranks")?;
    }
    if m.n.is_some() {
        spec.n = m.n;
    }
    if let Some(v) = &m.sd_range {
        spec.sd_range =
            Some(<[f64; 2]>::try_from(v.as_slice()).map_err(|_| CliError::Usage("--sd-range takes two values lo,hi".into()))?);
    }
    spec.sigma = m.sigma.unwrap_or(spec.sigma);
    spec.lambda = m.lambda.unwrap_or(spec.lambda);
    spec.big_b = m.big_b.unwrap_or(spec.big_b);
    spec.intensity = m.intensity.unwrap_or(spec.intensity);
    spec.population = m.population.unwrap_or(spec.population);
    spec.seed = m.seed.unwrap_or(spec.seed);
    spec.sweep_var = s.sweep_var.unwrap_or(spec.sweep_var);
    if let Some(g) = &s.grid {
        spec.grid = g.clone();
    }
    spec.replicates = s.replicates.unwrap_or(spec.replicates);
    if let Some(e) = &s.estimators {
        spec.estimators = e.clone();
    }
    spec.timing = s.timing.unwrap_or(spec.timing);
    if let Some(init) = p.init {
        spec.init_hooi = init == InitMethod::Hooi;
    }
    if p.eta.is_some() || p.a.is_some() || p.b.is_some() || p.auto_tune == Some(false) || p.literal_a.is_some() {
        return Err(CliError::Usage("sweep supports --eta0 but not --eta, --a, --b, --auto-tune or --literal-a".into()));
    }
    spec.gd.eta0 = p.eta0.unwrap_or(spec.gd.eta0);
    spec.gd.max_iters = p.max_iters.unwrap_or(spec.gd.max_iters);
    spec.gd.rel_tol = p.rel_tol.unwrap_or(spec.gd.rel_tol);
    spec.gd.backtracking = p.backtracking.unwrap_or(spec.gd.backtracking);
    spec.gd.projections = p.projections.unwrap_or(spec.gd.projections);
    if let Some(mu) = &p.mu {
        spec.gd.mu = triple(mu, "mu")?;
    }
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

pub fn sweep(
    config: Option<&Path>,
    spec_path: Option<&Path>,
    model: ModelOpts,
    sweep: SweepOpts,
    pgd: PgdOpts,
    out: OutOpts,
) -> Result<(), CliError> {
    let cfg = ConfigFile::load(config, &[ModelOpts::KEYS, SweepOpts::KEYS, PgdOpts::KEYS, OutOpts::KEYS])?;
    let model = model.over(cfg.group()?);
    let sweep = sweep.over(cfg.group()?);
    let pgd = pgd.over(cfg.group()?);
    let out = out.over(cfg.group()?);
    let base = match spec_path {
        Some(p) => ExperimentSpec::from_toml(&fs::read_to_string(p).map_err(|e| io_err(p, e))?)?,
        None => ExperimentSpec::default(),
    };
    let spec = experiment_spec(base, &model, &sweep, &pgd)?;
    let jobs = sweep.jobs.unwrap_or(1).max(1);
    eprintln!(
        "sweeping {} over {:?} for the {} model, {} replicates, {} job(s)",
        spec.sweep_var, spec.grid, spec.model, spec.replicates, jobs
    );
    let result = run_experiment(&spec, jobs)?;

    let (dir, name) = out_paths(&out, Path::new("."), "sweep");
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let csv_path = dir.join(format!("{name}.csv"));
    let manifest_path = dir.join(format!("{name}.manifest.toml"));
    let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    result.write_csv(std::io::BufWriter::new(file))?;
    fs::write(&manifest_path, spec.to_toml()?).map_err(|e| io_err(&manifest_path, e))?;
    let diverged: usize = result.rows.iter().map(|r| r.diverged_count).sum();
    if diverged > 0 {
        eprintln!("warning: {diverged} fit(s) diverged; see the diverged_count column");
    }
    println!("{}", csv_path.display());
    println!("{}", manifest_path.display());
    Ok(())
}

pub fn inspect(path: &Path, top: Option<usize>) -> Result<(), CliError> {
    let x = load_tensor(path)?;
    let [p1, p2, p3] = x.dims();
    let v = x.as_slice();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!("dims={p1}x{p2}x{p3}");
    println!("entries={}", v.len());
    println!("finite={}", x.is_finite());
    println!("frob_norm={:e}", x.frob_norm());
    println!("min={min:e}");
    println!("max={max:e}");
    println!("mean={mean:e}");
    if x.is_finite() && !x.is_empty() {
        let top = top.unwrap_or(5);
        for mode in 1..=3 {
            let sv = singular_values(&x.matricize(mode)?)?;
            let shown: Vec<String> = sv.iter().take(top).map(|s| format!("{s:e}")).collect();
            println!("mode{mode}_singular_values={}", shown.join(","));
        }
    }
    Ok(())
}
