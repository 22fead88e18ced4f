//! Datasets on disk: tensors in the portable format plus a TOML sidecar.
//!
//! The sidecar names the model, its scalars and the tensor files, with
//! paths relative to the sidecar's directory:
//!
//! ```toml
//! model = "poisson"
//! dims = [20, 20, 20]
//! ranks = [3, 3, 3]
//! intensity = 1.0
//! observations = "run.obs.t3"
//! truth = "run.truth.t3"
//!
//! [generator]   # optional; replays the draw
//! model = "poisson"
//! dims = [20, 20, 20]
//! ranks = [3, 3, 3]
//! seed = 7
//! big_b = 2.0
//! intensity = 1.0
//! ```
//!
//! Regression designs are stored as one `p1 x p2 x (p3 n)` tensor whose
//! `i`-th block of `p3` frontal slices is `A_i`; responses are an
//! `n x 1 x 1` tensor. A binomial population is either a scalar
//! `population` or a tensor file `population_tensor`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::io::{load_tensor, save_tensor};
use crate::models::{ModelKind, ObservationModel};
use crate::simgen::InstanceSpec;
use crate::tensor::{Dims, Tensor3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub model: ModelKind,
    pub dims: Dims,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Dims>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_tensor: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub designs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responses: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<InstanceSpec>,
}

/// A loaded dataset.
pub struct Dataset {
    pub sidecar: Sidecar,
    pub model: ObservationModel,
    pub truth: Option<Tensor3>,
}

fn file_name(stem: &str, part: &str) -> PathBuf {
    PathBuf::from(format!("{stem}.{part}.t3"))
}

/// Writes the tensors of `model` (and `truth`, if given) next to a sidecar
/// `<dir>/<stem>.toml`. Returns the written paths, sidecar last.
pub fn write_dataset(
    dir: &Path,
    stem: &str,
    model: &ObservationModel,
    ranks: Option<Dims>,
    truth: Option<&Tensor3>,
    generator: Option<&InstanceSpec>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut save = |name: PathBuf, x: &Tensor3| -> Result<PathBuf> {
        let path = dir.join(&name);
        save_tensor(&path, x)?;
        written.push(path);
        Ok(name)
    };
    let mut sidecar = Sidecar {
        model: model.kind(),
        dims: model.dims(),
        ranks,
        intensity: model.intensity(),
        population: None,
        observations: None,
        population_tensor: None,
        designs: None,
        responses: None,
        truth: None,
        generator: generator.cloned(),
    };
    if let Some(x) = truth {
        sidecar.truth = Some(save(file_name(stem, "truth"), x)?);
    }
    match model.kind() {
        ModelKind::TensorRegression => {
            let [p1, p2, p3] = model.dims();
            let responses = model.responses().expect("regression data");
            let n = responses.len();
            let designs = Tensor3::from_vec([p1, p2, p3 * n], model.designs_flat().expect("regression data").to_vec())?;
            sidecar.designs = Some(save(file_name(stem, "designs"), &designs)?);
            let y = Tensor3::from_vec([n, 1, 1], responses.to_vec())?;
            sidecar.responses = Some(save(file_name(stem, "responses"), &y)?);
        }
        _ => {
            let y = model.observations().expect("tensor observations");
            sidecar.observations = Some(save(file_name(stem, "obs"), y)?);
        }
    }
    if let Some(n_pop) = model.population() {
        let first = n_pop.as_slice()[0];
        let constant = n_pop.as_slice().iter().all(|&v| v == first);
        if constant && first >= 0.0 && first.fract() == 0.0 {
            sidecar.population = Some(first as u64);
        } else {
            sidecar.population_tensor = Some(save(file_name(stem, "population"), n_pop)?);
        }
    }
    let text = toml::to_string(&sidecar).map_err(|e| Error::Format(format!("cannot serialize sidecar: {e}")))?;
    let path = dir.join(format!("{stem}.toml"));
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}

fn need<'a, T>(v: &'a Option<T>, key: &str, model: ModelKind) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Format(format!("sidecar for the {model} model is missing `{key}`")))
}

fn load_dims(path: &Path, dims: Dims) -> Result<Tensor3> {
    let x = load_tensor(path)?;
    ensure!(
        x.dims() == dims,
        DimensionMismatch,
        "{} has dims {:?}, sidecar says {dims:?}",
        path.display(),
        x.dims()
    );
    Ok(x)
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Loads the sidecar at `path` and the tensors it names.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let sidecar = read_sidecar(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let kind = sidecar.model;
    let dims = sidecar.dims;
    let model = match kind {
        ModelKind::SubGaussianPca => {
            ObservationModel::sub_gaussian(load_dims(&base.join(need(&sidecar.observations, "observations", kind)?), dims)?)?
        }
        ModelKind::PoissonPca => {
            let y = load_dims(&base.join(need(&sidecar.observations, "observations", kind)?), dims)?;
            ObservationModel::poisson(y, *need(&sidecar.intensity, "intensity", kind)?)?
        }
        ModelKind::BinomialPca => {
            let y = load_dims(&base.join(need(&sidecar.observations, "observations", kind)?), dims)?;
            let n_pop = match (&sidecar.population, &sidecar.population_tensor) {
                (Some(n), None) => Tensor3::filled(dims, *n as f64),
                (None, Some(p)) => load_dims(&base.join(p), dims)?,
                _ => {
                    return Err(Error::Format(
                        "binomial sidecar needs exactly one of `population` and `population_tensor`".into(),
                    ))
                }
            };
            ObservationModel::binomial(y, n_pop)?
        }
        ModelKind::TensorRegression => {
            let designs = load_tensor(base.join(need(&sidecar.designs, "designs", kind)?))?;
            let responses = load_tensor(base.join(need(&sidecar.responses, "responses", kind)?))?;
            let [rn, r2, r3] = responses.dims();
            ensure!(r2 == 1 && r3 == 1, DimensionMismatch, "responses must be n x 1 x 1, got {:?}", responses.dims());
            let [d1, d2, d3] = designs.dims();
            ensure!(
                d1 == dims[0] && d2 == dims[1] && d3 == dims[2] * rn,
                DimensionMismatch,
                "designs have dims {:?}, expected {:?} for n = {rn}",
                designs.dims(),
                [dims[0], dims[1], dims[2] * rn]
            );
            ObservationModel::regression_flat(dims, designs.into_vec(), responses.into_vec())?
        }
    };
    let truth = match &sidecar.truth {
        Some(p) => Some(load_dims(&base.join(p), dims)?),
        None => None,
    };
    Ok(Dataset { sidecar, model, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(model: ModelKind) -> InstanceSpec {
        InstanceSpec {
            model,
            dims: [5, 4, 3],
            ranks: [2, 2, 2],
            seed: 9,
            lambda: Some(2.0),
            big_b: Some(1.5),
            sigma: Some(0.5),
            sd_range: None,
            n: Some(7),
            intensity: Some(2.0),
            population: Some(12),
        }
    }

    #[test]
    fn every_model_round_trips() {
        let dir = std::env::temp_dir().join(format!("tucker-gd-dataset-{}", std::process::id()));
        for model in ModelKind::ALL {
            let g = spec(model);
            let inst = g.generate().unwrap();
            let x = inst.truth.reconstruct();
            let paths = write_dataset(&dir, model.name(), &inst.model, Some(g.ranks), Some(&x), Some(&g)).unwrap();
            let back = read_dataset(paths.last().unwrap()).unwrap();
            assert_eq!(back.sidecar.generator.as_ref(), Some(&g));
            assert_eq!(back.sidecar.ranks, Some([2, 2, 2]));
            assert_eq!(back.truth.unwrap(), x);
            assert_eq!(back.model.kind(), model);
            let probe = Tensor3::from_fn(g.dims, |i, j, k| 0.1 * (i as f64) - 0.05 * (j + k) as f64);
            assert_eq!(back.model.loss(&probe).unwrap().to_bits(), inst.model.loss(&probe).unwrap().to_bits());
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn regression_designs_are_stacked_frontal_blocks() {
        let g = spec(ModelKind::TensorRegression);
        let inst = g.generate().unwrap();
        let dir = std::env::temp_dir().join(format!("tucker-gd-designs-{}", std::process::id()));
        write_dataset(&dir, "reg", &inst.model, None, None, None).unwrap();
        let stacked = load_tensor(dir.join("reg.designs.t3")).unwrap();
        assert_eq!(stacked.dims(), [5, 4, 21]);
        let second: Vec<f64> = inst.model.designs().nth(1).unwrap().to_vec();
        let a1 = Tensor3::from_vec([5, 4, 3], second).unwrap();
        assert_eq!(stacked.get(4, 3, 3 + 2), a1.get(4, 3, 2));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn malformed_sidecars_are_rejected() {
        let dir = std::env::temp_dir().join(format!("tucker-gd-bad-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        fs::write(&path, "model = \"poisson\"\ndims = [2, 2, 2]\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
        fs::write(&path, "model = \"poisson\"\ndims = [2, 2, 2]\nbogus = 1\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
        save_tensor(dir.join("y.t3"), &Tensor3::zeros([2, 2, 3])).unwrap();
        fs::write(&path, "model = \"poisson\"\ndims = [2, 2, 2]\nintensity = 1.0\nobservations = \"y.t3\"\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::DimensionMismatch(_))));
        assert!(matches!(read_dataset(&dir.join("missing.toml")), Err(Error::Io(_))));
        fs::remove_dir_all(&dir).unwrap();
    }
}
