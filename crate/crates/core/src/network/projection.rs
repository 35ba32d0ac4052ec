//! Intensity-to-phase encoders.
//!
//! NRP multiplies the image by a fixed random matrix and normalizes each
//! projected feature with running moments so that ~99% of values land in
//! `[-1, 1]`; outliers are clipped. RPP flips the sign of a random subset of
//! pixels and needs no normalization.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};

/// Two-sided 99% quantile of the standard normal.
pub const NRP_QUANTILE: f64 = 2.576;
pub const STD_FLOOR: f64 = 1e-6;
pub const DEFAULT_MOMENTUM: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectionKind {
    /// Intensities are used as phases directly.
    None,
    Nrp,
    Rpp,
}

impl ProjectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionKind::None => "none",
            ProjectionKind::Nrp => "nrp",
            ProjectionKind::Rpp => "rpp",
        }
    }
}

impl std::str::FromStr for ProjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ProjectionKind::None),
            "nrp" => Ok(ProjectionKind::Nrp),
            "rpp" => Ok(ProjectionKind::Rpp),
            other => Err(Error::InvalidConfig(format!("unknown projection `{other}`"))),
        }
    }
}

/// Per-feature running mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Moments {
    pub fn identity(n: usize) -> Self {
        Moments { mean: vec![0.0; n], std: vec![1.0; n] }
    }

    /// Population statistics of a `batch × features` matrix, std floored.
    pub fn of_batch(batch: ArrayView2<f64>) -> Result<Self> {
        if batch.nrows() == 0 {
            return Err(Error::Empty("moment batch"));
        }
        let mean: Array1<f64> = batch.mean_axis(Axis(0)).expect("nonempty");
        let std = batch.var_axis(Axis(0), 0.0).mapv(|v| v.sqrt().max(STD_FLOOR));
        Ok(Moments { mean: mean.to_vec(), std: std.to_vec() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSpec {
    pub kind: ProjectionKind,
    pub seed: u64,
    pub dimension: usize,
    /// Fraction of non-zero NRP matrix entries.
    pub density: f64,
    /// `dimension × dimension`, NRP only.
    pub matrix: Option<Array2<f64>>,
    /// Entries are ±1, RPP only.
    pub mask: Option<Vec<f64>>,
    /// NRP only; starts at `(0, 1)`.
    pub moments: Moments,
    pub momentum: f64,
}

impl ProjectionSpec {
    pub fn generate(kind: ProjectionKind, dimension: usize, seed: u64, density: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArchitecture("projection dimension is zero".into()));
        }
        if !(density > 0.0 && density <= 1.0) {
            return Err(Error::InvalidArchitecture(format!("NRP density {density} outside (0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // keep the projection stream independent of weight initialization
        rng.set_stream(1);
        let (matrix, mask) = match kind {
            ProjectionKind::None => (None, None),
            ProjectionKind::Nrp => {
                let m = Array2::from_shape_simple_fn((dimension, dimension), || {
                    let v = rng.random_range(-1.0..=1.0);
                    if density < 1.0 && rng.random::<f64>() >= density {
                        0.0
                    } else {
                        v
                    }
                });
                (Some(m), None)
            }
            ProjectionKind::Rpp => {
                let mask = (0..dimension).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
                (None, Some(mask))
            }
        };
        Ok(ProjectionSpec {
            kind,
            seed,
            dimension,
            density,
            matrix,
            mask,
            moments: Moments::identity(dimension),
            momentum: DEFAULT_MOMENTUM,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        match self.kind {
            ProjectionKind::Nrp => {
                let m = self.matrix.as_ref().ok_or_else(|| Error::malformed("projection.matrix", "missing"))?;
                if m.dim() != (n, n) {
                    return Err(Error::malformed("projection.matrix", format!("shape {:?} for dimension {n}", m.dim())));
                }
                if self.moments.mean.len() != n || self.moments.std.len() != n {
                    return Err(Error::malformed("projection.moments", "length differs from dimension"));
                }
                if self.moments.std.iter().any(|&s| !(s > 0.0)) {
                    return Err(Error::malformed("projection.moments.std", "entries must be > 0"));
                }
            }
            ProjectionKind::Rpp => {
                let mask = self.mask.as_ref().ok_or_else(|| Error::malformed("projection.mask", "missing"))?;
                if mask.len() != n {
                    return Err(Error::malformed("projection.mask", "length differs from dimension"));
                }
                if mask.iter().any(|&v| v != 1.0 && v != -1.0) {
                    return Err(Error::malformed("projection.mask", "entries must be +1 or -1"));
                }
            }
            ProjectionKind::None => {}
        }
        Ok(())
    }
}

/// Exponential moving update of running moments toward the batch statistics.
pub fn fit_norm_moments(batch: ArrayView2<f64>, moments: &Moments, momentum: f64) -> Result<Moments> {
    let stats = Moments::of_batch(batch)?;
    check_len(moments.mean.len(), stats.mean.len())?;
    let blend = |run: &[f64], cur: &[f64]| -> Vec<f64> {
        run.iter().zip(cur).map(|(&r, &c)| momentum * r + (1.0 - momentum) * c).collect()
    };
    Ok(Moments { mean: blend(&moments.mean, &stats.mean), std: blend(&moments.std, &stats.std) })
}

fn normalize_in_place(p: &mut Array2<f64>, moments: &Moments) {
    for mut row in p.rows_mut() {
        for ((v, &m), &s) in row.iter_mut().zip(&moments.mean).zip(&moments.std) {
            *v = ((*v - m) / (NRP_QUANTILE * s)).clamp(-1.0, 1.0);
        }
    }
}

/// Projects a `batch × pixels` matrix of intensities to phases using the
/// frozen running moments.
pub fn project_batch(spec: &ProjectionSpec, images: ArrayView2<f64>) -> Result<Array2<f64>> {
    project_with(spec, images, |p| {
        normalize_in_place(p, &spec.moments);
        Ok(())
    })
}

/// Training-mode projection: the batch is normalized by its own statistics
/// while the running moments absorb them.
pub fn project_batch_train(spec: &mut ProjectionSpec, images: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut update = None;
    let out = project_with(spec, images, |p| {
        let stats = Moments::of_batch(p.view())?;
        update = Some(fit_norm_moments(p.view(), &spec.moments, spec.momentum)?);
        normalize_in_place(p, &stats);
        Ok(())
    })?;
    if let Some(m) = update {
        spec.moments = m;
    }
    Ok(out)
}

fn project_with(
    spec: &ProjectionSpec,
    images: ArrayView2<f64>,
    normalize: impl FnOnce(&mut Array2<f64>) -> Result<()>,
) -> Result<Array2<f64>> {
    check_len(spec.dimension, images.ncols())?;
    match spec.kind {
        ProjectionKind::None => Ok(images.to_owned()),
        ProjectionKind::Rpp => {
            let mask = spec.mask.as_ref().ok_or_else(|| Error::malformed("projection.mask", "missing"))?;
            let mut out = images.to_owned();
            for mut row in out.rows_mut() {
                row.iter_mut().zip(mask).for_each(|(v, &m)| *v *= m);
            }
            Ok(out)
        }
        ProjectionKind::Nrp => {
            let matrix = spec.matrix.as_ref().ok_or_else(|| Error::malformed("projection.matrix", "missing"))?;
            let mut p = images.dot(&matrix.t());
            normalize(&mut p)?;
            Ok(p)
        }
    }
}

/// Single-image NRP encoding with the frozen running moments.
pub fn nrp_project(img: &[f64], spec: &ProjectionSpec) -> Result<Vec<f64>> {
    if spec.kind != ProjectionKind::Nrp {
        return Err(Error::InvalidConfig("nrp_project called on a non-NRP projection".into()));
    }
    check_len(spec.dimension, img.len())?;
    let matrix = spec.matrix.as_ref().ok_or_else(|| Error::malformed("projection.matrix", "missing"))?;
    let mut p = Array2::from_shape_vec((1, img.len()), matrix.dot(&Array1::from(img.to_vec())).to_vec())
        .expect("shape");
    normalize_in_place(&mut p, &spec.moments);
    Ok(p.into_raw_vec_and_offset().0)
}

pub fn rpp_project(img: &[f64], spec: &ProjectionSpec) -> Result<Vec<f64>> {
    if spec.kind != ProjectionKind::Rpp {
        return Err(Error::InvalidConfig("rpp_project called on a non-RPP projection".into()));
    }
    check_len(spec.dimension, img.len())?;
    let mask = spec.mask.as_ref().ok_or_else(|| Error::malformed("projection.mask", "missing"))?;
    Ok(img.iter().zip(mask).map(|(&v, &m)| v * m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn rpp_flips_signs() {
        let mut spec = ProjectionSpec::generate(ProjectionKind::Rpp, 3, 0, 1.0).unwrap();
        spec.mask = Some(vec![1.0, -1.0, 1.0]);
        assert_eq!(rpp_project(&[0.2, 0.8, 0.0], &spec).unwrap(), vec![0.2, -0.8, 0.0]);
        spec.mask = Some(vec![1.0; 3]);
        assert_eq!(rpp_project(&[0.2, 0.8, 0.5], &spec).unwrap(), vec![0.2, 0.8, 0.5]);
        assert_eq!(rpp_project(&[0.0; 3], &spec).unwrap(), vec![0.0; 3]);
        assert!(rpp_project(&[0.0; 2], &spec).is_err());
    }

    #[test]
    fn nrp_zero_image_and_clipping() {
        let spec = ProjectionSpec::generate(ProjectionKind::Nrp, 16, 4, 1.0).unwrap();
        assert!(nrp_project(&[0.0; 16], &spec).unwrap().iter().all(|&v| v == 0.0));
        let out = nrp_project(&[1.0; 16], &spec).unwrap();
        assert!(out.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(nrp_project(&[0.0; 15], &spec).is_err());
    }

    #[test]
    fn nrp_regression_fixture() {
        // frozen from the first verified run; guards the seeded generator
        let spec = ProjectionSpec::generate(ProjectionKind::Nrp, 4, 11, 1.0).unwrap();
        let out = nrp_project(&[0.1, 0.2, 0.3, 0.4], &spec).unwrap();
        let frozen = NRP_FIXTURE;
        for (a, b) in out.iter().zip(frozen) {
            assert!((a - b).abs() < 1e-12, "{out:?}");
        }
    }

    const NRP_FIXTURE: [f64; 4] =
        [0.07708139346546075, 0.14503762366328807, 0.08096396441947534, 0.044800105045332016];

    #[test]
    fn momentum_zero_takes_batch_stats() {
        let batch = array![[1.0, 5.0], [3.0, 5.0]];
        let m = fit_norm_moments(batch.view(), &Moments::identity(2), 0.0).unwrap();
        assert_eq!(m.mean, vec![2.0, 5.0]);
        assert_eq!(m.std, vec![1.0, STD_FLOOR]);
    }

    #[test]
    fn running_moments_converge_on_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = Moments { mean: vec![3.0; 4], std: vec![0.2; 4] };
        for _ in 0..500 {
            let batch = Array2::from_shape_simple_fn((128, 4), || StandardNormal.sample(&mut rng));
            m = fit_norm_moments(batch.view(), &m, DEFAULT_MOMENTUM).unwrap();
        }
        assert!(m.mean.iter().all(|v| v.abs() < 0.05), "{m:?}");
        assert!(m.std.iter().all(|v| (v - 1.0).abs() < 0.05), "{m:?}");
    }

    #[test]
    fn batch_normalization_updates_running_moments() {
        let mut spec = ProjectionSpec::generate(ProjectionKind::Nrp, 8, 2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let imgs = Array2::from_shape_simple_fn((32, 8), || rng.random::<f64>());
        let before = spec.moments.clone();
        let out = project_batch_train(&mut spec, imgs.view()).unwrap();
        assert_ne!(before, spec.moments);
        assert!(out.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn sparse_density_zeroes_entries() {
        let spec = ProjectionSpec::generate(ProjectionKind::Nrp, 50, 1, 0.1).unwrap();
        let m = spec.matrix.unwrap();
        let nz = m.iter().filter(|&&v| v != 0.0).count() as f64 / m.len() as f64;
        assert!((nz - 0.1).abs() < 0.03, "{nz}");
    }
}
