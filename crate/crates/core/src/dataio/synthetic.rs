use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};

use super::LabeledSpdDataset;
use crate::divergence::airm_distance_sq;
use crate::error::{Error, Result};
use crate::spd::{random_symmetric, spd_exp, spd_sqrt, SpdMatrix};

/// Wishart-scatter classes around random SPD centers.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub classes: u32,
    pub dim: usize,
    pub per_class: usize,
    /// Degrees of freedom of the scatter; larger is tighter. Must exceed `dim − 1`.
    pub spread: f64,
    pub seed: u64,
}

/// Minimum pairwise geodesic distance between class centers.
pub const CENTER_SEPARATION: f64 = 1.0;

impl SyntheticSpec {
    /// The 3-class, 5×5, 100-per-class benchmark set.
    pub fn benchmark(seed: u64) -> Self {
        SyntheticSpec {
            classes: 3,
            dim: 5,
            per_class: 100,
            spread: 7.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.dim == 0 {
            return Err(Error::InvalidInput("need at least one class and dimension 1".into()));
        }
        if !(self.spread > self.dim as f64 - 1.0) || !self.spread.is_finite() {
            return Err(Error::InvalidInput(format!(
                "spread {} must exceed dim - 1 = {}",
                self.spread,
                self.dim - 1
            )));
        }
        Ok(())
    }
}

/// Class centers with pairwise geodesic distance at least [`CENTER_SEPARATION`],
/// drawn from the start of the seeded stream.
pub fn synthetic_centers(spec: &SyntheticSpec) -> Result<Vec<SpdMatrix>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    draw_centers(spec, &mut rng)
}

fn draw_centers(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<Vec<SpdMatrix>> {
    let mut centers: Vec<SpdMatrix> = Vec::with_capacity(spec.classes as usize);
    let mut scale = 0.5;
    let mut rejected = 0;
    while centers.len() < spec.classes as usize {
        let c = spd_exp(&random_symmetric(rng, spec.dim, scale))?;
        let mut far = true;
        for other in &centers {
            if airm_distance_sq(&c, other)?.sqrt() < CENTER_SEPARATION {
                far = false;
                break;
            }
        }
        if far {
            centers.push(c);
        } else {
            rejected += 1;
            if rejected % 100 == 0 {
                scale *= 1.5;
            }
        }
    }
    Ok(centers)
}

/// Bartlett draw of `W/ν` with `W ~ Wishart(I, ν)`.
fn normalized_wishart(rng: &mut ChaCha8Rng, d: usize, dof: f64) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(dof - i as f64)
            .map_err(|e| Error::InvalidInput(format!("chi-squared with {} dof: {e}", dof - i as f64)))?;
        a[(i, i)] = rng.sample(chi).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(&a * a.transpose() / dof)
}

/// Samples `C^{1/2}·S·C^{1/2}` around each class center `C`, with `S` a
/// normalized Wishart scatter of `spread` degrees of freedom. Samples are
/// grouped by class.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledSpdDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = draw_centers(spec, &mut rng)?;
    let mut samples = Vec::with_capacity(spec.classes as usize * spec.per_class);
    let mut labels = Vec::with_capacity(samples.capacity());
    for (c, center) in centers.iter().enumerate() {
        let root = spd_sqrt(center)?;
        let root = root.as_matrix();
        for _ in 0..spec.per_class {
            let s = normalized_wishart(&mut rng, spec.dim, spec.spread)?;
            samples.push(SpdMatrix::new(crate::spd::sym(&(root * s * root)))?);
            labels.push(c as u32 + 1);
        }
    }
    LabeledSpdDataset::new(samples, labels, spec.classes)
}
