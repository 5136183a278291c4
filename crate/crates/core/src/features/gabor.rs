use crate::error::{Error, Result};

/// Filter-bank parameters. Defaults are the classic HMAX S1 settings:
/// four receptive-field scales with matching widths and wavelengths, four
/// orientations and aspect ratio 0.3.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborParams {
    /// Receptive-field half-widths; a scale `s` gives a (2s+1)² kernel.
    pub scales: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub orientations_deg: Vec<f64>,
    pub gamma: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        Self {
            scales: vec![3, 5, 7, 9],
            sigmas: vec![1.2, 2.0, 2.8, 3.6],
            lambdas: vec![1.5, 2.5, 3.5, 4.6],
            orientations_deg: vec![0.0, 45.0, 90.0, 135.0],
            gamma: 0.3,
        }
    }
}

impl GaborParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.scales.len();
        if n == 0 || self.orientations_deg.is_empty() {
            return Err(Error::Config("gabor bank needs ≥ 1 scale and orientation".into()));
        }
        if self.sigmas.len() != n || self.lambdas.len() != n {
            return Err(Error::Config(format!(
                "gabor.scales has {n} entries but sigmas/lambdas have {}/{}",
                self.sigmas.len(),
                self.lambdas.len()
            )));
        }
        let positive = self.sigmas.iter().chain(&self.lambdas).all(|v| *v > 0.0)
            && self.gamma > 0.0
            && self.scales.iter().all(|s| *s > 0);
        if !positive {
            return Err(Error::Config("gabor σ, λ, γ and scales must be > 0".into()));
        }
        Ok(())
    }
}

/// Gabor coefficient at offset (`dx`, `dy`) for orientation `theta_rad`.
pub fn gabor(dx: f64, dy: f64, sigma: f64, lambda: f64, theta_rad: f64, gamma: f64) -> f64 {
    let (sin, cos) = theta_rad.sin_cos();
    let x = dx * cos + dy * sin;
    let y = -dx * sin + dy * cos;
    (-(x * x + gamma * gamma * y * y) / (2.0 * sigma * sigma)).exp()
        * (std::f64::consts::TAU * x / lambda).cos()
}

/// A (2r+1)×(2r+1) kernel stored row-major with `dy` outer, `dx` inner.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub radius: usize,
    pub coeffs: Vec<f64>,
}

impl Kernel {
    pub fn new(radius: usize, sigma: f64, lambda: f64, theta_deg: f64, gamma: f64) -> Self {
        let r = radius as i64;
        let theta = theta_deg.to_radians();
        let coeffs = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .map(|(dx, dy)| gabor(dx as f64, dy as f64, sigma, lambda, theta, gamma))
            .collect();
        Self { radius, coeffs }
    }

    #[inline]
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Coefficient at signed offset; both offsets must lie in `[-r, r]`.
    #[inline]
    pub fn at(&self, dx: i64, dy: i64) -> f64 {
        let r = self.radius as i64;
        debug_assert!(dx.abs() <= r && dy.abs() <= r);
        self.coeffs[((dy + r) as usize) * self.side() + (dx + r) as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborBank {
    pub params: GaborParams,
    /// Indexed `[scale][orientation]`.
    pub kernels: Vec<Vec<Kernel>>,
}

impl GaborBank {
    pub fn new(params: GaborParams) -> Result<Self> {
        params.validate()?;
        let kernels = params
            .scales
            .iter()
            .zip(params.sigmas.iter().zip(&params.lambdas))
            .map(|(&s, (&sigma, &lambda))| {
                params
                    .orientations_deg
                    .iter()
                    .map(|&theta| Kernel::new(s, sigma, lambda, theta, params.gamma))
                    .collect()
            })
            .collect();
        Ok(Self { params, kernels })
    }

    pub fn n_scales(&self) -> usize {
        self.params.scales.len()
    }

    pub fn n_orientations(&self) -> usize {
        self.params.orientations_deg.len()
    }

    pub fn kernel(&self, scale: usize, orientation: usize) -> &Kernel {
        &self.kernels[scale][orientation]
    }
}
