//! Benchmark functions with their standard initial distributions.

use std::f64::consts::{E, PI};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::cma::BoxBounds;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Sphere,
    Ellipsoid,
    Rosenbrock,
    Ackley,
    Schaffer,
    Rastrigin,
    Bohachevsky,
    Griewank,
}

impl Function {
    pub const ALL: [Function; 8] = [
        Function::Sphere,
        Function::Ellipsoid,
        Function::Rosenbrock,
        Function::Ackley,
        Function::Schaffer,
        Function::Rastrigin,
        Function::Bohachevsky,
        Function::Griewank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Sphere => "sphere",
            Function::Ellipsoid => "ellipsoid",
            Function::Rosenbrock => "rosenbrock",
            Function::Ackley => "ackley",
            Function::Schaffer => "schaffer",
            Function::Rastrigin => "rastrigin",
            Function::Bohachevsky => "bohachevsky",
            Function::Griewank => "griewank",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown objective '{name}'")))
    }

    /// Functions built from consecutive coordinate pairs need `d ≥ 2`.
    pub fn min_dim(self) -> usize {
        match self {
            Function::Rosenbrock | Function::Schaffer | Function::Bohachevsky => 2,
            _ => 1,
        }
    }

    pub fn is_multimodal(self) -> bool {
        !matches!(self, Function::Sphere | Function::Ellipsoid | Function::Rosenbrock)
    }

    pub fn value(self, x: &[f64]) -> f64 {
        let d = x.len();
        match self {
            Function::Sphere => x.iter().map(|v| v * v).sum(),
            Function::Ellipsoid => {
                if d == 1 {
                    return x[0] * x[0];
                }
                x.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let s = 1000f64.powf(i as f64 / (d - 1) as f64) * v;
                        s * s
                    })
                    .sum()
            }
            Function::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
                .sum(),
            Function::Ackley => {
                let n = d as f64;
                let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
                let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
                20.0 - 20.0 * (-0.2 * sq.sqrt()).exp() + E - cs.exp()
            }
            Function::Schaffer => x
                .windows(2)
                .map(|w| {
                    let s = w[0] * w[0] + w[1] * w[1];
                    s.powf(0.25) * ((50.0 * s.powf(0.1)).sin().powi(2) + 1.0)
                })
                .sum(),
            Function::Rastrigin => 10.0 * d as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>(),
            Function::Bohachevsky => x
                .windows(2)
                .map(|w| {
                    w[0] * w[0] + 2.0 * w[1] * w[1] - 0.3 * (3.0 * PI * w[0]).cos() - 0.4 * (4.0 * PI * w[1]).cos()
                        + 0.7
                })
                .sum(),
            Function::Griewank => {
                let s: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let p: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                    .product();
                s - p + 1.0
            }
        }
    }

    pub fn optimum(self, d: usize) -> Vec<f64> {
        match self {
            Function::Rosenbrock => vec![1.0; d],
            _ => vec![0.0; d],
        }
    }

    pub fn init_spec(self, d: usize) -> InitSpec {
        let (m, s) = match self {
            Function::Sphere | Function::Ellipsoid | Function::Rastrigin => (3.0, 2.0),
            Function::Rosenbrock => (0.0, 0.1),
            Function::Ackley => (15.5, 14.5),
            Function::Schaffer => (55.0, 45.0),
            Function::Bohachevsky => (8.0, 7.0),
            Function::Griewank => (305.0, 295.0),
        };
        InitSpec {
            m0: vec![m; d],
            sigma0: s,
        }
    }

    /// Search box, when the function is run with one. Only Ackley is; the box
    /// `[1, 30]^d` is exactly the span `m0 ± σ0` of its initialization.
    pub fn bounds(self) -> Option<BoxBounds> {
        match self {
            Function::Ackley => Some(BoxBounds {
                lower: 1.0,
                upper: 30.0,
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub m0: Vec<f64>,
    pub sigma0: f64,
}

pub fn init_spec(name: &str, d: usize) -> Result<InitSpec> {
    Ok(Function::from_name(name)?.init_spec(d))
}

/// A benchmark instance: function, dimension, optional noise and rotation.
#[derive(Debug, Clone)]
pub struct Objective {
    pub function: Function,
    pub dim: usize,
    pub noise_variance: f64,
    pub rotation: Option<DMatrix<f64>>,
    pub bounds: Option<BoxBounds>,
}

impl Objective {
    pub fn new(function: Function, dim: usize, noise_variance: f64) -> Result<Self> {
        if dim < function.min_dim() {
            return Err(Error::InvalidConfig(format!(
                "{function} needs dimension >= {}, got {dim}",
                function.min_dim()
            )));
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be >= 0, got {noise_variance}"
            )));
        }
        Ok(Objective {
            function,
            dim,
            noise_variance,
            rotation: None,
            bounds: function.bounds(),
        })
    }

    pub fn by_name(name: &str, dim: usize, noise_variance: f64) -> Result<Self> {
        Self::new(Function::from_name(name)?, dim, noise_variance)
    }

    /// Evaluates `base(R x)` from now on.
    pub fn with_rotation(mut self, rotation: DMatrix<f64>) -> Result<Self> {
        if rotation.nrows() != self.dim || rotation.ncols() != self.dim {
            return Err(Error::InvalidInput("rotation has the wrong shape".into()));
        }
        self.rotation = Some(rotation);
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        self.function.name()
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "expected a {}-dimensional point, got {}",
                self.dim,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn noiseless_value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        Ok(match &self.rotation {
            Some(r) => self.function.value((r * x).as_slice()),
            None => self.function.value(x.as_slice()),
        })
    }

    /// Noiseless value plus one `N(0, σ_n²)` draw from `noise_rng` when noisy.
    pub fn evaluate<R: Rng + ?Sized>(&self, x: &DVector<f64>, noise_rng: &mut R) -> Result<f64> {
        let base = self.noiseless_value(x)?;
        if self.noise_variance > 0.0 {
            let eps: f64 = noise_rng.sample(StandardNormal);
            Ok(base + self.noise_variance.sqrt() * eps)
        } else {
            Ok(base)
        }
    }

    /// Initial mean in search coordinates: `Rᵀ m0` under a rotation, so the
    /// rotated problem starts from the same base-space point.
    pub fn initial_mean(&self) -> DVector<f64> {
        let m0 = DVector::from_vec(self.function.init_spec(self.dim).m0);
        match &self.rotation {
            Some(r) => r.transpose() * m0,
            None => m0,
        }
    }
}

/// Random orthogonal matrix: QR of a Gaussian matrix with the signs of `R`'s
/// diagonal folded into `Q`.
pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
