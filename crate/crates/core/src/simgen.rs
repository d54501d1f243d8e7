//! Seeded generators for the synthetic experiments.
//!
//! Training and test draws come from two independent ChaCha streams of the
//! same seed, so a spec fully determines both datasets.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PliableError, Result};
use crate::model::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimName {
    /// `y = 3x1 + 2x2 + 3x2 I(z=0) + x3 + 3x3 I(z=1) + 0.3 eps`
    Example1,
    /// `mu = x1 b1 + x2 b2 + x3 (b3 + 2 z1) + x4 b4 (1 - 2 z2)`, `b = (2,-2,2,2,0,...)`
    SimMain,
    /// `y = x1 + x1 w + x2 + 2 x3 + 2 eps`
    HteA,
    /// `y = x1 (w - 0.5) + x2 + 2 x3 + 2 eps`
    HteB,
    /// `y = x1 + I(x1 > 0) w + x2 + 2 x3 + 2 eps`
    HteC,
    /// Two-regime linear model with a latent logistic class.
    UnknownZ,
    DfNull,
    DfNonnull,
}

impl SimName {
    pub const ALL: [SimName; 8] = [
        SimName::Example1,
        SimName::SimMain,
        SimName::HteA,
        SimName::HteB,
        SimName::HteC,
        SimName::UnknownZ,
        SimName::DfNull,
        SimName::DfNonnull,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SimName::Example1 => "example1",
            SimName::SimMain => "sim_main",
            SimName::HteA => "hte_a",
            SimName::HteB => "hte_b",
            SimName::HteC => "hte_c",
            SimName::UnknownZ => "unknown_z",
            SimName::DfNull => "df_null",
            SimName::DfNonnull => "df_nonnull",
        }
    }
}

impl fmt::Display for SimName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimName {
    type Err = PliableError;

    fn from_str(s: &str) -> Result<Self> {
        SimName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| PliableError::Unknown {
                what: "simulation spec",
                name: s.to_string(),
            })
    }
}

/// Variants of the main simulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimVariant {
    /// Use `I(x_j > 0)` in place of `x_j` inside the mean function.
    pub indicator_x: bool,
    /// Add `3 z1 + 3 z2` to the mean.
    pub z_main_effects: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub name: SimName,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub seed: u64,
    pub noise_sd: f64,
    pub n_test: usize,
    pub variant: SimVariant,
}

pub const DEFAULT_N_TEST: usize = 1000;

impl SimSpec {
    /// Spec with the published dimensions and noise level.
    pub fn new(name: SimName, seed: u64) -> Self {
        let (n, p, k, noise_sd) = match name {
            SimName::Example1 => (100, 20, 1, 0.3),
            SimName::SimMain => (100, 50, 4, 0.5),
            SimName::HteA | SimName::HteB | SimName::HteC => (100, 50, 1, 2.0),
            SimName::UnknownZ => (200, 12, 1, 0.25),
            SimName::DfNull | SimName::DfNonnull => (100, 10, 4, 1.0),
        };
        Self {
            name,
            n,
            p,
            k,
            seed,
            noise_sd,
            n_test: DEFAULT_N_TEST,
            variant: SimVariant::default(),
        }
    }

    pub fn with_dims(mut self, n: usize, p: usize) -> Self {
        self.n = n;
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, value: usize, reason: &'static str| {
            Err(PliableError::InvalidParameter {
                name,
                value: value as f64,
                reason,
            })
        };
        if self.n < 2 {
            return bad("n", self.n, "need at least two observations");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(PliableError::InvalidParameter {
                name: "noise_sd",
                value: self.noise_sd,
                reason: "must be finite and non-negative",
            });
        }
        match self.name {
            SimName::Example1 | SimName::HteA | SimName::HteB | SimName::HteC => {
                if self.p < 3 {
                    return bad("p", self.p, "this spec uses x1..x3");
                }
                if self.k != 1 {
                    return bad("k", self.k, "this spec has a single modifier");
                }
            }
            SimName::SimMain | SimName::DfNonnull => {
                if self.p < 4 {
                    return bad("p", self.p, "this spec uses x1..x4");
                }
                if self.k < 2 {
                    return bad("k", self.k, "this spec uses z1 and z2");
                }
            }
            SimName::UnknownZ => {
                if self.p < 8 {
                    return bad("p", self.p, "needs four signal and four class predictors");
                }
                if self.k != 1 {
                    return bad("k", self.k, "the latent modifier is a single column");
                }
            }
            SimName::DfNull => {}
        }
        Ok(())
    }

    /// Class direction `b_z = (0, ..., 0, 10, 10, -10, 10)` for `unknown_z`.
    pub fn class_direction(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.p);
        let tail = [10.0, 10.0, -10.0, 10.0];
        for (i, v) in tail.iter().enumerate() {
            b[self.p - 4 + i] = *v;
        }
        b
    }
}

/// Ground truth accompanying a draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub data: Dataset,
    /// `E[y | x, z]`
    pub mean: DVector<f64>,
    /// True treatment effect `tau(x)` for the treatment-effect specs.
    pub effect: Option<DVector<f64>>,
    /// Latent class labels for `unknown_z`.
    pub latent: Option<DVector<f64>>,
    /// `Pr(z = 1 | x)` for `unknown_z`.
    pub class_prob: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub spec: SimSpec,
    pub train: Split,
    pub test: Split,
    pub class_direction: Option<DVector<f64>>,
}

impl SimData {
    pub fn snr(&self) -> f64 {
        let m = &self.train.mean;
        let mean = m.mean();
        let var = m.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m.len() as f64;
        var / (self.spec.noise_sd * self.spec.noise_sd)
    }
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    // Row-major draw order keeps each observation's predictors contiguous in the stream.
    let mut m = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

fn draw(spec: &SimSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Split> {
    let p = spec.p;
    let x = normal_matrix(rng, n, p);
    let ind = |v: f64| if v > 0.0 { 1.0 } else { 0.0 };
    let mut effect = None;
    let mut latent = None;
    let mut class_prob = None;

    let (z, mean) = match spec.name {
        SimName::Example1 => {
            let z = DMatrix::from_fn(n, 1, |_, _| bernoulli(rng, 0.5));
            let mean = DVector::from_fn(n, |i, _| {
                let zi = z[(i, 0)];
                let (x1, x2, x3) = (x[(i, 0)], x[(i, 1)], x[(i, 2)]);
                3.0 * x1 + 2.0 * x2 + 3.0 * x2 * (1.0 - zi) + x3 + 3.0 * x3 * zi
            });
            (z, mean)
        }
        SimName::SimMain | SimName::DfNonnull => {
            let k = spec.k;
            let z = DMatrix::from_fn(n, k, |_, _| bernoulli(rng, 0.5));
            let v = spec.variant;
            let mean = DVector::from_fn(n, |i, _| {
                let f = |j: usize| {
                    if v.indicator_x {
                        ind(x[(i, j)])
                    } else {
                        x[(i, j)]
                    }
                };
                let (z1, z2) = (z[(i, 0)], z[(i, 1)]);
                let mut mu = 2.0 * f(0) - 2.0 * f(1)
                    + f(2) * (2.0 + 2.0 * z1)
                    + f(3) * 2.0 * (1.0 - 2.0 * z2);
                if v.z_main_effects {
                    mu += 3.0 * z1 + 3.0 * z2;
                }
                mu
            });
            (z, mean)
        }
        SimName::HteA | SimName::HteB | SimName::HteC => {
            let z = DMatrix::from_fn(n, 1, |_, _| bernoulli(rng, 0.5));
            let tau = DVector::from_fn(n, |i, _| match spec.name {
                SimName::HteC => ind(x[(i, 0)]),
                _ => x[(i, 0)],
            });
            let mean = DVector::from_fn(n, |i, _| {
                let (x1, x2, x3, w) = (x[(i, 0)], x[(i, 1)], x[(i, 2)], z[(i, 0)]);
                let base = x2 + 2.0 * x3;
                match spec.name {
                    SimName::HteA => base + x1 + x1 * w,
                    SimName::HteB => base + x1 * (w - 0.5),
                    _ => base + x1 + ind(x1) * w,
                }
            });
            effect = Some(tau);
            (z, mean)
        }
        SimName::UnknownZ => {
            let b = spec.class_direction();
            let score = &x * &b;
            // Pr(z = 0 | x) = 1 / (1 + exp(-x^T b))
            let prob_one = score.map(|s| 1.0 - 1.0 / (1.0 + (-s).exp()));
            let z = DMatrix::from_fn(n, 1, |i, _| bernoulli(rng, prob_one[i]));
            let mean = DVector::from_fn(n, |i, _| {
                let sign = if z[(i, 0)] == 0.0 { 1.0 } else { -1.0 };
                2.0 * sign * (x[(i, 0)] + x[(i, 1)] + x[(i, 2)] + x[(i, 3)])
            });
            latent = Some(z.column(0).into_owned());
            class_prob = Some(prob_one);
            (z, mean)
        }
        SimName::DfNull => {
            let z = DMatrix::from_fn(n, spec.k, |_, _| bernoulli(rng, 0.5));
            (z, DVector::zeros(n))
        }
    };
    let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &mean + noise * spec.noise_sd;
    Ok(Split {
        data: Dataset::new(y, x, z)?,
        mean,
        effect,
        latent,
        class_prob,
    })
}

/// Draw training and test sets for `spec`.
pub fn generate(spec: &SimSpec) -> Result<SimData> {
    spec.validate()?;
    let mut train_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    train_rng.set_stream(0);
    let mut test_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    test_rng.set_stream(1);
    let train = draw(spec, spec.n, &mut train_rng)?;
    let test = draw(spec, spec.n_test.max(1), &mut test_rng)?;
    Ok(SimData {
        spec: *spec,
        train,
        test,
        class_direction: (spec.name == SimName::UnknownZ).then(|| spec.class_direction()),
    })
}
