//! Run configuration: a JSON document deserialized with path-aware errors.

use std::fmt;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use plap_core::bvp::BvpProblem;
use plap_core::certifier::{GrowthWitness, SampleBox};
use plap_core::homoclinic::{HomoclinicOptions, HomoclinicProblem};
use plap_core::lattice::Exponent;
use plap_core::nonlinearity::{
    CappedExponential, Polynomial, PowerFamily, SharedNonlinearity, Zero,
};
use plap_core::solvers::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Certify,
    SolveBvp,
    SolveHomoclinic,
    Verify,
    #[serde(rename = "reproduce-example-2")]
    #[value(name = "reproduce-example-2")]
    ReproduceExample2,
    #[serde(rename = "reproduce-example-1")]
    #[value(name = "reproduce-example-1")]
    ReproduceExample1,
}

impl Mode {
    pub fn needs_config(self) -> bool {
        matches!(self, Mode::Certify | Mode::SolveBvp | Mode::SolveHomoclinic)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

/// Built-in nonlinearities; each has a closed-form potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Zero,
    /// `b(k) φ_r(t)` with `b` periodic in `k`.
    Power {
        b: Vec<f64>,
        r: Exponent,
    },
    /// `scale · k² · e^{min(t, cap)}`.
    Example2 {
        #[serde(default = "default_cap")]
        cap: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `Σ_j c_j t^j`.
    Polynomial {
        coefficients: Vec<f64>,
    },
}

fn default_cap() -> f64 {
    14.0
}

fn one() -> f64 {
    1.0
}

impl NonlinearitySpec {
    pub fn build(&self) -> anyhow::Result<SharedNonlinearity> {
        Ok(match self {
            NonlinearitySpec::Zero => Arc::new(Zero),
            NonlinearitySpec::Power { b, r } => Arc::new(PowerFamily::new(b.clone(), *r)?),
            NonlinearitySpec::Example2 { cap, scale } => Arc::new(CappedExponential {
                cap: *cap,
                scale: *scale,
            }),
            NonlinearitySpec::Polynomial { coefficients } => {
                Arc::new(Polynomial::new(coefficients.clone()))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvpSpec {
    #[serde(rename = "T")]
    pub t: usize,
    pub q: Exponent,
    /// Second-order weight of the fourth-order problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// `a_1 .. a_{n-1}` for the order-`n` problem; excludes `a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub nonlinearity: NonlinearitySpec,
}

impl BvpSpec {
    pub fn build(&self, lambda: f64) -> anyhow::Result<BvpProblem> {
        let coefficients = match (&self.a, &self.coefficients) {
            (Some(a), None) => vec![*a],
            (None, Some(c)) => c.clone(),
            (None, None) => bail!("problem: one of `a` or `coefficients` is required"),
            (Some(_), Some(_)) => bail!("problem: give either `a` or `coefficients`, not both"),
        };
        Ok(BvpProblem::higher_order(
            self.t,
            self.q,
            coefficients,
            self.v.clone(),
            self.nonlinearity.build()?,
            lambda,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomoclinicSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<Exponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<Exponent>,
    /// `p_1 .. p_n` for the order-`n` problem; excludes `p1`/`p2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<Exponent>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    pub q: Exponent,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub nonlinearity: NonlinearitySpec,
    pub lambda: f64,
    pub mu: Exponent,
    #[serde(default = "one")]
    pub s: f64,
    #[serde(rename = "N_schedule", default = "default_schedule")]
    pub n_schedule: Vec<usize>,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_floor")]
    pub nontrivial_floor: f64,
    /// Proceed even when the sampled (F1)-(F3) checks fail.
    #[serde(default)]
    pub waive_checks: bool,
}

fn default_schedule() -> Vec<usize> {
    vec![32, 64, 128]
}

fn default_tail_tol() -> f64 {
    HomoclinicOptions::default().tail_tol
}

fn default_floor() -> f64 {
    HomoclinicOptions::default().nontrivial_floor
}

impl HomoclinicSpec {
    pub fn options(&self) -> HomoclinicOptions {
        HomoclinicOptions {
            tail_tol: self.tail_tol,
            nontrivial_floor: self.nontrivial_floor,
        }
    }

    pub fn build(&self) -> anyhow::Result<HomoclinicProblem> {
        let nl = self.nonlinearity.build()?;
        let p = match (&self.exponents, self.p1, self.p2) {
            (None, Some(p1), Some(p2)) => {
                if self.coefficients.is_some() {
                    bail!("homoclinic: `coefficients` goes with `exponents`, use `a` with p1/p2");
                }
                let a = self
                    .a
                    .ok_or_else(|| anyhow!("homoclinic: missing field `a`"))?;
                HomoclinicProblem::new(
                    p1,
                    p2,
                    self.q,
                    a,
                    self.v.clone(),
                    nl,
                    self.lambda,
                    self.mu,
                    self.s,
                )?
            }
            (Some(ex), None, None) => {
                let coefficients = match (&self.coefficients, self.a) {
                    (Some(c), None) => c.clone(),
                    (None, Some(a)) => vec![a],
                    _ => bail!("homoclinic: give exactly one of `a` or `coefficients`"),
                };
                HomoclinicProblem::higher_order(
                    ex.clone(),
                    coefficients,
                    self.q,
                    self.v.clone(),
                    nl,
                    self.lambda,
                    self.mu,
                    self.s,
                )?
            }
            _ => bail!("homoclinic: give either `p1` and `p2`, or `exponents`"),
        };
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<BvpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homoclinic: Option<HomoclinicSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_witness: Option<GrowthWitness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<SampleBox>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn empty() -> Self {
        RunConfig {
            mode: None,
            problem: None,
            homoclinic: None,
            c: None,
            d: None,
            lambda: None,
            growth_witness: None,
            sample_box: None,
            solver: SolverConfig::default(),
        }
    }

    /// Example 2: `T = 8`, `V(k) = k`, `q = 3`, `a = 10`, `F(k,t) = k² G(t)`,
    /// `c = 1`, `d = 14`, `λ = 7·10⁻⁴`.
    pub fn example2() -> Self {
        RunConfig {
            mode: Some(Mode::ReproduceExample2),
            problem: Some(BvpSpec {
                t: 8,
                q: Exponent::new(3.0).expect("3 > 1"),
                a: Some(10.0),
                coefficients: None,
                v: (1..=8).map(f64::from).collect(),
                nonlinearity: NonlinearitySpec::Example2 {
                    cap: 14.0,
                    scale: 1.0,
                },
            }),
            c: Some(1.0),
            d: Some(14.0),
            lambda: Some(7e-4),
            // F(k,t) <= 64 e^14 (1 + |t|) for every k in [1, 8]
            growth_witness: Some(GrowthWitness {
                b: 64.0 * 14f64.exp(),
                p: 1.0,
            }),
            ..RunConfig::empty()
        }
    }

    /// Example 1: `T = 2`, `V = (1, 2)`, `f = φ_4`, `p₁ = p₂ = q = 2`, `a = 1`, `λ = 1`.
    pub fn example1() -> Self {
        let two = Exponent::new(2.0).expect("2 > 1");
        let four = Exponent::new(4.0).expect("4 > 1");
        RunConfig {
            mode: Some(Mode::ReproduceExample1),
            homoclinic: Some(HomoclinicSpec {
                p1: Some(two),
                p2: Some(two),
                exponents: None,
                a: Some(1.0),
                coefficients: None,
                q: two,
                v: vec![1.0, 2.0],
                nonlinearity: NonlinearitySpec::Power {
                    b: vec![1.0, 1.0],
                    r: four,
                },
                lambda: 1.0,
                mu: four,
                s: 1.0,
                n_schedule: default_schedule(),
                tail_tol: default_tail_tol(),
                nontrivial_floor: default_floor(),
                waive_checks: false,
            }),
            ..RunConfig::empty()
        }
    }

    fn require<T>(field: &Option<T>, name: &str, mode: Mode) -> anyhow::Result<()> {
        if field.is_none() {
            bail!("missing field `{name}` required by mode {mode}");
        }
        Ok(())
    }

    /// Checks that the fields `mode` needs are present and that the problems build.
    pub fn validate(&self, mode: Mode) -> anyhow::Result<()> {
        if let Some(m) = self.mode {
            if m != mode {
                bail!("mode: config says {m} but {mode} was requested");
            }
        }
        self.solver.validate().map_err(|e| anyhow!("solver: {e}"))?;
        match mode {
            Mode::Certify => {
                Self::require(&self.problem, "problem", mode)?;
                Self::require(&self.c, "c", mode)?;
                Self::require(&self.d, "d", mode)?;
            }
            Mode::SolveBvp => {
                Self::require(&self.problem, "problem", mode)?;
                Self::require(&self.lambda, "lambda", mode)?;
                if self.c.is_some() != self.d.is_some() {
                    bail!("c and d must be given together");
                }
            }
            Mode::SolveHomoclinic => Self::require(&self.homoclinic, "homoclinic", mode)?,
            Mode::Verify | Mode::ReproduceExample1 | Mode::ReproduceExample2 => {}
        }
        if let Some(p) = &self.problem {
            p.build(self.lambda.unwrap_or(0.0)).context("problem")?;
        }
        if let Some(h) = &self.homoclinic {
            h.build().context("homoclinic")?;
            if h.n_schedule.is_empty()
                || h.n_schedule.windows(2).any(|w| w[0] >= w[1])
                || h.n_schedule[0] == 0
            {
                bail!("homoclinic.N_schedule: must be positive and strictly increasing");
            }
        }
        if let (Some(c), Some(d)) = (self.c, self.d) {
            if !(c > 0.0 && c < d) {
                bail!("c, d: need 0 < c < d, got c = {c}, d = {d}");
            }
        }
        Ok(())
    }
}

/// Parses a config document; errors name the path of the offending key.
pub fn load_config(text: &str) -> anyhow::Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("{path}: {}", e.into_inner())
    })
}
