//! TOML job configuration. Rationals are written as `"p/q"` strings, complex numbers as
//! `[re, im]` pairs.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cycle::{cycle_of_complex, CycleChain};
use crate::divisor::{divisor_data, sigma_frame, DivisorData};
use crate::error::{Error, Result};
use crate::fan::StackyFan;
use crate::lattice::Rational;
use crate::params::{sample_w, EquivariantParams, WBox};
use crate::quadrature::QuadratureConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanConfig {
    pub n: usize,
    pub rays: Vec<Vec<i64>>,
    #[serde(default)]
    pub extensions: Vec<Vec<i64>>,
    pub max_cones: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleTerm {
    pub l: Vec<i64>,
    #[serde(default = "one")]
    pub multiplicity: i64,
}

fn one() -> i64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WRegion {
    pub re: Vec<[f64; 2]>,
    pub im: Vec<[f64; 2]>,
    #[serde(default = "default_tries")]
    pub max_tries: usize,
}

fn default_tries() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub z: f64,
    #[serde(default)]
    pub t0: [f64; 2],
    pub q: Vec<f64>,
    #[serde(default)]
    pub w: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub w_region: Option<WRegion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesConfig {
    pub n_max: String,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { n_max: "20".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaLimitConfig {
    pub sigma: usize,
    pub q_small: f64,
    pub tol: f64,
    /// Required margin `Re tw < -margin` at the chart.
    pub margin: f64,
}

impl Default for GammaLimitConfig {
    fn default() -> Self {
        GammaLimitConfig { sigma: 0, q_small: 1e-4, tol: 1e-3, margin: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MainTheoremConfig {
    /// Max cone whose splitting is used for the integral.
    pub sigma: usize,
    pub tol: f64,
}

impl Default for MainTheoremConfig {
    fn default() -> Self {
        MainTheoremConfig { sigma: 0, tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EtaIndependenceConfig {
    pub sigma: usize,
    /// Second splitting: an explicit matrix, or another max cone.
    pub other_sigma: Option<usize>,
    pub eta: Option<Vec<Vec<String>>>,
    pub tol: f64,
}

impl Default for EtaIndependenceConfig {
    fn default() -> Self {
        EtaIndependenceConfig { sigma: 0, other_sigma: Some(1), eta: None, tol: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftConfig {
    pub sigma: usize,
    pub v0: Vec<String>,
    pub t: Vec<String>,
    pub tol: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig { sigma: 0, v0: vec![], t: vec!["0".into(), "1".into(), "5".into()], tol: 1e-8 }
    }
}

/// Triangle `E -> F -> G`, each given as line-bundle terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdditivityConfig {
    pub e: Vec<BundleTerm>,
    pub f: Vec<BundleTerm>,
    pub g: Vec<BundleTerm>,
    pub sigma: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    pub run: Vec<String>,
    pub xfail: Vec<String>,
    pub series_tol: f64,
    pub h_tol: f64,
    pub gamma_limit: GammaLimitConfig,
    pub main_theorem: MainTheoremConfig,
    pub eta_independence: EtaIndependenceConfig,
    pub shift_invariance: ShiftConfig,
    pub additivity: AdditivityConfig,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            run: vec![],
            xfail: vec![],
            series_tol: 1e-12,
            h_tol: 1e-10,
            gamma_limit: GammaLimitConfig::default(),
            main_theorem: MainTheoremConfig::default(),
            eta_independence: EtaIndependenceConfig::default(),
            shift_invariance: ShiftConfig::default(),
            additivity: AdditivityConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub report: Option<String>,
    pub series_csv: Option<String>,
    pub chain_dump: Option<String>,
    pub trace_csv: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub fan: FanConfig,
    pub basis: Vec<Vec<i64>>,
    #[serde(default)]
    pub bundle: Vec<BundleTerm>,
    pub params: ParamsConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

pub const CHECK_NAMES: [&str; 10] = [
    "validate",
    "semipositivity",
    "box",
    "series_oracle",
    "h_consistency",
    "eta_independence",
    "shift_invariance",
    "additivity",
    "gamma_limit",
    "main_theorem",
];

pub fn parse_rational(s: &str) -> Result<Rational> {
    s.trim().parse::<Rational>().map_err(|_| Error::Config(format!("not a rational number: {s:?}")))
}

pub fn parse_rationals(v: &[String]) -> Result<Vec<Rational>> {
    v.iter().map(|s| parse_rational(s)).collect()
}

pub fn terms(t: &[BundleTerm]) -> Vec<(Vec<i64>, i64)> {
    t.iter().map(|b| (b.l.clone(), b.multiplicity)).collect()
}

fn complex(p: &[f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

impl JobConfig {
    /// Parses TOML; syntax and schema errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: JobConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_schema()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    fn check_schema(&self) -> Result<()> {
        for name in self.checks.run.iter().chain(&self.checks.xfail) {
            if !CHECK_NAMES.contains(&name.as_str()) {
                return Err(Error::Config(format!("unknown check {name:?}")));
            }
        }
        if self.params.w.is_none() == self.params.w_region.is_none() {
            return Err(Error::Config("params needs exactly one of `w` and `w_region`".into()));
        }
        parse_rational(&self.series.n_max)?;
        parse_rationals(&self.checks.shift_invariance.v0)?;
        parse_rationals(&self.checks.shift_invariance.t)?;
        if let Some(eta) = &self.checks.eta_independence.eta {
            for row in eta {
                parse_rationals(row)?;
            }
        }
        self.quadrature.validate()
    }

    pub fn fan(&self) -> StackyFan {
        StackyFan::new(self.fan.n, self.fan.rays.clone(), self.fan.extensions.clone(), self.fan.max_cones.clone())
    }

    pub fn divisor_data(&self) -> Result<DivisorData> {
        divisor_data(&self.fan(), &self.basis)
    }

    pub fn n_max(&self) -> Rational {
        parse_rational(&self.series.n_max).expect("checked at load")
    }

    /// Checks to run: the configured list, or all of them.
    pub fn selected_checks(&self) -> Vec<String> {
        if self.checks.run.is_empty() {
            CHECK_NAMES.iter().map(|s| s.to_string()).collect()
        } else {
            self.checks.run.clone()
        }
    }

    pub fn bundle_terms(&self) -> Vec<(Vec<i64>, i64)> {
        terms(&self.bundle)
    }

    pub fn chain(&self) -> Result<CycleChain> {
        cycle_of_complex(&self.fan(), &self.bundle_terms())
    }

    /// Parameters with `w` either explicit or drawn from the region with `seed`. When the
    /// Gamma-limit check is selected, draws are restricted to its chart region.
    pub fn params(&self, dd: &DivisorData, seed: u64) -> Result<EquivariantParams> {
        let p = &self.params;
        let w = match (&p.w, &p.w_region) {
            (Some(w), _) => w.iter().map(complex).collect(),
            (None, Some(region)) => {
                let wbox = WBox {
                    re: region.re.iter().map(|x| (x[0], x[1])).collect(),
                    im: region.im.iter().map(|x| (x[0], x[1])).collect(),
                };
                let gl = &self.checks.gamma_limit;
                let need_chart = self.selected_checks().iter().any(|c| c == "gamma_limit");
                sample_w(dd, &wbox, seed, region.max_tries, |w| !need_chart || in_chart_region(dd, gl.sigma, w, gl.margin))?
            }
            (None, None) => unreachable!("checked at load"),
        };
        let params = EquivariantParams::new(p.z, w, complex(&p.t0), p.q.clone());
        params.check_basic(dd, 1.0)?;
        params.check_generic(dd)?;
        Ok(params)
    }
}

/// `Re tw_p < -margin` for every ray of the chart, the region where its fixed point dominates.
pub fn in_chart_region(dd: &DivisorData, sigma: usize, w: &[Complex64], margin: f64) -> bool {
    sigma < dd.fan.max_cones.len() && sigma_frame(dd, sigma, w).tw.iter().all(|t| t.re < -margin)
}
