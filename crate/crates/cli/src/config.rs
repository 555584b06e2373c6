//! Run configuration (TOML, unknown keys rejected).

use std::path::Path;

use fracplane_core::fracops::DEFAULT_CAP;
use fracplane_core::geometry::{Domain, Grid, Point};
use fracplane_core::solver::{Coef, LinearCoefficient, Nonlinearity};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the working directory.
    #[serde(default = "default_output")]
    pub output: String,
    pub domain: DomainSpec,
    pub operator: OperatorSpec,
    pub nonlinearity: NonlinearitySpec,
    pub initial: InitialSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

fn default_output() -> String {
    "out".into()
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Interval,
    Rectangle,
    Disk,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub half_width: Option<f64>,
    pub half_height: Option<f64>,
    pub radius: Option<f64>,
    pub h: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub s: f64,
}

/// A constant or `mean + amp sin(2 pi t / period)`.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum CoefSpec {
    Constant(f64),
    Sinusoid(SinusoidSpec),
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SinusoidSpec {
    pub mean: f64,
    pub amp: f64,
    pub period: f64,
}

impl CoefSpec {
    fn to_coef(&self) -> Coef {
        match self {
            CoefSpec::Constant(c) => Coef::Constant(*c),
            CoefSpec::Sinusoid(s) => Coef::Sinusoid { mean: s.mean, amp: s.amp, period: s.period },
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityKind {
    AllenCahn,
    Zero,
    Linear,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    /// Allen-Cahn `a(t) u - b(t) u^3`.
    pub a: Option<CoefSpec>,
    pub b: Option<CoefSpec>,
    /// Linear `c u + g`.
    pub c: Option<f64>,
    pub g: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `amplitude dist(x, boundary) (1 + asymmetry x1)`.
    Tent,
    /// `amplitude cos(pi r / 2R) (1 + asymmetry x1)`, `R` the inradius.
    Cosine,
    /// Seeded uniform noise in `[0, amplitude]` times the tent.
    Random,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub profile: ProfileKind,
    pub amplitude: f64,
    #[serde(default)]
    pub asymmetry: f64,
    /// Values are clipped to this interval.
    pub clip: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub horizon: f64,
    pub dt: f64,
    /// Steps between stored snapshots.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
}

fn default_snapshot_every() -> usize {
    20
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    /// Planes `(2j - 1) / (2 count) * max x1`, `j = 1..count`.
    pub lambda_count: usize,
    /// The omega-limit window is `[omega_start, horizon]`; defaults to `0.8 horizon`.
    pub omega_start: Option<f64>,
    pub omega_tol: f64,
    /// Snapshots before this time are ignored by the decay fits.
    pub burn_in: f64,
    /// Lower bound of the evenness tolerance `max(5h, floor)`.
    pub symmetry_floor: f64,
    pub symmetry: bool,
    pub sweep: bool,
    pub boundary_growth: bool,
    pub holder: bool,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            lambda_count: 16,
            omega_start: None,
            omega_tol: 1e-3,
            burn_in: 0.0,
            symmetry_floor: 1e-4,
            symmetry: true,
            sweep: true,
            boundary_growth: true,
            holder: true,
        }
    }
}

fn bad(field: &str, value: impl std::fmt::Display, expected: &str) -> CliError {
    CliError::Config(format!("`{field}` = {value} is invalid: expected {expected}"))
}

fn check_positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(field, v, "a finite value > 0"))
    }
}

fn need<T: Copy>(field: &str, v: Option<T>) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("`{field}` is required for this kind")))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.domain;
        check_positive("domain.h", d.h)?;
        match d.kind {
            DomainKind::Interval => check_positive("domain.half_width", need("domain.half_width", d.half_width)?)?,
            DomainKind::Rectangle => {
                check_positive("domain.half_width", need("domain.half_width", d.half_width)?)?;
                check_positive("domain.half_height", need("domain.half_height", d.half_height)?)?;
            }
            DomainKind::Disk => check_positive("domain.radius", need("domain.radius", d.radius)?)?,
        }
        let s = self.operator.s;
        if !(s > 0.0 && s < 1.0) {
            return Err(bad("operator.s", s, "a value in (0, 1)"));
        }
        let nl = &self.nonlinearity;
        match nl.kind {
            NonlinearityKind::AllenCahn => {
                for (name, c) in [("nonlinearity.a", &nl.a), ("nonlinearity.b", &nl.b)] {
                    if let Some(CoefSpec::Sinusoid(p)) = c {
                        check_positive(&format!("{name}.period"), p.period)?;
                    }
                }
            }
            NonlinearityKind::Zero => {}
            NonlinearityKind::Linear => {
                let c = need("nonlinearity.c", nl.c)?;
                if !c.is_finite() {
                    return Err(bad("nonlinearity.c", c, "a finite value"));
                }
            }
        }
        let init = &self.initial;
        if !(init.amplitude.is_finite() && init.amplitude >= 0.0) {
            return Err(bad("initial.amplitude", init.amplitude, "a finite value >= 0"));
        }
        if !init.asymmetry.is_finite() {
            return Err(bad("initial.asymmetry", init.asymmetry, "a finite value"));
        }
        if let Some([lo, hi]) = init.clip {
            if !(lo <= hi) {
                return Err(bad("initial.clip", format!("[{lo}, {hi}]"), "lo <= hi"));
            }
        }
        let t = &self.time;
        check_positive("time.horizon", t.horizon)?;
        check_positive("time.dt", t.dt)?;
        if t.dt > t.horizon {
            return Err(bad("time.dt", t.dt, "a step no longer than the horizon"));
        }
        if t.snapshot_every == 0 {
            return Err(bad("time.snapshot_every", 0, "at least 1"));
        }
        let a = &self.analysis;
        if a.lambda_count < 2 {
            return Err(bad("analysis.lambda_count", a.lambda_count, "at least 2"));
        }
        check_positive("analysis.omega_tol", a.omega_tol)?;
        check_positive("analysis.symmetry_floor", a.symmetry_floor)?;
        if let Some(w) = a.omega_start {
            if !(w >= 0.0 && w < t.horizon) {
                return Err(bad("analysis.omega_start", w, "a time in [0, horizon)"));
            }
        }
        if !(a.burn_in >= 0.0 && a.burn_in < t.horizon) {
            return Err(bad("analysis.burn_in", a.burn_in, "a time in [0, horizon)"));
        }
        let grid = self.grid()?;
        if grid.len() > DEFAULT_CAP {
            return Err(bad("domain.h", d.h, &format!("a step giving at most {DEFAULT_CAP} cells (got {})", grid.len())));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        let d = &self.domain;
        let dom = match d.kind {
            DomainKind::Interval => Domain::interval(need("domain.half_width", d.half_width)?),
            DomainKind::Rectangle => {
                Domain::rectangle(need("domain.half_width", d.half_width)?, need("domain.half_height", d.half_height)?)
            }
            DomainKind::Disk => Domain::disk(need("domain.radius", d.radius)?),
        };
        dom.map_err(|e| CliError::Config(format!("domain: {e}")))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let grid = Grid::new(&self.domain()?, self.domain.h).map_err(|e| CliError::Config(format!("domain.h: {e}")))?;
        if grid.is_empty() {
            return Err(bad("domain.h", self.domain.h, "a step leaving at least one cell inside"));
        }
        Ok(grid)
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        let nl = &self.nonlinearity;
        let coef = |c: &Option<CoefSpec>| c.as_ref().map_or(Coef::Constant(1.0), CoefSpec::to_coef);
        match nl.kind {
            NonlinearityKind::AllenCahn => Nonlinearity::allen_cahn(coef(&nl.a), coef(&nl.b)),
            NonlinearityKind::Zero => Nonlinearity::zero(),
            NonlinearityKind::Linear => {
                Nonlinearity::linear(LinearCoefficient::constant(nl.c.unwrap_or(0.0)), nl.g.unwrap_or(0.0))
            }
        }
    }

    pub fn initial_datum(&self, grid: &Grid, domain: &Domain, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let init = &self.initial;
        let inradius = grid.centers().iter().map(|c| domain.boundary_distance(c)).fold(0.0, f64::max);
        let shape = |x: &Point| (1.0 + init.asymmetry * x[0]) * init.amplitude;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        grid.centers()
            .iter()
            .map(|x| {
                let d = domain.boundary_distance(x);
                let v = match init.profile {
                    ProfileKind::Tent => d * shape(x),
                    ProfileKind::Cosine => {
                        (std::f64::consts::FRAC_PI_2 * (1.0 - d / inradius).clamp(0.0, 1.0)).cos() * shape(x)
                    }
                    ProfileKind::Random => d * shape(x) * rng.random::<f64>(),
                };
                match init.clip {
                    Some([lo, hi]) => v.clamp(lo, hi),
                    None => v,
                }
            })
            .collect()
    }

    /// Planes of the sweep.
    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        let l = self.domain()?.max_x1();
        let k = self.analysis.lambda_count;
        Ok((1..=k).map(|j| (2 * j - 1) as f64 / (2 * k) as f64 * l).collect())
    }

    pub fn omega_start(&self) -> f64 {
        self.analysis.omega_start.unwrap_or(0.8 * self.time.horizon)
    }

    pub fn steps(&self) -> usize {
        (self.time.horizon / self.time.dt).round() as usize
    }
}
