//! Flat `key = value` run configuration with `#` comments and dotted
//! section keys. Every key is validated; unknown or malformed keys are
//! reported by name.

use mvfpke_core::coefficients::CoefficientModel;
use mvfpke_core::fpke::{SolveOptions, TimeStepping};
use mvfpke_core::grid::{Grid1D, GridDensity};
use mvfpke_core::io::read_initial_csv;
use mvfpke_core::sde::Integrator;
use mvfpke_core::stats::{profile_from_name, reference_profile, Profile};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

/// Configuration-level failure; maps to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type CfgResult<T> = Result<T, ConfigError>;

#[derive(Debug, Clone)]
pub enum InitialSpec {
    Profile(Profile),
    Csv(PathBuf),
}

impl InitialSpec {
    pub fn build(&self, grid: &Grid1D) -> Result<GridDensity, mvfpke_core::Error> {
        match self {
            InitialSpec::Profile(p) => reference_profile(*p, grid),
            InitialSpec::Csv(path) => read_initial_csv(path, grid),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuditCfg {
    pub t_points: usize,
    pub x_points: usize,
    pub r_points: usize,
    pub r_max: Option<f64>,
    pub pair_stride: usize,
}

#[derive(Debug, Clone)]
pub struct SdeCfg {
    pub enabled: bool,
    pub n_paths: usize,
    pub dt: f64,
    pub base_seed: u64,
    pub times: Vec<f64>,
    pub w1_tol: f64,
    pub gap_levels: usize,
    pub gap_noise_seed: u64,
    pub gap_initial_seed: u64,
    pub gap_slope_min: f64,
    pub save_paths: usize,
    pub integrator: Integrator,
}

#[derive(Debug, Clone)]
pub struct ParticlesCfg {
    pub enabled: bool,
    pub n: usize,
    pub dt: f64,
    pub base_seed: u64,
    pub estimator: String,
    pub bandwidth_rule: String,
    pub bandwidth: Option<f64>,
    pub w1_tol: f64,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ChecksCfg {
    pub conditions: bool,
    pub contraction: bool,
    pub contraction_tol: Option<f64>,
    pub linf: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub family: String,
    pub gamma0: f64,
    pub params: BTreeMap<String, f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub t_end: f64,
    pub dt: f64,
    pub stepping: TimeStepping,
    /// every n-th snapshot goes to densities.csv
    pub output_stride: usize,
    pub initial: InitialSpec,
    pub initial2: Option<InitialSpec>,
    pub audit: AuditCfg,
    pub sde: SdeCfg,
    pub particles: ParticlesCfg,
    pub checks: ChecksCfg,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn model(&self) -> Result<CoefficientModel, mvfpke_core::Error> {
        CoefficientModel::from_config(&self.family, &self.params, self.gamma0)
    }

    pub fn grid(&self) -> Result<Grid1D, mvfpke_core::Error> {
        Grid1D::new(self.x_min, self.x_max, self.n_cells)
    }

    pub fn solve_options(&self) -> SolveOptions {
        match self.stepping {
            TimeStepping::Explicit => SolveOptions::default(),
            TimeStepping::SemiImplicit => SolveOptions::semi_implicit(),
        }
    }

    /// Route all stochastic stages through one externally supplied seed.
    pub fn override_seeds(&mut self, seed: u64) {
        self.sde.base_seed = seed;
        self.sde.gap_noise_seed = seed;
        self.sde.gap_initial_seed = seed;
        self.particles.base_seed = seed;
    }
}

/// Raw key/value view with consumption tracking; leftover keys are
/// reported as unknown.
struct Reader {
    map: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
}

impl Reader {
    fn parse(text: &str) -> CfgResult<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(idx) => &raw[..idx],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError(format!("line {}: empty key or value", lineno + 1)));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(ConfigError(format!("duplicate key '{key}'")));
            }
        }
        Ok(Self {
            map,
            consumed: BTreeSet::new(),
        })
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.consumed.insert(key.to_string());
        }
        v
    }

    fn require(&mut self, key: &str) -> CfgResult<String> {
        self.raw(key)
            .ok_or_else(|| ConfigError(format!("missing required key '{key}'")))
    }

    fn f64(&mut self, key: &str) -> CfgResult<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| ConfigError(format!("key '{key}': '{s}' is not a number"))),
        }
    }

    fn require_f64(&mut self, key: &str) -> CfgResult<f64> {
        let v = self.require(key)?;
        v.parse::<f64>()
            .map_err(|_| ConfigError(format!("key '{key}': '{v}' is not a number")))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> CfgResult<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<usize>()
                .map_err(|_| ConfigError(format!("key '{key}': '{s}' is not a nonnegative integer"))),
        }
    }

    fn u64_opt(&mut self, key: &str) -> CfgResult<Option<u64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<u64>()
                .map(Some)
                .map_err(|_| ConfigError(format!("key '{key}': '{s}' is not a seed"))),
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> CfgResult<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => match s.as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(ConfigError(format!("key '{key}': '{other}' is not a boolean"))),
            },
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> CfgResult<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn f64_list(&mut self, key: &str) -> CfgResult<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| ConfigError(format!("key '{key}': '{tok}' is not a number")))
                })
                .collect::<CfgResult<Vec<f64>>>()
                .map(Some),
        }
    }

    fn finish(self) -> CfgResult<()> {
        let leftover: Vec<String> = self
            .map
            .keys()
            .filter(|k| !self.consumed.contains(*k))
            .cloned()
            .collect();
        if leftover.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(format!("unknown key '{}'", leftover[0])))
        }
    }
}

fn read_initial(r: &mut Reader, section: &str, required: bool) -> CfgResult<Option<InitialSpec>> {
    let kind_key = format!("{section}.kind");
    let Some(kind) = r.raw(&kind_key) else {
        if required {
            return Err(ConfigError(format!("missing required key '{kind_key}'")));
        }
        return Ok(None);
    };
    if kind == "csv" {
        let path = r.require(&format!("{section}.path"))?;
        return Ok(Some(InitialSpec::Csv(PathBuf::from(path))));
    }
    let (k1, k2, d1, d2) = match kind.as_str() {
        "gaussian" => ("mean", "sd", 0.0, 1.0),
        "bump" => ("center", "width", 0.0, 1.0),
        "uniform" => ("a", "b", -1.0, 1.0),
        other => {
            return Err(ConfigError(format!(
                "key '{kind_key}': unsupported kind '{other}' (gaussian | bump | uniform | csv)"
            )))
        }
    };
    let p1 = r.f64_or(&format!("{section}.{k1}"), d1)?;
    let p2 = r.f64_or(&format!("{section}.{k2}"), d2)?;
    let profile = profile_from_name(&kind, p1, p2)
        .map_err(|e| ConfigError(format!("section '{section}': {e}")))?;
    Ok(Some(InitialSpec::Profile(profile)))
}

pub fn parse_config(text: &str, config_dir: &Path) -> CfgResult<RunConfig> {
    let mut r = Reader::parse(text)?;

    let family = r.require("model.family")?;
    let gamma0 = r.require_f64("model.gamma0")?;
    let mut params = BTreeMap::new();
    let param_keys: Vec<String> = r
        .map
        .keys()
        .filter(|k| k.starts_with("model.") && *k != "model.family" && *k != "model.gamma0")
        .cloned()
        .collect();
    for key in param_keys {
        let name = key.trim_start_matches("model.").to_string();
        params.insert(name, r.require_f64(&key)?);
    }

    let x_min = r.require_f64("domain.x_min")?;
    let x_max = r.require_f64("domain.x_max")?;
    let n_cells = r.usize_or("domain.n_cells", 1024)?;

    let t_end = r.require_f64("fpke.t_end")?;
    let dt = r.require_f64("fpke.dt")?;
    let stepping = match r.raw("fpke.scheme").as_deref().unwrap_or("explicit") {
        "explicit" => TimeStepping::Explicit,
        "semi-implicit" => TimeStepping::SemiImplicit,
        other => {
            return Err(ConfigError(format!(
                "key 'fpke.scheme': '{other}' is not a scheme (explicit | semi-implicit)"
            )))
        }
    };
    let output_stride = r.usize_or("fpke.output_stride", 1)?;
    if output_stride == 0 {
        return Err(ConfigError("key 'fpke.output_stride': must be positive".into()));
    }

    let initial = read_initial(&mut r, "initial", true)?.unwrap();
    let initial2 = read_initial(&mut r, "initial2", false)?;

    let audit = AuditCfg {
        t_points: r.usize_or("audit.t_points", 5)?,
        x_points: r.usize_or("audit.x_points", 65)?,
        r_points: r.usize_or("audit.r_points", 65)?,
        r_max: r.f64("audit.r_max")?,
        pair_stride: r.usize_or("audit.pair_stride", 1)?,
    };

    let sde_enabled = r.bool_or("sde.enabled", false)?;
    let sde_seed = r.u64_opt("sde.base_seed")?;
    if sde_enabled && sde_seed.is_none() {
        return Err(ConfigError(
            "missing required key 'sde.base_seed' (seeds are mandatory for stochastic stages)"
                .into(),
        ));
    }
    let base_seed = sde_seed.unwrap_or(0);
    let sde = SdeCfg {
        enabled: sde_enabled,
        n_paths: r.usize_or("sde.n_paths", 50_000)?,
        dt: r.f64_or("sde.dt", 0.5f64.powi(7))?,
        base_seed,
        times: r
            .f64_list("sde.times")?
            .unwrap_or_else(|| vec![t_end]),
        w1_tol: r.f64_or("sde.w1_tol", 0.02)?,
        gap_levels: r.usize_or("sde.gap_levels", 4)?,
        gap_noise_seed: r.u64_opt("sde.gap_noise_seed")?.unwrap_or(base_seed),
        gap_initial_seed: r.u64_opt("sde.gap_initial_seed")?.unwrap_or(base_seed),
        gap_slope_min: r.f64_or("sde.gap_slope_min", 0.4)?,
        save_paths: r.usize_or("sde.save_paths", 4)?,
        integrator: match r.raw("sde.integrator") {
            None => Integrator::Euler,
            Some(s) => Integrator::parse(&s)
                .map_err(|e| ConfigError(format!("key 'sde.integrator': {e}")))?,
        },
    };

    let particles_enabled = r.bool_or("particles.enabled", false)?;
    let particles_seed = r.u64_opt("particles.base_seed")?;
    if particles_enabled && particles_seed.is_none() {
        return Err(ConfigError(
            "missing required key 'particles.base_seed' (seeds are mandatory for stochastic stages)"
                .into(),
        ));
    }
    let particles = ParticlesCfg {
        enabled: particles_enabled,
        n: r.usize_or("particles.n", 50_000)?,
        dt: r.f64_or("particles.dt", 0.5f64.powi(7))?,
        base_seed: particles_seed.unwrap_or(0),
        estimator: r.raw("particles.estimator").unwrap_or_else(|| "histogram".into()),
        bandwidth_rule: r
            .raw("particles.bandwidth_rule")
            .unwrap_or_else(|| "scott".into()),
        bandwidth: r.f64("particles.bandwidth")?,
        w1_tol: r.f64_or("particles.w1_tol", 0.05)?,
        times: r
            .f64_list("particles.times")?
            .unwrap_or_else(|| sde.times.clone()),
    };
    if !["histogram", "gaussian-kernel"].contains(&particles.estimator.as_str()) {
        return Err(ConfigError(format!(
            "key 'particles.estimator': '{}' is not an estimator (histogram | gaussian-kernel)",
            particles.estimator
        )));
    }
    if !["scott", "fixed"].contains(&particles.bandwidth_rule.as_str()) {
        return Err(ConfigError(format!(
            "key 'particles.bandwidth_rule': '{}' is not a rule (scott | fixed)",
            particles.bandwidth_rule
        )));
    }
    if particles.bandwidth_rule == "fixed" && particles.enabled && particles.bandwidth.is_none() {
        return Err(ConfigError(
            "missing required key 'particles.bandwidth' for the fixed bandwidth rule".into(),
        ));
    }

    let checks = ChecksCfg {
        conditions: r.bool_or("checks.conditions", true)?,
        contraction: r.bool_or("checks.contraction", initial2.is_some())?,
        contraction_tol: r.f64("checks.contraction_tol")?,
        linf: r.bool_or("checks.linf", true)?,
    };
    if checks.contraction && initial2.is_none() {
        return Err(ConfigError(
            "checks.contraction needs a second initial datum (section 'initial2')".into(),
        ));
    }

    let output_dir = match r.raw("output.dir") {
        Some(dir) => {
            let p = PathBuf::from(&dir);
            if p.is_absolute() {
                p
            } else {
                config_dir.join(p)
            }
        }
        None => config_dir.join("out"),
    };

    // numeric sanity shared by every stage
    for (key, v) in [
        ("model.gamma0", gamma0),
        ("fpke.t_end", t_end),
        ("fpke.dt", dt),
        ("domain.x_min", x_min),
        ("domain.x_max", x_max),
    ] {
        if !v.is_finite() {
            return Err(ConfigError(format!("key '{key}': value must be finite")));
        }
    }
    if t_end <= 0.0 && (sde.enabled || particles.enabled) {
        return Err(ConfigError(
            "key 'fpke.t_end': stochastic stages need a positive horizon".into(),
        ));
    }

    r.finish()?;
    Ok(RunConfig {
        family,
        gamma0,
        params,
        x_min,
        x_max,
        n_cells,
        t_end,
        dt,
        stepping,
        output_stride,
        initial,
        initial2,
        audit,
        sde,
        particles,
        checks,
        output_dir,
    })
}

pub fn load_config(path: &Path) -> CfgResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read '{}': {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    parse_config(&text, &dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
model.family = constant
model.gamma0 = 1.0
model.a = 1.0
domain.x_min = -8
domain.x_max = 8
fpke.t_end = 0.5
fpke.dt = 1e-3
initial.kind = gaussian
initial.sd = 0.5
";

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(cfg.family, "constant");
        assert_eq!(cfg.n_cells, 1024);
        assert!(!cfg.sde.enabled);
        cfg.model().unwrap();
    }

    #[test]
    fn missing_gamma0_is_named() {
        let bad = MINIMAL.replace("model.gamma0 = 1.0", "");
        let err = parse_config(&bad, Path::new(".")).unwrap_err();
        assert!(err.0.contains("model.gamma0"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let bad = format!("{MINIMAL}\nfpke.n_cells = 12\n");
        let err = parse_config(&bad, Path::new(".")).unwrap_err();
        assert!(err.0.contains("fpke.n_cells"), "{err}");
    }

    #[test]
    fn stochastic_stage_requires_a_seed() {
        let bad = format!("{MINIMAL}\nsde.enabled = true\n");
        let err = parse_config(&bad, Path::new(".")).unwrap_err();
        assert!(err.0.contains("sde.base_seed"), "{err}");
    }

    #[test]
    fn comments_and_lists_parse() {
        let text = format!(
            "{MINIMAL}\n# a comment\nsde.enabled = true  # trailing\nsde.base_seed = 7\nsde.times = 0.25, 0.5\n"
        );
        let cfg = parse_config(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.sde.times, vec![0.25, 0.5]);
        assert_eq!(cfg.sde.base_seed, 7);
    }

    #[test]
    fn contraction_needs_second_initial() {
        let bad = format!("{MINIMAL}\nchecks.contraction = true\n");
        let err = parse_config(&bad, Path::new(".")).unwrap_err();
        assert!(err.0.contains("initial2"), "{err}");
    }
}
