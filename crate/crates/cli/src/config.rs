//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Angles accept plain numbers or
//! multiples of pi such as `pi/3`, `2pi`, `0.5*pi`. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use holonomy_core::eigenframe::{default_deg_tol, GaugePolicy, LoopDef};
use holonomy_core::holonomy::DEFAULT_PERMUTATION_TOL;
use holonomy_core::models::{self, Coord, ModelSpec, ParameterPoint};

pub const KEYS: &[&str] = &[
    "model",
    "T",
    "p",
    "lambda",
    "gamma",
    "xi",
    "eta",
    "zeta",
    "loop",
    "waypoints",
    "K",
    "policy",
    "N",
    "deg_tol",
    "perm_tol",
    "compare_tol",
    "propagate_tol",
    "sweep",
    "sweep_from",
    "sweep_to",
    "sweep_steps",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw key/value pairs in the order they were set; later settings win.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            cfg.set_pair(line).map_err(|e| ConfigError(format!("line {}: {}", lineno + 1, e.0)))?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` assignment.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let Some((k, v)) = pair.split_once('=') else {
            return err(format!("expected key=value, got '{pair}'"));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return err(format!("unknown key '{k}'"));
        }
        if v.is_empty() {
            return err(format!("empty value for '{k}'"));
        }
        self.values.insert(k.to_string(), v.to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn number(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.get(key).map_or(Ok(default), |v| parse_number(v).map_err(|e| ConfigError(format!("{key}: {}", e.0))))
    }

    fn integer<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| ConfigError(format!("{key}: '{v}' is not an integer"))),
        }
    }
}

/// Parses `1.5`, `pi`, `-pi/2`, `2pi`, `0.25*pi`, `3*pi/4`.
pub fn parse_number(text: &str) -> Result<f64, ConfigError> {
    let t = text.trim().to_ascii_lowercase();
    if let Ok(x) = t.parse::<f64>() {
        return if x.is_finite() { Ok(x) } else { err(format!("'{text}' is not finite")) };
    }
    let Some(pos) = t.find("pi") else {
        return err(format!("'{text}' is not a number"));
    };
    let (coef, rest) = (t[..pos].trim().trim_end_matches('*').trim(), t[pos + 2..].trim());
    let coef = match coef {
        "" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| ConfigError(format!("'{text}' is not a number")))?,
    };
    let div = match rest.strip_prefix('/') {
        Some(d) => d.trim().parse::<f64>().map_err(|_| ConfigError(format!("'{text}' is not a number")))?,
        None if rest.is_empty() => 1.0,
        None => return err(format!("'{text}' is not a number")),
    };
    if div == 0.0 {
        return err(format!("'{text}' divides by zero"));
    }
    Ok(coef * PI / div)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    SpinHalf,
    SpinThreeHalf,
    Zeeman,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ModelSpec,
    pub base: ParameterPoint,
    pub loop_def: LoopDef,
    pub loop_coord: Option<Coord>,
    pub steps: usize,
    pub policy: GaugePolicy,
    pub periods: Option<usize>,
    pub deg_tol: f64,
    pub perm_tol: f64,
    pub compare_tol: f64,
    pub propagate_tol: f64,
    pub sweep: Coord,
    pub sweep_from: f64,
    pub sweep_to: f64,
    pub sweep_steps: usize,
}

fn coord_for(model: ModelChoice, name: &str) -> Result<Coord, ConfigError> {
    let coord = Coord::parse(name).ok_or_else(|| ConfigError(format!("unknown coordinate '{name}'")))?;
    let allowed: &[Coord] = match model {
        ModelChoice::SpinHalf => &[Coord::Lambda, Coord::Gamma, Coord::Xi],
        ModelChoice::SpinThreeHalf => &[Coord::Lambda, Coord::Gamma, Coord::Eta, Coord::Xi, Coord::Zeta],
        ModelChoice::Zeeman => &[Coord::Gamma, Coord::Xi],
    };
    if allowed.contains(&coord) {
        Ok(coord)
    } else {
        err(format!("coordinate '{name}' does not belong to this model"))
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let model = match raw.get("model").unwrap_or("spin_half") {
            "spin_half" => ModelChoice::SpinHalf,
            "spin_three_half" => ModelChoice::SpinThreeHalf,
            "zeeman" => ModelChoice::Zeeman,
            other => return err(format!("unknown model '{other}' (spin_half, spin_three_half, zeeman)")),
        };
        let t = raw.number("T", 1.0)?;
        let p: i32 = raw.integer("p")?.unwrap_or(1);
        let lambda = raw.number("lambda", 0.0)?;
        let gamma = raw.number("gamma", 0.7)?;
        let xi = raw.number("xi", 0.0)?;
        let eta = raw.number("eta", 0.0)?;
        let zeta = raw.number("zeta", 0.0)?;

        let spec = match model {
            ModelChoice::SpinHalf => ModelSpec::spin_half(t, p),
            ModelChoice::SpinThreeHalf => ModelSpec::spin_three_half(t, p),
            ModelChoice::Zeeman => ModelSpec::custom_static(models::zeeman_model()),
        };
        let base = match model {
            ModelChoice::SpinHalf => ParameterPoint::spin_half(lambda, gamma, xi),
            ModelChoice::SpinThreeHalf => ParameterPoint::spin_three_half(lambda, gamma, eta, xi, zeta),
            ModelChoice::Zeeman => ParameterPoint { lambda: 0.0, sphere: vec![gamma, xi], generic: None },
        };
        if model == ModelChoice::Zeeman {
            for key in ["T", "p", "lambda", "eta", "zeta"] {
                if raw.get(key).is_some() {
                    return err(format!("key '{key}' does not apply to the zeeman model"));
                }
            }
        } else if model == ModelChoice::SpinHalf {
            for key in ["eta", "zeta"] {
                if raw.get(key).is_some() {
                    return err(format!("key '{key}' does not apply to the spin_half model"));
                }
            }
        }

        let loop_name = raw.get("loop").unwrap_or(if model == ModelChoice::Zeeman { "xi" } else { "lambda" });
        let (loop_def, loop_coord) = match loop_name {
            "constant" => (LoopDef::Constant { point: base.clone() }, None),
            "waypoints" => {
                let text = raw.get("waypoints").ok_or_else(|| ConfigError("loop = waypoints needs a 'waypoints' key".into()))?;
                (LoopDef::Waypoints { points: parse_waypoints(text, &base)? }, None)
            }
            name => {
                let coord = coord_for(model, name)?;
                (LoopDef::coordinate(coord, base.clone()), Some(coord))
            }
        };
        if loop_name != "waypoints" && raw.get("waypoints").is_some() {
            return err("'waypoints' is only used with loop = waypoints");
        }

        let steps: usize = raw.integer("K")?.unwrap_or(1024);
        let policy = match raw.get("policy") {
            None => GaugePolicy::SmoothPhase,
            Some(s) => GaugePolicy::parse(s).ok_or_else(|| {
                ConfigError(format!("unknown policy '{s}' (raw_solver, smooth_phase, parallel_transport, analytic_oracle)"))
            })?,
        };
        if policy == GaugePolicy::AnalyticOracle && model == ModelChoice::Zeeman {
            return err("analytic_oracle policy needs a kicked model");
        }
        let periods: Option<usize> = raw.integer("N")?;
        if periods == Some(0) {
            return err("N must be positive");
        }

        let positive = |key: &str, default: f64| -> Result<f64, ConfigError> {
            let v = raw.number(key, default)?;
            if v > 0.0 {
                Ok(v)
            } else {
                err(format!("{key} must be positive"))
            }
        };
        let deg_tol = positive("deg_tol", default_deg_tol(&spec))?;
        let perm_tol = positive("perm_tol", DEFAULT_PERMUTATION_TOL)?;
        let compare_tol = positive("compare_tol", 1e-6)?;
        let propagate_tol = positive("propagate_tol", 2e-2)?;

        let sweep = coord_for(model, raw.get("sweep").unwrap_or(loop_coord.map(|c| c.name()).as_deref().unwrap_or("lambda")))?;
        let sweep_from = raw.number("sweep_from", base.get(sweep))?;
        let sweep_to = raw.number("sweep_to", sweep_from + 2.0 * std::f64::consts::TAU)?;
        let sweep_steps: usize = raw.integer("sweep_steps")?.unwrap_or(800);
        if sweep_steps == 0 {
            return err("sweep_steps must be positive");
        }

        Ok(RunConfig {
            spec,
            base,
            loop_def,
            loop_coord,
            steps,
            policy,
            periods,
            deg_tol,
            perm_tol,
            compare_tol,
            propagate_tol,
            sweep,
            sweep_from,
            sweep_to,
            sweep_steps,
        })
    }

    pub fn tolerances(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("deg_tol".to_string(), self.deg_tol),
            ("perm_tol".to_string(), self.perm_tol),
            ("compare_tol".to_string(), self.compare_tol),
            ("propagate_tol".to_string(), self.propagate_tol),
        ])
    }
}

/// `waypoints = a,b,c ; d,e,f ; ...` in the model's flat coordinate order.
fn parse_waypoints(text: &str, template: &ParameterPoint) -> Result<Vec<ParameterPoint>, ConfigError> {
    let width = template.len();
    text.split(';')
        .map(|chunk| {
            let values: Vec<f64> = chunk.split(',').map(parse_number).collect::<Result<_, _>>()?;
            if values.len() != width {
                return err(format!("waypoint '{}' has {} coordinates, expected {width}", chunk.trim(), values.len()));
            }
            Ok(template.with_flat(&values))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_number("0.5").unwrap(), 0.5);
        assert!((parse_number("pi/3").unwrap() - PI / 3.0).abs() < 1e-15);
        assert!((parse_number("-pi/2").unwrap() + PI / 2.0).abs() < 1e-15);
        assert!((parse_number("2pi").unwrap() - 2.0 * PI).abs() < 1e-15);
        assert!((parse_number("3*pi/4").unwrap() - 0.75 * PI).abs() < 1e-15);
        assert!(parse_number("pie").is_err());
        assert!(parse_number("nan").is_err());
    }

    #[test]
    fn comments_and_overrides() {
        let mut raw = RawConfig::parse("# header\nmodel = spin_half  # inline\nK = 64\n\np=3\n").unwrap();
        raw.set_pair("K=128").unwrap();
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.steps, 128);
        assert_eq!(cfg.spec.winding, 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RawConfig::parse("colour = blue").is_err());
        assert!(RawConfig::parse("K").is_err());
        let raw = RawConfig::parse("model = spin_half\neta = 0.3").unwrap();
        assert!(RunConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn waypoints_parse() {
        let raw = RawConfig::parse("loop = waypoints\nwaypoints = 0,0.7,0 ; 0,0.7,pi ; 0,0.7,2pi").unwrap();
        let cfg = RunConfig::from_raw(&raw).unwrap();
        match cfg.loop_def {
            LoopDef::Waypoints { points } => assert_eq!(points.len(), 3),
            other => panic!("unexpected loop {other:?}"),
        }
    }
}
