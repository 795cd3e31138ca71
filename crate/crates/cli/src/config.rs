//! `key = value` configuration files.

use std::path::PathBuf;

use tiemortar::{Error, MethodSpec, MultiplierKind, Preset, Result};

/// Multiplier continuity override.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuity {
    Continuous,
    Discontinuous,
}

impl Continuity {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Continuity::Continuous),
            "discontinuous" => Ok(Continuity::Discontinuous),
            _ => Err(Error::Config(format!(
                "continuity must be `continuous` or `discontinuous`, got `{s}`"
            ))),
        }
    }
}

/// Element pair of an inf-sup probe: displacement degree and multiplier space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair {
    pub degree: usize,
    pub multiplier: MultiplierKind,
}

impl Pair {
    /// `p1p1`, `p1p0`, `p1p1d`, `p2p1`, ...
    pub fn parse(s: &str) -> Result<Self> {
        let m = MethodSpec::parse(&format!("mixed-{s}"))
            .map_err(|_| Error::Config(format!("unknown element pair `{s}` (expected e.g. p1p1, p1p0, p2p1)")))?;
        Ok(Pair {
            degree: m.degree,
            multiplier: m.multiplier,
        })
    }
}

/// Values that may come from a config file or the command line. Unset
/// fields fall back to the per-command defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub preset: Option<Preset>,
    pub method: Option<MethodSpec>,
    pub methods: Option<Vec<MethodSpec>>,
    pub pair: Option<Pair>,
    pub level: Option<usize>,
    pub levels: Option<usize>,
    pub reference_extra: Option<usize>,
    pub alpha: Option<f64>,
    pub degree: Option<usize>,
    pub multiplier: Option<MultiplierKind>,
    pub continuity: Option<Continuity>,
    pub matching: Option<bool>,
    pub infsup: Option<bool>,
    pub max_dofs: Option<usize>,
    pub output: Option<PathBuf>,
}

pub const KEYS: [&str; 15] = [
    "preset",
    "method",
    "methods",
    "pair",
    "level",
    "levels",
    "reference_extra",
    "alpha",
    "degree",
    "multiplier",
    "continuity",
    "matching",
    "infsup",
    "max_dofs",
    "output",
];

fn at(line: usize, e: Error) -> Error {
    let msg = match e {
        Error::Config(m) | Error::Parse { msg: m, .. } => m,
        other => other.to_string(),
    };
    Error::Parse { line, msg }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}` expects a non-negative integer, got `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` expects true or false, got `{v}`"))),
    }
}

pub fn parse_alpha(v: &str) -> Result<f64> {
    let a: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("`alpha` expects a number, got `{v}`")))?;
    check_alpha(a)
}

pub fn check_alpha(a: f64) -> Result<f64> {
    if a > 0.0 && a.is_finite() {
        Ok(a)
    } else {
        Err(Error::Config(format!(
            "alpha = {a} violates the stability condition 0 < alpha < C_I (alpha must be positive)"
        )))
    }
}

pub fn parse_methods(v: &str) -> Result<Vec<MethodSpec>> {
    let methods = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(MethodSpec::parse)
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(Error::Config("`methods` is empty".into()));
    }
    Ok(methods)
}

impl Settings {
    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "preset" => self.preset = Some(Preset::parse(v)?),
            "method" => self.method = Some(MethodSpec::parse(v)?),
            "methods" => self.methods = Some(parse_methods(v)?),
            "pair" => self.pair = Some(Pair::parse(v)?),
            "level" => self.level = Some(parse_usize(key, v)?),
            "levels" => self.levels = Some(parse_usize(key, v)?),
            "reference_extra" => self.reference_extra = Some(parse_usize(key, v)?),
            "alpha" => self.alpha = Some(parse_alpha(v)?),
            "degree" => self.degree = Some(parse_usize(key, v)?),
            "multiplier" => self.multiplier = Some(MultiplierKind::parse(v)?),
            "continuity" => self.continuity = Some(Continuity::parse(v)?),
            "matching" => self.matching = Some(parse_bool(key, v)?),
            "infsup" => self.infsup = Some(parse_bool(key, v)?),
            "max_dofs" => self.max_dofs = Some(parse_usize(key, v)?),
            "output" => self.output = Some(PathBuf::from(v)),
            _ => unreachable!("key checked against KEYS"),
        }
        Ok(())
    }

    /// Fields set in `over` replace those of `self`.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            preset: over.preset.or(self.preset),
            method: over.method.or(self.method),
            methods: over.methods.or(self.methods),
            pair: over.pair.or(self.pair),
            level: over.level.or(self.level),
            levels: over.levels.or(self.levels),
            reference_extra: over.reference_extra.or(self.reference_extra),
            alpha: over.alpha.or(self.alpha),
            degree: over.degree.or(self.degree),
            multiplier: over.multiplier.or(self.multiplier),
            continuity: over.continuity.or(self.continuity),
            matching: over.matching.or(self.matching),
            infsup: over.infsup.or(self.infsup),
            max_dofs: over.max_dofs.or(self.max_dofs),
            output: over.output.or(self.output),
        }
    }
}

/// Parses a config file. Errors carry the 1-based line number.
pub fn parse_config(text: &str) -> Result<Settings> {
    let mut s = Settings::default();
    let mut seen: Vec<&str> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected `key = value`, got `{body}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key == "seed" {
            return Err(Error::Parse {
                line,
                msg: "`seed` is not accepted: the pipeline is fully deterministic".into(),
            });
        }
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key `{key}` (known keys: {})", KEYS.join(", ")),
            });
        };
        if seen.contains(&known) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate key `{key}`"),
            });
        }
        seen.push(known);
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                msg: format!("missing value for `{key}`"),
            });
        }
        s.set(known, value).map_err(|e| at(line, e))?;
    }
    Ok(s)
}
