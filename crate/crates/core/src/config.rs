//! Run configuration in a flat `key = value` format with `[section]` headers.
//!
//! ```text
//! [grid]
//! extent = 1 1
//! cells = 32 32
//! [time]
//! T = 1
//! N = 64
//! [problem]
//! name = poly2d
//! ```
//!
//! Lists are separated by whitespace or commas, `#` starts a comment. Every
//! key can be overridden by an environment variable
//! `MACPROJ_<SECTION>_<KEY>` (upper case), e.g. `MACPROJ_TIME_N=128`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::error::Error;
use crate::grid::MacGrid;
use crate::linalg::{DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use crate::operators::ConvectionScheme;
use crate::output::FieldFormat;
use crate::scheme::SchemeOptions;
use crate::verify::PROBLEMS;

pub const ENV_PREFIX: &str = "MACPROJ_";

/// Name of the constant-forcing problem (zero initial velocity).
pub const CONSTANT_FORCE: &str = "constant";

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["extent", "cells", "ratio", "x", "y", "z"]),
    ("time", &["T", "N"]),
    ("problem", &["name", "force"]),
    ("solver", &["prediction_tolerance", "poisson_tolerance", "max_iterations", "convection"]),
    ("output", &["dir", "every", "format"]),
    ("run", &["seed"]),
];

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Uniform { extent: Vec<f64>, cells: Vec<usize> },
    Graded { extent: Vec<f64>, cells: Vec<usize>, ratio: Vec<f64> },
    Coordinates(Vec<Vec<f64>>),
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        match self {
            GridSpec::Uniform { cells, .. } | GridSpec::Graded { cells, .. } => cells.len(),
            GridSpec::Coordinates(axes) => axes.len(),
        }
    }

    pub fn build(&self) -> crate::Result<MacGrid> {
        match self {
            GridSpec::Uniform { extent, cells } => MacGrid::uniform(extent, cells),
            GridSpec::Graded { extent, cells, ratio } => MacGrid::graded(extent, cells, ratio),
            GridSpec::Coordinates(axes) => MacGrid::new(axes.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// Registered manufactured solution.
    Mms(String),
    /// Zero initial velocity driven by a constant body force.
    ConstantForce(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub horizon: f64,
    pub steps: usize,
    pub problem: ProblemSpec,
    pub prediction_tolerance: f64,
    pub poisson_tolerance: f64,
    pub max_iterations: usize,
    pub convection: ConvectionScheme,
    pub output_dir: PathBuf,
    /// Field snapshot cadence in steps; 0 disables snapshots.
    pub output_every: usize,
    pub output_format: FieldFormat,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::Uniform { extent: vec![1.0; 3], cells: vec![4; 3] },
            horizon: 1.0,
            steps: 8,
            problem: ProblemSpec::Mms("poly3d".into()),
            prediction_tolerance: DEFAULT_TOLERANCE,
            poisson_tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            convection: ConvectionScheme::Centered,
            output_dir: PathBuf::from("out"),
            output_every: 0,
            output_format: FieldFormat::Csv,
            seed: 20_240_601,
        }
    }
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn scheme_options(&self) -> SchemeOptions {
        SchemeOptions {
            prediction_tolerance: self.prediction_tolerance,
            poisson_tolerance: self.poisson_tolerance,
            max_iterations: self.max_iterations,
            convection: self.convection,
            ..SchemeOptions::default()
        }
    }

    /// Serializes every key; `parse_config(&c.to_text())` returns `c`.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let ulist = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut s = String::from("[grid]\n");
        match &self.grid {
            GridSpec::Uniform { extent, cells } => {
                s += &format!("extent = {}\ncells = {}\n", list(extent), ulist(cells));
            }
            GridSpec::Graded { extent, cells, ratio } => {
                s += &format!("extent = {}\ncells = {}\nratio = {}\n", list(extent), ulist(cells), list(ratio));
            }
            GridSpec::Coordinates(axes) => {
                for (name, axis) in ["x", "y", "z"].iter().zip(axes) {
                    s += &format!("{name} = {}\n", list(axis));
                }
            }
        }
        s += &format!("\n[time]\nT = {:?}\nN = {}\n", self.horizon, self.steps);
        s += "\n[problem]\n";
        match &self.problem {
            ProblemSpec::Mms(name) => s += &format!("name = {name}\n"),
            ProblemSpec::ConstantForce(f) => s += &format!("name = {CONSTANT_FORCE}\nforce = {}\n", list(f)),
        }
        s += &format!(
            "\n[solver]\nprediction_tolerance = {:?}\npoisson_tolerance = {:?}\nmax_iterations = {}\nconvection = {}\n",
            self.prediction_tolerance,
            self.poisson_tolerance,
            self.max_iterations,
            match self.convection {
                ConvectionScheme::Centered => "centered",
                ConvectionScheme::Upwind => "upwind",
            }
        );
        s += &format!(
            "\n[output]\ndir = {}\nevery = {}\nformat = {}\n",
            self.output_dir.display(),
            self.output_every,
            self.output_format.name()
        );
        s += &format!("\n[run]\nseed = {}\n", self.seed);
        s
    }
}

/// One problem found while reading a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    /// `section.key`, or empty for syntax errors.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if !self.key.is_empty() {
            write!(f, "{}: ", self.key)?;
        }
        f.write_str(&self.message)
    }
}

/// All problems found in a configuration, in source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&lines.join("\n"))
    }
}

impl std::error::Error for ConfigErrors {}

impl From<ConfigErrors> for Error {
    fn from(e: ConfigErrors) -> Self {
        Error::Config(e.to_string())
    }
}

struct Entry {
    value: String,
    line: Option<usize>,
}

fn known(section: &str, key: &str) -> bool {
    KEYS.iter().any(|(s, ks)| *s == section && ks.contains(&key))
}

fn lex(text: &str, issues: &mut Vec<ConfigIssue>) -> BTreeMap<(String, String), Entry> {
    let mut map = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = Some(i + 1);
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if KEYS.iter().any(|(s, _)| *s == name.trim()) => section = Some(name.trim().to_string()),
                Some(name) => {
                    issues.push(ConfigIssue { line, key: name.trim().into(), message: "unknown section".into() });
                    // Keys below an unknown section are not reported again.
                    section = Some(String::new());
                }
                None => issues.push(ConfigIssue { line, key: String::new(), message: "malformed section header".into() }),
            }
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            issues.push(ConfigIssue { line, key: String::new(), message: format!("expected key = value, got '{content}'") });
            continue;
        };
        let k = k.trim();
        let Some(sec) = section.as_deref() else {
            issues.push(ConfigIssue { line, key: k.into(), message: "key outside of a section".into() });
            continue;
        };
        if sec.is_empty() {
            continue;
        }
        if !known(sec, k) {
            issues.push(ConfigIssue { line, key: format!("{sec}.{k}"), message: "unknown key".into() });
            continue;
        }
        let prev = map.insert((sec.to_string(), k.to_string()), Entry { value: v.trim().to_string(), line });
        if prev.is_some() {
            issues.push(ConfigIssue { line, key: format!("{sec}.{k}"), message: "duplicate key".into() });
        }
    }
    map
}

fn apply_env<I>(map: &mut BTreeMap<(String, String), Entry>, env: I, issues: &mut Vec<ConfigIssue>)
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (var, value) in vars {
        let target = KEYS.iter().find_map(|(s, ks)| {
            ks.iter()
                .find(|k| format!("{ENV_PREFIX}{}_{}", s.to_uppercase(), k.to_uppercase()) == var)
                .map(|k| (s.to_string(), k.to_string()))
        });
        match target {
            Some(key) => {
                map.insert(key, Entry { value, line: None });
            }
            None => issues.push(ConfigIssue { line: None, key: var, message: "unknown environment override".into() }),
        }
    }
}

struct Reader<'a> {
    map: &'a BTreeMap<(String, String), Entry>,
    issues: &'a mut Vec<ConfigIssue>,
}

impl Reader<'_> {
    fn raw(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.map.get(&(sec.to_string(), key.to_string()))
    }

    fn fail(&mut self, sec: &str, key: &str, message: String) {
        let line = self.raw(sec, key).and_then(|e| e.line);
        self.issues.push(ConfigIssue { line, key: format!("{sec}.{key}"), message });
    }

    fn parse<T: std::str::FromStr>(&mut self, sec: &str, key: &str) -> Option<T> {
        let v = self.raw(sec, key)?.value.clone();
        match v.parse() {
            Ok(x) => Some(x),
            Err(_) => {
                self.fail(sec, key, format!("cannot parse '{v}'"));
                None
            }
        }
    }

    fn list<T: std::str::FromStr>(&mut self, sec: &str, key: &str) -> Option<Vec<T>> {
        let v = self.raw(sec, key)?.value.clone();
        let items: Result<Vec<T>, _> = v.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(str::parse).collect();
        match items {
            Ok(x) if !x.is_empty() => Some(x),
            _ => {
                self.fail(sec, key, format!("cannot parse list '{v}'"));
                None
            }
        }
    }
}

fn on_unit_domain(grid: &GridSpec) -> bool {
    match grid {
        GridSpec::Uniform { extent, .. } | GridSpec::Graded { extent, .. } => extent.iter().all(|&l| l == 1.0),
        GridSpec::Coordinates(axes) => axes.iter().all(|a| a.first() == Some(&0.0) && a.last() == Some(&1.0)),
    }
}

/// Parses a configuration, filling defaults for absent keys.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    parse_config_with_env(text, std::iter::empty())
}

/// [`parse_config`] followed by `MACPROJ_*` overrides from `env`.
pub fn parse_config_with_env<I>(text: &str, env: I) -> Result<RunConfig, ConfigErrors>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut issues = Vec::new();
    let mut map = lex(text, &mut issues);
    apply_env(&mut map, env, &mut issues);
    let mut r = Reader { map: &map, issues: &mut issues };
    let mut c = RunConfig::default();

    let coords: Vec<(&str, Option<Vec<f64>>)> = ["x", "y", "z"].iter().map(|&k| (k, r.list::<f64>("grid", k))).collect();
    let any_coords = ["x", "y", "z"].iter().any(|k| r.raw("grid", k).is_some());
    let extent = r.list::<f64>("grid", "extent");
    let cells = r.list::<usize>("grid", "cells");
    let ratio = r.list::<f64>("grid", "ratio");
    if any_coords {
        for k in ["extent", "cells", "ratio"] {
            if r.raw("grid", k).is_some() {
                r.fail("grid", k, "cannot be combined with coordinate lists".into());
            }
        }
        let axes: Vec<Vec<f64>> = coords.into_iter().map_while(|(_, v)| v).collect();
        if axes.len() < 2 || (r.raw("grid", "y").is_none()) {
            r.fail("grid", "x", "coordinate lists need x and y (and optionally z)".into());
        } else {
            c.grid = GridSpec::Coordinates(axes);
        }
    } else {
        let cells = cells.unwrap_or_else(|| vec![4; extent.as_ref().map_or(3, |e| e.len())]);
        let extent = extent.unwrap_or_else(|| vec![1.0; cells.len()]);
        if !(2..=3).contains(&cells.len()) {
            r.fail("grid", "cells", format!("need 2 or 3 axes, got {}", cells.len()));
        }
        if cells.iter().any(|&n| n < 2) {
            r.fail("grid", "cells", "every axis needs at least two cells".into());
        }
        if extent.len() != cells.len() {
            r.fail("grid", "extent", format!("has {} entries but cells has {}", extent.len(), cells.len()));
        }
        if extent.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            r.fail("grid", "extent", "extents must be positive".into());
        }
        c.grid = match ratio {
            Some(ratio) => {
                if ratio.len() != cells.len() {
                    r.fail("grid", "ratio", format!("has {} entries but cells has {}", ratio.len(), cells.len()));
                }
                if ratio.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
                    r.fail("grid", "ratio", "stretch ratios must be positive".into());
                }
                GridSpec::Graded { extent, cells, ratio }
            }
            None => GridSpec::Uniform { extent, cells },
        };
    }

    if let Some(t) = r.parse::<f64>("time", "T") {
        if !(t > 0.0 && t.is_finite()) {
            r.fail("time", "T", "T must be positive".into());
        }
        c.horizon = t;
    }
    if let Some(n) = r.parse::<usize>("time", "N") {
        if n == 0 {
            r.fail("time", "N", "N must be at least 1".into());
        }
        c.steps = n;
    }

    let name = r.raw("problem", "name").map(|e| e.value.clone());
    let force = r.list::<f64>("problem", "force");
    let dim = c.grid.dim();
    match name.as_deref() {
        Some(CONSTANT_FORCE) => {
            let f = force.unwrap_or_else(|| vec![0.0; dim]);
            if f.len() != dim {
                r.fail("problem", "force", format!("needs {dim} components, got {}", f.len()));
            }
            c.problem = ProblemSpec::ConstantForce(f);
        }
        other => {
            if force.is_some() {
                r.fail("problem", "force", format!("only valid with name = {CONSTANT_FORCE}"));
            }
            let n = other.map(str::to_string).unwrap_or_else(|| if dim == 2 { "poly2d".into() } else { "poly3d".into() });
            if !PROBLEMS.contains(&n.as_str()) {
                r.fail("problem", "name", format!("unknown problem '{n}' (known: {}, {CONSTANT_FORCE})", PROBLEMS.join(", ")));
            } else if !n.ends_with(&format!("{dim}d")) {
                r.fail("problem", "name", format!("problem '{n}' does not match the {dim}D grid"));
            } else if !on_unit_domain(&c.grid) {
                r.fail("problem", "name", format!("problem '{n}' is defined on the unit square or cube only"));
            }
            c.problem = ProblemSpec::Mms(n);
        }
    }

    for key in ["prediction_tolerance", "poisson_tolerance"] {
        if let Some(t) = r.parse::<f64>("solver", key) {
            if !(t > 0.0 && t < 1.0) {
                r.fail("solver", key, "tolerance must lie in (0, 1)".into());
            }
            if key == "prediction_tolerance" {
                c.prediction_tolerance = t;
            } else {
                c.poisson_tolerance = t;
            }
        }
    }
    if let Some(m) = r.parse::<usize>("solver", "max_iterations") {
        if m == 0 {
            r.fail("solver", "max_iterations", "must be at least 1".into());
        }
        c.max_iterations = m;
    }
    if let Some(e) = r.raw("solver", "convection") {
        match e.value.as_str() {
            "centered" => c.convection = ConvectionScheme::Centered,
            "upwind" => c.convection = ConvectionScheme::Upwind,
            v => {
                let v = v.to_string();
                r.fail("solver", "convection", format!("expected centered or upwind, got '{v}'"));
            }
        }
    }

    if let Some(e) = r.raw("output", "dir") {
        c.output_dir = PathBuf::from(&e.value);
    }
    if let Some(k) = r.parse::<usize>("output", "every") {
        c.output_every = k;
    }
    if let Some(e) = r.raw("output", "format") {
        match FieldFormat::from_name(&e.value) {
            Some(f) => c.output_format = f,
            None => {
                let v = e.value.clone();
                r.fail("output", "format", format!("expected csv or vtk, got '{v}'"));
            }
        }
    }
    if let Some(s) = r.parse::<u64>("run", "seed") {
        c.seed = s;
    }

    if issues.is_empty() {
        if let Err(e) = c.grid.build() {
            issues.push(ConfigIssue { line: None, key: "grid".into(), message: e.to_string() });
        }
    }
    if issues.is_empty() {
        Ok(c)
    } else {
        Err(ConfigErrors(issues))
    }
}
