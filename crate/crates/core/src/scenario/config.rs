//! Scenario descriptions: a sectioned TOML document parsed into a validated
//! [`ScenarioConfig`], and the canonical text it serializes back to.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use toml::{Spanned, Table, Value};

use crate::analysis::{DEFAULT_FLOOR, DEFAULT_TOLERANCE};
use crate::domain::{PhaseSpaceGrid, PhysicalParams, Potential};
use crate::error::{ConfigIssue, Error, Result};
use crate::propagate::{Engine, PropagatorConfig, Scheme};
use crate::states::{check_gaussian, GaussianSpec};

/// Where the initial state comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Gaussian(GaussianSpec),
    /// A snapshot file; relative paths are resolved against the config file.
    Snapshot {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Relative drift tolerance handed to the classifier.
    pub tolerance: f64,
    pub floor: f64,
    /// Write a heat-map matrix next to every snapshot.
    pub heatmaps: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: PhaseSpaceGrid,
    pub params: PhysicalParams,
    pub potential: Potential,
    pub initial: InitialSpec,
    pub propagation: PropagatorConfig,
    pub output: OutputSpec,
}

impl ScenarioConfig {
    /// Parameters the initial state is built with: the classical engines
    /// carry amplitudes at kappa = 0.
    pub fn state_params(&self) -> PhysicalParams {
        PhysicalParams {
            kappa: self.propagation.engine.effective_kappa(&self.params),
            ..self.params
        }
    }

    /// Total simulated time.
    pub fn duration(&self) -> f64 {
        self.propagation.dt * self.propagation.n_steps as f64
    }
}

type Document = BTreeMap<String, Spanned<BTreeMap<String, Spanned<Value>>>>;

const SECTIONS: [&str; 6] = [
    "grid",
    "params",
    "potential",
    "initial",
    "propagation",
    "output",
];

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|b| **b == b'\n')
        .count()
        + 1
}

/// One `[section]` of the document with bookkeeping for unknown keys.
struct Section<'a> {
    name: &'static str,
    text: &'a str,
    line: Option<usize>,
    entries: BTreeMap<String, Spanned<Value>>,
    used: BTreeSet<String>,
    issues: &'a mut Vec<ConfigIssue>,
}

impl<'a> Section<'a> {
    fn new(
        name: &'static str,
        doc: &mut Document,
        text: &'a str,
        issues: &'a mut Vec<ConfigIssue>,
    ) -> Self {
        let (line, entries) = match doc.remove(name) {
            Some(sec) => {
                let line = Some(line_of(text, sec.span().start));
                (line, sec.into_inner())
            }
            None => (None, BTreeMap::new()),
        };
        Self {
            name,
            text,
            line,
            entries,
            used: BTreeSet::new(),
            issues,
        }
    }

    fn key_line(&self, key: &str) -> Option<usize> {
        self.entries
            .get(key)
            .map(|v| line_of(self.text, v.span().start))
            .or(self.line)
    }

    fn issue(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.issues.push(ConfigIssue::new(line, message));
    }

    /// Reports an invariant violation on the first key it names, or on the
    /// section header.
    fn invariant(&mut self, message: String) {
        let line = self
            .entries
            .keys()
            .filter(|k| message.contains(k.as_str()))
            .max_by_key(|k| k.len())
            .and_then(|k| self.key_line(k))
            .or(self.line);
        let name = self.name;
        self.issue(line, format!("[{name}] {message}"));
    }

    fn raw(&mut self, key: &str, required: bool) -> Option<(Value, Option<usize>)> {
        self.used.insert(key.to_string());
        match self.entries.get(key) {
            Some(v) => Some((v.get_ref().clone(), self.key_line(key))),
            None => {
                if required {
                    let (name, line) = (self.name, self.line);
                    self.issue(line, format!("missing required key {name}.{key}"));
                }
                None
            }
        }
    }

    fn type_error(&mut self, key: &str, line: Option<usize>, expected: &str, got: &Value) {
        let name = self.name;
        self.issue(
            line,
            format!("{name}.{key} must be {expected}, got {}", got.type_str()),
        );
    }

    fn float_opt(&mut self, key: &str, required: bool) -> Option<f64> {
        let (v, line) = self.raw(key, required)?;
        match v {
            Value::Float(f) => Some(f),
            Value::Integer(i) => Some(i as f64),
            other => {
                self.type_error(key, line, "a number", &other);
                None
            }
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        self.float_opt(key, true)
    }

    fn count_opt(&mut self, key: &str, required: bool) -> Option<usize> {
        let (v, line) = self.raw(key, required)?;
        match v {
            Value::Integer(i) if i >= 0 => Some(i as usize),
            Value::Integer(i) => {
                let name = self.name;
                self.issue(line, format!("{name}.{key} must be non-negative, got {i}"));
                None
            }
            other => {
                self.type_error(key, line, "an integer", &other);
                None
            }
        }
    }

    fn count(&mut self, key: &str) -> Option<usize> {
        self.count_opt(key, true)
    }

    fn string_opt(&mut self, key: &str, required: bool) -> Option<String> {
        let (v, line) = self.raw(key, required)?;
        match v {
            Value::String(s) => Some(s),
            other => {
                self.type_error(key, line, "a string", &other);
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.string_opt(key, true)
    }

    fn bool_opt(&mut self, key: &str) -> Option<bool> {
        let (v, line) = self.raw(key, false)?;
        match v {
            Value::Boolean(b) => Some(b),
            other => {
                self.type_error(key, line, "a boolean", &other);
                None
            }
        }
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let (v, line) = self.raw(key, true)?;
        let Value::Array(items) = v else {
            self.type_error(key, line, "an array of numbers", &v);
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(f) => out.push(f),
                Value::Integer(i) => out.push(i as f64),
                other => {
                    self.type_error(key, line, "an array of numbers", &other);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn finish(self) {
        let unknown: Vec<_> = self
            .entries
            .iter()
            .filter(|(k, _)| !self.used.contains(*k))
            .map(|(k, v)| (k.clone(), line_of(self.text, v.span().start)))
            .collect();
        for (key, line) in unknown {
            self.issues.push(ConfigIssue::new(
                Some(line),
                format!("unknown key {}.{key}", self.name),
            ));
        }
    }
}

/// Parses and validates a scenario document, collecting every problem found.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut doc: Document = match toml::from_str(text) {
        Ok(doc) => doc,
        Err(e) => {
            let line = e.span().map(|s| line_of(text, s.start));
            return Err(Error::Config(vec![ConfigIssue::new(
                line,
                e.message().to_string(),
            )]));
        }
    };
    let mut issues = Vec::new();
    let unknown_sections: Vec<_> = doc
        .iter()
        .filter(|(k, _)| !SECTIONS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), line_of(text, v.span().start)))
        .collect();
    for (name, line) in unknown_sections {
        issues.push(ConfigIssue::new(
            Some(line),
            format!("unknown section [{name}]"),
        ));
    }

    let grid = {
        let mut s = Section::new("grid", &mut doc, text, &mut issues);
        let fields = (
            s.count("nx"),
            s.count("np"),
            s.float("x_min"),
            s.float("x_max"),
            s.float("p_min"),
            s.float("p_max"),
        );
        let grid = match fields {
            (Some(nx), Some(np), Some(x0), Some(x1), Some(p0), Some(p1)) => {
                match PhaseSpaceGrid::new(nx, np, x0, x1, p0, p1) {
                    Ok(g) => Some(g),
                    Err(e) => {
                        s.invariant(strip_kind(&e));
                        None
                    }
                }
            }
            _ => None,
        };
        s.finish();
        grid
    };

    let params = {
        let mut s = Section::new("params", &mut doc, text, &mut issues);
        let fields = (s.float("hbar"), s.float("mass"), s.float("kappa"));
        let params = match fields {
            (Some(hbar), Some(mass), Some(kappa)) => match PhysicalParams::new(hbar, mass, kappa) {
                Ok(p) => Some(p),
                Err(e) => {
                    s.invariant(strip_kind(&e));
                    None
                }
            },
            _ => None,
        };
        s.finish();
        params
    };

    let potential = {
        let mut s = Section::new("potential", &mut doc, text, &mut issues);
        let pot = match s.string("family").as_deref() {
            Some("free") => Some(Potential::Free),
            Some("harmonic") => match (s.float("mass"), s.float("omega")) {
                (Some(mass), Some(omega)) => Some(Potential::Harmonic { mass, omega }),
                _ => None,
            },
            Some("morse") => match (s.float("depth"), s.float("width")) {
                (Some(depth), Some(width)) => Some(Potential::Morse { depth, width }),
                _ => None,
            },
            Some("polynomial") => s
                .floats("coefficients")
                .map(|coefficients| Potential::Polynomial { coefficients }),
            Some(other) => {
                let line = s.key_line("family");
                s.issue(
                    line,
                    format!("potential.family must be one of free, harmonic, morse, polynomial; got {other:?}"),
                );
                None
            }
            None => None,
        };
        let pot = pot.and_then(|p| match p.validate() {
            Ok(()) => Some(p),
            Err(e) => {
                s.invariant(strip_kind(&e));
                None
            }
        });
        s.finish();
        pot
    };

    let propagation = {
        let mut s = Section::new("propagation", &mut doc, text, &mut issues);
        let engine = s.string("engine").and_then(|name| match Engine::parse(&name) {
            Some(e) => Some(e),
            None => {
                let line = s.key_line("engine");
                s.issue(
                    line,
                    format!("propagation.engine must be one of unified, kvn, liouville; got {name:?}"),
                );
                None
            }
        });
        let scheme = match s.string_opt("scheme", false).as_deref() {
            None | Some("strang") => Some(Scheme::Strang),
            Some(other) => {
                let line = s.key_line("scheme");
                s.issue(
                    line,
                    format!("propagation.scheme must be \"strang\", got {other:?}"),
                );
                None
            }
        };
        let fields = (s.float("dt"), s.count("n_steps"), s.count("record_every"));
        let snapshot_every = s.count_opt("snapshot_every", false);
        let config = match (engine, scheme, fields) {
            (Some(engine), Some(scheme), (Some(dt), Some(n), Some(every))) => {
                let config = PropagatorConfig {
                    dt,
                    n_steps: n,
                    record_every: every,
                    snapshot_every,
                    scheme,
                    engine,
                };
                match config.validate() {
                    Ok(()) => Some(config),
                    Err(e) => {
                        s.invariant(strip_kind(&e));
                        None
                    }
                }
            }
            _ => None,
        };
        s.finish();
        config
    };

    let initial = {
        let mut s = Section::new("initial", &mut doc, text, &mut issues);
        let initial = match s.string("kind").as_deref() {
            Some("gaussian") => {
                let fields = (s.float("x0"), s.float("p0"), s.float("sigma_x"));
                let order = s.count_opt("hermite_order", false).unwrap_or(0);
                match fields {
                    (Some(x0), Some(p0), Some(sigma_x)) => {
                        if order > 1 {
                            let line = s.key_line("hermite_order");
                            s.issue(
                                line,
                                format!("initial.hermite_order must be 0 or 1, got {order}"),
                            );
                            None
                        } else {
                            Some(InitialSpec::Gaussian(GaussianSpec {
                                x0,
                                p0,
                                sigma_x,
                                hermite_order: order as u8,
                            }))
                        }
                    }
                    _ => None,
                }
            }
            Some("snapshot") => s.string("path").map(|p| InitialSpec::Snapshot {
                path: PathBuf::from(p),
            }),
            Some(other) => {
                let line = s.key_line("kind");
                s.issue(
                    line,
                    format!("initial.kind must be gaussian or snapshot, got {other:?}"),
                );
                None
            }
            None => None,
        };
        // The footprint check needs the grid and the engine's parameters.
        if let (Some(InitialSpec::Gaussian(spec)), Some(grid), Some(params), Some(prop)) =
            (&initial, &grid, &params, &propagation)
        {
            let eff = PhysicalParams {
                kappa: prop.engine.effective_kappa(params),
                ..*params
            };
            if let Err(e) = check_gaussian(spec, &eff, grid) {
                s.invariant(strip_kind(&e));
            }
        }
        s.finish();
        initial
    };

    let output = {
        let mut s = Section::new("output", &mut doc, text, &mut issues);
        let dir = s.string("dir").map(PathBuf::from);
        let tolerance = s.float_opt("tolerance", false).unwrap_or(DEFAULT_TOLERANCE);
        let floor = s.float_opt("floor", false).unwrap_or(DEFAULT_FLOOR);
        let heatmaps = s.bool_opt("heatmaps").unwrap_or(true);
        if !(tolerance.is_finite() && tolerance > 0.0) {
            s.invariant(format!("tolerance must be > 0, got {tolerance}"));
        }
        if !(floor.is_finite() && floor >= 0.0) {
            s.invariant(format!("floor must be >= 0, got {floor}"));
        }
        s.finish();
        dir.map(|dir| OutputSpec {
            dir,
            tolerance,
            floor,
            heatmaps,
        })
    };

    match (grid, params, potential, initial, propagation, output) {
        (
            Some(grid),
            Some(params),
            Some(potential),
            Some(initial),
            Some(propagation),
            Some(output),
        ) if issues.is_empty() => Ok(ScenarioConfig {
            grid,
            params,
            potential,
            initial,
            propagation,
            output,
        }),
        _ => {
            issues.sort_by_key(|i| i.line.unwrap_or(0));
            Err(Error::Config(issues))
        }
    }
}

/// Error text without the variant prefix, e.g. `kappa must lie in [0,1], got 1.5`.
fn strip_kind(e: &Error) -> String {
    match e {
        Error::Grid(m)
        | Error::Params(m)
        | Error::Potential(m)
        | Error::Propagator(m)
        | Error::State(m) => m.clone(),
        Error::Footprint(m) => format!("initial-state footprint exceeds the grid: {m}"),
        other => other.to_string(),
    }
}

/// Reads and parses a config file; a relative snapshot path in `[initial]`
/// is resolved against the file's directory.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_config(&text)?;
    if let InitialSpec::Snapshot { path: snap } = &mut config.initial {
        if snap.is_relative() {
            if let Some(base) = path.parent() {
                *snap = base.join(&*snap);
            }
        }
    }
    Ok(config)
}

fn float(v: f64) -> Value {
    Value::Float(v)
}

fn int(v: usize) -> Value {
    Value::Integer(v as i64)
}

/// Canonical text of a config. Parsing it yields an equal config.
pub fn to_toml_string(config: &ScenarioConfig) -> String {
    let mut doc = Table::new();

    let g = &config.grid;
    let mut grid = Table::new();
    grid.insert("nx".into(), int(g.nx));
    grid.insert("np".into(), int(g.np));
    grid.insert("x_min".into(), float(g.x_min));
    grid.insert("x_max".into(), float(g.x_max));
    grid.insert("p_min".into(), float(g.p_min));
    grid.insert("p_max".into(), float(g.p_max));
    doc.insert("grid".into(), Value::Table(grid));

    let mut params = Table::new();
    params.insert("hbar".into(), float(config.params.hbar));
    params.insert("mass".into(), float(config.params.mass));
    params.insert("kappa".into(), float(config.params.kappa));
    doc.insert("params".into(), Value::Table(params));

    let mut pot = Table::new();
    match &config.potential {
        Potential::Free => {
            pot.insert("family".into(), "free".into());
        }
        Potential::Harmonic { mass, omega } => {
            pot.insert("family".into(), "harmonic".into());
            pot.insert("mass".into(), float(*mass));
            pot.insert("omega".into(), float(*omega));
        }
        Potential::Morse { depth, width } => {
            pot.insert("family".into(), "morse".into());
            pot.insert("depth".into(), float(*depth));
            pot.insert("width".into(), float(*width));
        }
        Potential::Polynomial { coefficients } => {
            pot.insert("family".into(), "polynomial".into());
            pot.insert(
                "coefficients".into(),
                Value::Array(coefficients.iter().map(|c| float(*c)).collect()),
            );
        }
    }
    doc.insert("potential".into(), Value::Table(pot));

    let mut init = Table::new();
    match &config.initial {
        InitialSpec::Gaussian(spec) => {
            init.insert("kind".into(), "gaussian".into());
            init.insert("x0".into(), float(spec.x0));
            init.insert("p0".into(), float(spec.p0));
            init.insert("sigma_x".into(), float(spec.sigma_x));
            init.insert("hermite_order".into(), int(spec.hermite_order as usize));
        }
        InitialSpec::Snapshot { path } => {
            init.insert("kind".into(), "snapshot".into());
            init.insert("path".into(), path.to_string_lossy().into_owned().into());
        }
    }
    doc.insert("initial".into(), Value::Table(init));

    let p = &config.propagation;
    let mut prop = Table::new();
    prop.insert("engine".into(), p.engine.name().into());
    prop.insert("scheme".into(), "strang".into());
    prop.insert("dt".into(), float(p.dt));
    prop.insert("n_steps".into(), int(p.n_steps));
    prop.insert("record_every".into(), int(p.record_every));
    if let Some(every) = p.snapshot_every {
        prop.insert("snapshot_every".into(), int(every));
    }
    doc.insert("propagation".into(), Value::Table(prop));

    let o = &config.output;
    let mut out = Table::new();
    out.insert("dir".into(), o.dir.to_string_lossy().into_owned().into());
    out.insert("tolerance".into(), float(o.tolerance));
    out.insert("floor".into(), float(o.floor));
    out.insert("heatmaps".into(), Value::Boolean(o.heatmaps));
    doc.insert("output".into(), Value::Table(out));

    toml::to_string(&doc).expect("a table of plain values always serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
nx = 32
np = 32
x_min = -6.0
x_max = 6.0
p_min = -6.0
p_max = 6.0

[params]
hbar = 1.0
mass = 1.0
kappa = 1.0

[potential]
family = "harmonic"
mass = 1.0
omega = 1.0

[initial]
kind = "gaussian"
x0 = 0.5
p0 = 0.0
sigma_x = 0.7071067811865476

[propagation]
engine = "unified"
dt = 0.01
n_steps = 10
record_every = 5

[output]
dir = "out/minimal"
"#;

    fn messages(err: Error) -> Vec<ConfigIssue> {
        match err {
            Error::Config(issues) => issues,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn minimal_document_parses_with_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.grid.nx, 32);
        assert_eq!(c.output.tolerance, DEFAULT_TOLERANCE);
        assert!(c.output.heatmaps);
        assert_eq!(c.propagation.snapshot_every, None);
        assert_eq!(
            c.potential,
            Potential::Harmonic {
                mass: 1.0,
                omega: 1.0
            }
        );
    }

    #[test]
    fn empty_document_lists_required_keys() {
        let issues = messages(parse_config("").unwrap_err());
        let text: Vec<String> = issues.iter().map(|i| i.message.clone()).collect();
        for key in [
            "grid.nx",
            "grid.p_max",
            "params.hbar",
            "params.kappa",
            "potential.family",
            "initial.kind",
            "propagation.engine",
            "propagation.dt",
            "output.dir",
        ] {
            assert!(
                text.iter()
                    .any(|m| m == &format!("missing required key {key}")),
                "{key} not reported in {text:?}"
            );
        }
    }

    #[test]
    fn kappa_out_of_range_is_reported_on_its_line() {
        let doc = MINIMAL.replace("kappa = 1.0", "kappa = 1.5");
        let issues = messages(parse_config(&doc).unwrap_err());
        let line = doc.lines().position(|l| l.starts_with("kappa")).unwrap() + 1;
        let issue = issues
            .iter()
            .find(|i| i.message.contains("kappa must lie in [0,1]"))
            .unwrap();
        assert_eq!(issue.line, Some(line));
    }

    #[test]
    fn every_problem_is_collected() {
        let doc = MINIMAL
            .replace("nx = 32", "nx = 31")
            .replace("engine = \"unified\"", "engine = \"moyal\"")
            .replace("[output]", "[output]\ncolour = \"blue\"")
            + "\n[extra]\nx = 1\n";
        let issues = messages(parse_config(&doc).unwrap_err());
        let all = issues
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("\n");
        assert!(all.contains("nx must be even"), "{all}");
        assert!(all.contains("propagation.engine must be one of"), "{all}");
        assert!(all.contains("unknown key output.colour"), "{all}");
        assert!(all.contains("unknown section [extra]"), "{all}");
        assert!(issues.iter().all(|i| i.line.is_some()), "{all}");
    }

    #[test]
    fn type_errors_and_syntax_errors_have_lines() {
        let doc = MINIMAL.replace("dt = 0.01", "dt = \"small\"");
        let issues = messages(parse_config(&doc).unwrap_err());
        assert!(issues[0]
            .message
            .contains("propagation.dt must be a number"));
        assert!(issues[0].line.is_some());

        let issues = messages(parse_config("[grid]\nnx = = 3\n").unwrap_err());
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].line, Some(2));
    }

    #[test]
    fn footprint_is_checked_at_load() {
        let doc = MINIMAL.replace("x0 = 0.5", "x0 = 5.5");
        let all = messages(parse_config(&doc).unwrap_err())
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("\n");
        assert!(all.contains("footprint"), "{all}");
    }

    #[test]
    fn record_every_must_divide_steps() {
        let doc = MINIMAL.replace("record_every = 5", "record_every = 3");
        let all = messages(parse_config(&doc).unwrap_err())
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("\n");
        assert!(
            all.contains("record_every (3) must divide n_steps (10)"),
            "{all}"
        );
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = parse_config(MINIMAL).unwrap();
        let text = to_toml_string(&c);
        let again = parse_config(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(to_toml_string(&again), text);
    }

    #[test]
    fn polynomial_and_snapshot_variants_round_trip() {
        let doc = MINIMAL
            .replace(
                "family = \"harmonic\"\nmass = 1.0\nomega = 1.0",
                "family = \"polynomial\"\ncoefficients = [0.0, 0, 0.5, 1e-3]",
            )
            .replace(
                "kind = \"gaussian\"\nx0 = 0.5\np0 = 0.0\nsigma_x = 0.7071067811865476",
                "kind = \"snapshot\"\npath = \"snap_000000.wps\"",
            );
        let c = parse_config(&doc).unwrap();
        assert_eq!(
            c.potential,
            Potential::Polynomial {
                coefficients: vec![0.0, 0.0, 0.5, 1e-3]
            }
        );
        assert_eq!(parse_config(&to_toml_string(&c)).unwrap(), c);
    }
}
