use std::path::Path;

use crate::csl::Checker;
use crate::ctmc::build_state_space;
use crate::error::{Error, Loc, Result};
use crate::fmt::format_sig;
use crate::lang::ast::{ConstDecl, ModelAst};
use crate::lang::bind::{bind_constants, Bindings};
use crate::lang::{parse_model, parse_property, Property};
use crate::numerics::NumericOptions;
use crate::ram::models::bundled_model;
use crate::ram::sweep::{parse_sweep, run_experiment_sweep, SweepSpec};

pub const MANIFEST_NAMES: [&str; 6] = [
    "single-reliability",
    "single-maintainability",
    "single-availability",
    "constellation-reliability",
    "constellation-maintainability",
    "constellation-availability",
];

pub fn bundled_manifest(name: &str) -> Option<&'static str> {
    Some(match name {
        "single-reliability" => include_str!("../../manifests/single-reliability.manifest"),
        "single-maintainability" => include_str!("../../manifests/single-maintainability.manifest"),
        "single-availability" => include_str!("../../manifests/single-availability.manifest"),
        "constellation-reliability" => include_str!("../../manifests/constellation-reliability.manifest"),
        "constellation-maintainability" => include_str!("../../manifests/constellation-maintainability.manifest"),
        "constellation-availability" => include_str!("../../manifests/constellation-availability.manifest"),
        _ => return None,
    })
}

/// A block of queries, evaluated once (`[check]`) or over a sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub sweeps: Vec<SweepSpec>,
    pub queries: Vec<Property>,
}

/// An experiment: model, shared constants, and query sections.
///
/// ```text
/// model = satellite
/// const T = 129600
///
/// [check]
/// query = P=?[F<=T s=5]
///
/// [sweep replace-vs-r]
/// sweep = r=0.01:0.99:0.05
/// query = R{"num_replace"}=?[C<=T]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub name: String,
    pub model: String,
    pub constants: Vec<ConstDecl>,
    pub overrides: Bindings,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestOutput {
    /// File name, `<manifest>-<section>.csv`.
    pub file: String,
    pub csv: String,
}

impl Manifest {
    pub fn parse(name: &str, src: &str) -> Result<Manifest> {
        let mut m = Manifest {
            name: name.to_string(),
            model: String::new(),
            constants: Vec::new(),
            overrides: Bindings::new(),
            sections: Vec::new(),
        };
        for (i, raw) in src.lines().enumerate() {
            let loc = Loc { line: i + 1, col: 1 };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = match header.split_whitespace().collect::<Vec<_>>()[..] {
                    ["check"] => "check".to_string(),
                    ["sweep", n] => n.to_string(),
                    _ => return Err(Error::syntax(loc, format!("bad section header `{line}`"))),
                };
                m.sections.push(Section {
                    name,
                    sweeps: Vec::new(),
                    queries: Vec::new(),
                });
                continue;
            }
            if let Some(decl) = line.strip_prefix("const ") {
                let ast = parse_model(&format!("const double {decl};")).map_err(|e| relocate(e, loc))?;
                m.constants.extend(ast.constants);
                continue;
            }
            if let Some(assign) = line.strip_prefix("set ") {
                if !m.sections.is_empty() {
                    return Err(Error::syntax(loc, "`set` must precede the first section"));
                }
                let (k, v) = assign
                    .split_once('=')
                    .ok_or_else(|| Error::syntax(loc, "expected set name = value"))?;
                let v = crate::lang::Value::parse(v.trim())
                    .ok_or_else(|| Error::syntax(loc, format!("bad value `{}`", v.trim())))?;
                m.overrides.insert(k.trim().to_string(), v);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::syntax(loc, format!("expected key = value, got `{line}`")))?;
            match (key, m.sections.last_mut()) {
                ("model", None) => m.model = value.to_string(),
                ("query", Some(s)) => s.queries.push(parse_property(value).map_err(|e| relocate(e, loc))?),
                ("sweep", Some(s)) => s.sweeps.push(parse_sweep(value)?),
                _ => return Err(Error::syntax(loc, format!("unexpected key `{key}`"))),
            }
        }
        if m.model.is_empty() {
            return Err(Error::Semantic {
                loc: Loc { line: 1, col: 1 },
                msg: "manifest does not name a model".into(),
            });
        }
        Ok(m)
    }

    pub fn bundled(name: &str) -> Result<Manifest> {
        let src = bundled_manifest(name).ok_or_else(|| {
            Error::Domain(format!("unknown experiment `{name}`; available: {}", MANIFEST_NAMES.join(", ")))
        })?;
        Manifest::parse(name, src)
    }

    /// Loads the model by bundled name or path (relative to `dir`).
    pub fn load_model(&self, dir: Option<&Path>) -> Result<ModelAst> {
        if let Some(src) = bundled_model(&self.model) {
            return parse_model(src);
        }
        let path = dir.map_or_else(|| Path::new(&self.model).to_path_buf(), |d| d.join(&self.model));
        let src = std::fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_model(&src)
    }

    /// Runs every section. Outputs are byte-for-byte reproducible.
    pub fn run(&self, dir: Option<&Path>, opts: &NumericOptions, jobs: usize, full: bool) -> Result<Vec<ManifestOutput>> {
        let ast = self.load_model(dir)?;
        let mut out = Vec::new();
        for s in &self.sections {
            let csv = if s.sweeps.is_empty() {
                self.run_check(&ast, s, opts, full)?
            } else {
                run_experiment_sweep(&ast, &self.constants, &s.queries, &s.sweeps, &self.overrides, opts, jobs)?
                    .to_csv(full)?
            };
            out.push(ManifestOutput {
                file: format!("{}-{}.csv", self.name, s.name),
                csv,
            });
        }
        Ok(out)
    }

    fn run_check(&self, ast: &ModelAst, s: &Section, opts: &NumericOptions, full: bool) -> Result<String> {
        let model_b: Bindings = self
            .overrides
            .iter()
            .filter(|(k, _)| ast.constant(k).is_some())
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let prop_b: Bindings = self
            .overrides
            .iter()
            .filter(|(k, _)| ast.constant(k).is_none())
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let built = build_state_space(&bind_constants(ast, &model_b)?)?;
        let checker = Checker::new(&built, *opts).with_constants(&self.constants, &prop_b)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["query", "value"])?;
        for q in &s.queries {
            let v = checker.check(q)?;
            w.write_record([q.text.clone(), format_sig(v.value(), if full { 17 } else { 6 })])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Eval(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Query texts of the `[check]` sections.
    pub fn check_queries(&self) -> Vec<&Property> {
        self.sections
            .iter()
            .filter(|s| s.sweeps.is_empty())
            .flat_map(|s| &s.queries)
            .collect()
    }
}

fn relocate(e: Error, at: Loc) -> Error {
    match e {
        Error::Syntax { loc, msg } => Error::Syntax {
            loc: Loc {
                line: at.line,
                col: loc.col,
            },
            msg,
        },
        other => other,
    }
}
