//! JSON interchange format for alphabets, pmfs, kernels, and fully bound
//! systems.
//!
//! ```json
//! {
//!   "alphabets": { "bit": { "size": 2 } },
//!   "dists":     { "state": { "alphabet": ["unit", "bit"], "probs": [0.75, 0.25] } },
//!   "kernels":   { "chan": { "from": ["bit", "bit"], "to": ["bit", "bit"],
//!                            "rows": [[1,0,0,0], ...] } },
//!   "system":    { "state_joint": "state", "u_given_se": "...", "x_given_use": "...",
//!                  "channel": "...", "estimator": "...", "distortion": "hamming" }
//! }
//! ```
//!
//! A dist whose `alphabet` is a list is a joint over the product, row-major
//! with the last axis fastest. Kernel `rows` are indexed the same way over
//! the `from` product. The optional `system` section binds named factors to
//! the five roles of an [`IsacSystem`]; `distortion` is either the string
//! `"hamming"` or an explicit `|S| × |Shat|` matrix.
//!
//! Validation never loads partially: [`parse_document`] either returns a
//! fully checked [`Document`] or an error carrying **every** diagnostic,
//! each tagged with its location (`kernels.chan.rows[3]`, …).

use crate::prob::{Alphabet, Dist, Distortion, Joint, Kernel, NORMALIZATION_TOL};
use crate::regions::IsacSystem;
use crate::{Error, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// One located validation finding.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    /// Dotted path into the JSON document, with bracketed indices.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: {}", self.location, self.message)
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NameOrList {
    One(String),
    Many(Vec<String>),
}

impl NameOrList {
    fn names(&self) -> Vec<&str> {
        match self {
            NameOrList::One(s) => vec![s.as_str()],
            NameOrList::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlphabet {
    size: usize,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDist {
    alphabet: NameOrList,
    probs: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    from: NameOrList,
    to: NameOrList,
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawDistortion {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    state_joint: String,
    u_given_se: String,
    x_given_use: String,
    channel: String,
    estimator: String,
    distortion: RawDistortion,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    #[serde(default)]
    alphabets: BTreeMap<String, RawAlphabet>,
    #[serde(default)]
    dists: BTreeMap<String, RawDist>,
    #[serde(default)]
    kernels: BTreeMap<String, RawKernel>,
    #[serde(default)]
    system: Option<RawSystem>,
}

/// A loaded pmf, possibly over a product of alphabets.
#[derive(Debug, Clone)]
pub struct LoadedDist {
    axis_names: Vec<String>,
    alphabets: Vec<Alphabet>,
    probs: Vec<f64>,
}

impl LoadedDist {
    pub fn n_axes(&self) -> usize {
        self.alphabets.len()
    }

    /// View as a single-alphabet pmf; errors on product dists.
    pub fn to_dist(&self) -> Result<Dist> {
        if self.alphabets.len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "expected a single-alphabet dist, got {} axes",
                self.alphabets.len()
            )));
        }
        Dist::new(self.alphabets[0].clone(), self.probs.clone())
    }

    /// View as a joint; axis names are the alphabet names, deduplicated
    /// with positional suffixes when an alphabet repeats.
    pub fn to_joint(&self) -> Result<Joint> {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let axes = self
            .axis_names
            .iter()
            .zip(&self.alphabets)
            .map(|(name, alphabet)| {
                let n = seen.entry(name.as_str()).or_insert(0);
                *n += 1;
                let axis_name = if *n == 1 {
                    name.clone()
                } else {
                    format!("{name}.{n}")
                };
                (axis_name, alphabet.clone())
            })
            .collect();
        Joint::from_flat(axes, self.probs.clone())
    }
}

/// A fully validated document.
#[derive(Debug)]
pub struct Document {
    alphabets: BTreeMap<String, Alphabet>,
    dists: BTreeMap<String, LoadedDist>,
    kernels: BTreeMap<String, Kernel>,
    system: Option<IsacSystem>,
}

impl Document {
    pub fn alphabet(&self, name: &str) -> Result<&Alphabet> {
        self.alphabets
            .get(name)
            .ok_or_else(|| Error::UnknownAxis(format!("alphabet `{name}`")))
    }

    pub fn dist(&self, name: &str) -> Result<Dist> {
        self.dists
            .get(name)
            .ok_or_else(|| Error::UnknownAxis(format!("dist `{name}`")))?
            .to_dist()
    }

    pub fn joint(&self, name: &str) -> Result<Joint> {
        self.dists
            .get(name)
            .ok_or_else(|| Error::UnknownAxis(format!("dist `{name}`")))?
            .to_joint()
    }

    pub fn kernel(&self, name: &str) -> Result<&Kernel> {
        self.kernels
            .get(name)
            .ok_or_else(|| Error::UnknownAxis(format!("kernel `{name}`")))
    }

    pub fn dist_names(&self) -> impl Iterator<Item = &str> {
        self.dists.keys().map(String::as_str)
    }

    /// The bound system, if the document has a `system` section.
    pub fn system(&self) -> Result<&IsacSystem> {
        self.system
            .as_ref()
            .ok_or_else(|| Error::Precondition("document has no `system` section".into()))
    }
}

/// Validate and load from a string. On any finding, returns
/// [`Error::InvalidDocument`] carrying every diagnostic — nothing loads
/// partially.
pub fn parse_document(text: &str) -> Result<Document> {
    let (doc, diagnostics) = build(text);
    match doc {
        Some(doc) if diagnostics.is_empty() => Ok(doc),
        _ => Err(Error::InvalidDocument {
            diagnostics: diagnostics.iter().map(ToString::to_string).collect(),
        }),
    }
}

/// Validate and load from a file.
pub fn load_document(path: impl AsRef<Path>) -> Result<Document> {
    parse_document(&std::fs::read_to_string(path)?)
}

/// List every violation in a document file; empty means clean. Errors only
/// when the file cannot be read.
pub fn validate_document(path: impl AsRef<Path>) -> Result<Vec<Diagnostic>> {
    Ok(validate_text(&std::fs::read_to_string(path)?))
}

/// List every violation in document text; empty means clean.
pub fn validate_text(text: &str) -> Vec<Diagnostic> {
    build(text).1
}

fn diag(diags: &mut Vec<Diagnostic>, location: impl Into<String>, message: impl Into<String>) {
    diags.push(Diagnostic {
        location: location.into(),
        message: message.into(),
    });
}

fn build(text: &str) -> (Option<Document>, Vec<Diagnostic>) {
    let mut diags: Vec<Diagnostic> = Vec::new();

    let raw: RawDocument = match serde_json::from_str(text) {
        Ok(raw) => raw,
        Err(e) => {
            diag(&mut diags, "document", e.to_string());
            return (None, diags);
        }
    };

    let mut alphabets: BTreeMap<String, Alphabet> = BTreeMap::new();
    for (name, a) in &raw.alphabets {
        let built = match &a.labels {
            Some(labels) => Alphabet::with_labels(a.size, labels.clone()),
            None => Alphabet::new(a.size),
        };
        match built {
            Ok(alphabet) => {
                alphabets.insert(name.clone(), alphabet);
            }
            Err(e) => diag(&mut diags, format!("alphabets.{name}"), e.to_string()),
        }
    }

    // Resolve a name list against the alphabet table, reporting each miss.
    let resolve = |names: &[&str], location: &str, diags: &mut Vec<Diagnostic>| {
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            match alphabets.get(*n) {
                Some(a) => out.push(a.clone()),
                None => diags.push(Diagnostic {
                    location: location.to_string(),
                    message: format!("unknown alphabet `{n}`"),
                }),
            }
        }
        (out.len() == names.len()).then_some(out)
    };

    let check_pmf = |values: &[f64], location: &str, diags: &mut Vec<Diagnostic>| -> bool {
        let mut ok = true;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                diags.push(Diagnostic {
                    location: format!("{location}[{i}]"),
                    message: format!("non-finite value {v}"),
                });
                ok = false;
            } else if v < 0.0 {
                diags.push(Diagnostic {
                    location: format!("{location}[{i}]"),
                    message: format!("negative probability {v:e}"),
                });
                ok = false;
            }
        }
        if ok {
            let sum: f64 = values.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                diags.push(Diagnostic {
                    location: location.to_string(),
                    message: format!("sums to {sum:.17}, more than 1e-12 away from 1"),
                });
                ok = false;
            }
        }
        ok
    };

    let mut dists: BTreeMap<String, LoadedDist> = BTreeMap::new();
    for (name, d) in &raw.dists {
        let names = d.alphabet.names();
        let Some(alpha) = resolve(&names, &format!("dists.{name}.alphabet"), &mut diags) else {
            continue;
        };
        let want: usize = alpha.iter().map(Alphabet::size).product();
        if d.probs.len() != want {
            diag(
                &mut diags,
                format!("dists.{name}.probs"),
                format!("expected {want} probabilities, got {}", d.probs.len()),
            );
            continue;
        }
        if check_pmf(&d.probs, &format!("dists.{name}.probs"), &mut diags) {
            dists.insert(
                name.clone(),
                LoadedDist {
                    axis_names: names.iter().map(|s| s.to_string()).collect(),
                    alphabets: alpha,
                    probs: d.probs.clone(),
                },
            );
        }
    }

    let mut kernels: BTreeMap<String, Kernel> = BTreeMap::new();
    for (name, k) in &raw.kernels {
        let from = resolve(&k.from.names(), &format!("kernels.{name}.from"), &mut diags);
        let to = resolve(&k.to.names(), &format!("kernels.{name}.to"), &mut diags);
        let (Some(from), Some(to)) = (from, to) else {
            continue;
        };
        let want_rows: usize = from.iter().map(Alphabet::size).product();
        let want_cols: usize = to.iter().map(Alphabet::size).product();
        if k.rows.len() != want_rows {
            diag(
                &mut diags,
                format!("kernels.{name}.rows"),
                format!("expected {want_rows} rows, got {}", k.rows.len()),
            );
            continue;
        }
        let mut ok = true;
        for (r, row) in k.rows.iter().enumerate() {
            let location = format!("kernels.{name}.rows[{r}]");
            if row.len() != want_cols {
                diag(
                    &mut diags,
                    location,
                    format!("expected {want_cols} entries, got {}", row.len()),
                );
                ok = false;
                continue;
            }
            ok &= check_pmf(row, &location, &mut diags);
        }
        if !ok {
            continue;
        }
        match Kernel::new(from, to, k.rows.clone()) {
            Ok(kernel) => {
                kernels.insert(name.clone(), kernel);
            }
            Err(e) => diag(&mut diags, format!("kernels.{name}"), e.to_string()),
        }
    }

    let mut system = None;
    if let Some(sys) = &raw.system {
        system = bind_system(sys, &dists, &kernels, &mut diags);
    }

    if diags.is_empty() {
        (
            Some(Document {
                alphabets,
                dists,
                kernels,
                system,
            }),
            diags,
        )
    } else {
        (None, diags)
    }
}

fn bind_system(
    sys: &RawSystem,
    dists: &BTreeMap<String, LoadedDist>,
    kernels: &BTreeMap<String, Kernel>,
    diags: &mut Vec<Diagnostic>,
) -> Option<IsacSystem> {
    let mut missing = false;
    let state = dists.get(&sys.state_joint).or_else(|| {
        diags.push(Diagnostic {
            location: "system.state_joint".into(),
            message: format!("unknown dist `{}`", sys.state_joint),
        });
        missing = true;
        None
    });
    let mut role = |field: &str, name: &str| -> Option<Kernel> {
        kernels.get(name).cloned().or_else(|| {
            diags.push(Diagnostic {
                location: format!("system.{field}"),
                message: format!("unknown kernel `{name}`"),
            });
            missing = true;
            None
        })
    };
    let u_given_se = role("u_given_se", &sys.u_given_se);
    let x_given_use = role("x_given_use", &sys.x_given_use);
    let channel = role("channel", &sys.channel);
    let estimator = role("estimator", &sys.estimator);
    if missing {
        return None;
    }
    let (state, u_given_se, x_given_use, channel, estimator) = (
        state.unwrap(),
        u_given_se.unwrap(),
        x_given_use.unwrap(),
        channel.unwrap(),
        estimator.unwrap(),
    );

    let state_joint = match state.to_joint() {
        Ok(j) if j.n_axes() == 2 => j,
        Ok(j) => {
            diags.push(Diagnostic {
                location: "system.state_joint".into(),
                message: format!("state joint must have 2 axes (Se, S), got {}", j.n_axes()),
            });
            return None;
        }
        Err(e) => {
            diags.push(Diagnostic {
                location: "system.state_joint".into(),
                message: e.to_string(),
            });
            return None;
        }
    };

    let n_s = state_joint.axes()[1].alphabet().size();
    let n_shat = estimator.to_axes()[0].size();
    let distortion = match &sys.distortion {
        RawDistortion::Named(s) if s == "hamming" => {
            if n_s != n_shat {
                diags.push(Diagnostic {
                    location: "system.distortion".into(),
                    message: format!(
                        "hamming distortion needs |S| = |Shat|, got {n_s} and {n_shat}"
                    ),
                });
                return None;
            }
            Distortion::hamming(n_s)
        }
        RawDistortion::Named(s) => {
            diags.push(Diagnostic {
                location: "system.distortion".into(),
                message: format!("unknown named distortion `{s}` (only \"hamming\")"),
            });
            return None;
        }
        RawDistortion::Matrix(rows) => {
            let mut ok = true;
            for (r, row) in rows.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    if !v.is_finite() || v < 0.0 {
                        diags.push(Diagnostic {
                            location: format!("system.distortion[{r}][{c}]"),
                            message: format!("distortion entries must be finite and >= 0, got {v}"),
                        });
                        ok = false;
                    }
                }
            }
            if !ok {
                return None;
            }
            Distortion::new(rows.clone())
        }
    };
    let distortion = match distortion {
        Ok(d) => d,
        Err(e) => {
            diags.push(Diagnostic {
                location: "system.distortion".into(),
                message: e.to_string(),
            });
            return None;
        }
    };

    match IsacSystem::new(
        state_joint,
        u_given_se,
        x_given_use,
        channel,
        estimator,
        distortion,
    ) {
        Ok(sys) => Some(sys),
        Err(e) => {
            diags.push(Diagnostic {
                location: "system".into(),
                message: e.to_string(),
            });
            None
        }
    }
}
