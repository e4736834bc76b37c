//! `SORTADv1` model files.
//!
//! A line-oriented text container. The first line is the version tag, then
//! `[section]` headers followed by `key = value` lines, and a final `END`
//! line so truncation is detected. Floats use Rust's shortest round-trip
//! exponent form, so a saved model scores bit-identically after loading.
//!
//! ```text
//! SORTADv1
//! [config]
//! num_transformations = 10
//! ...
//! [scaler]
//! medians = 3e0 -1.5e0
//! iqrs = 2e0 1e0
//! [bank]
//! beta = 5e-1
//! count = 10
//! [transformation]
//! id = 0
//! p1 = 1 0
//! p2 = 3 2
//! center = ...
//! f = chebyshev:3:4.1e-1:1 chebyshev:1:-2.2e-1:-1
//! g = legendre:5:...           (one f and one g line per coupled pair)
//! [classifier]
//! layers = 3
//! [layer]
//! shape = 4 64
//! bias = ...
//! w = ...                      (one line per input unit)
//! [dirichlet]
//! r = 3e0
//! epsilon = 1e-12
//! alpha = ...                  (one line per transformation)
//! train_means = ...
//! END
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::classifier::{ClassifierModel, Dense};
use crate::data::RobustScaler;
use crate::error::{Error, Result};
use crate::pipeline::{SortadConfig, SortadModel};
use crate::polybasis::{Basis, PolyTerm};
use crate::scoring::{DirichletModel, ScoringMethod};
use crate::selection::TransformBank;
use crate::transform::{Polynomial, TransformationSpec};

pub const VERSION: &str = "SORTADv1";
const END: &str = "END";

fn floats(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
}

fn ints(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn term_token(t: &PolyTerm) -> String {
    format!("{}:{}:{:e}:{}", t.basis, t.degree, t.coefficient, t.divide_exponent)
}

fn poly_line(out: &mut String, key: &str, p: &Polynomial) {
    let tokens: Vec<String> = p.terms.iter().map(term_token).collect();
    writeln!(out, "{key} = {}", tokens.join(" ")).unwrap();
}

pub fn to_string(model: &SortadModel) -> String {
    let mut s = String::new();
    let c = &model.config;
    writeln!(s, "{VERSION}").unwrap();
    writeln!(s, "[config]").unwrap();
    writeln!(s, "num_transformations = {}", c.num_transformations).unwrap();
    writeln!(s, "num_temp_transformations = {}", c.num_temp_transformations).unwrap();
    writeln!(s, "beta = {:e}", c.beta).unwrap();
    writeln!(s, "max_degree = {}", c.max_degree).unwrap();
    writeln!(s, "chain_length = {}", c.chain_length).unwrap();
    writeln!(s, "divide_factor = {}", c.divide_factor).unwrap();
    writeln!(s, "epochs = {}", c.epochs).unwrap();
    writeln!(s, "batch_size = {}", c.batch_size).unwrap();
    writeln!(s, "learning_rate = {:e}", c.learning_rate).unwrap();
    writeln!(s, "seed = {}", c.seed).unwrap();
    writeln!(s, "scoring_method = {}", c.scoring_method).unwrap();
    writeln!(s, "r = {:e}", c.r).unwrap();
    writeln!(s, "epsilon = {:e}", c.epsilon).unwrap();
    writeln!(s, "selection_max_rows = {}", c.selection_max_rows).unwrap();

    writeln!(s, "[scaler]").unwrap();
    writeln!(s, "medians = {}", floats(model.scaler.medians.iter().copied())).unwrap();
    writeln!(s, "iqrs = {}", floats(model.scaler.iqrs.iter().copied())).unwrap();

    writeln!(s, "[bank]").unwrap();
    writeln!(s, "beta = {:e}", model.bank.beta).unwrap();
    writeln!(s, "count = {}", model.bank.len()).unwrap();
    for (spec, center) in model.bank.specs.iter().zip(&model.bank.centers) {
        writeln!(s, "[transformation]").unwrap();
        writeln!(s, "id = {}", spec.id).unwrap();
        writeln!(s, "p1 = {}", ints(&spec.p1)).unwrap();
        writeln!(s, "p2 = {}", ints(&spec.p2)).unwrap();
        writeln!(s, "center = {}", floats(center.iter().copied())).unwrap();
        for p in &spec.f {
            poly_line(&mut s, "f", p);
        }
        for p in &spec.g {
            poly_line(&mut s, "g", p);
        }
    }

    writeln!(s, "[classifier]").unwrap();
    writeln!(s, "layers = {}", model.classifier.layers.len()).unwrap();
    for layer in &model.classifier.layers {
        writeln!(s, "[layer]").unwrap();
        writeln!(s, "shape = {} {}", layer.weights.nrows(), layer.weights.ncols()).unwrap();
        writeln!(s, "bias = {}", floats(layer.bias.iter().copied())).unwrap();
        for row in layer.weights.rows() {
            writeln!(s, "w = {}", floats(row.iter().copied())).unwrap();
        }
    }

    writeln!(s, "[dirichlet]").unwrap();
    writeln!(s, "r = {:e}", model.dirichlet.r).unwrap();
    writeln!(s, "epsilon = {:e}", model.dirichlet.epsilon).unwrap();
    for a in &model.dirichlet.alphas {
        writeln!(s, "alpha = {}", floats(a.iter().copied())).unwrap();
    }
    writeln!(s, "train_means = {}", floats(model.dirichlet.train_means.iter().copied())).unwrap();
    writeln!(s, "{END}").unwrap();
    s
}

/// Sequential reader over numbered lines.
struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Cursor { lines, at: 0 }
    }

    fn line_no(&self) -> usize {
        self.lines.get(self.at).map_or_else(|| self.lines.last().map_or(0, |l| l.0) + 1, |l| l.0)
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::MalformedModel {
            line: self.line_no(),
            reason: reason.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        let line = self
            .lines
            .get(self.at)
            .map(|l| l.1)
            .ok_or_else(|| self.err("unexpected end of file"))?;
        self.at += 1;
        Ok(line)
    }

    fn section(&mut self, name: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != format!("[{name}]") {
            self.at -= 1;
            return Err(self.err(format!("expected section [{name}], found {line:?}")));
        }
        Ok(())
    }

    fn value(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok(v.trim()),
            _ => {
                self.at -= 1;
                Err(self.err(format!("expected key {key:?}, found {line:?}")))
            }
        }
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.value(key)?;
        v.parse().map_err(|_| {
            self.at -= 1;
            let e = self.err(format!("cannot parse {key} value {v:?}"));
            self.at += 1;
            e
        })
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let v = self.value(key)?;
        v.split_whitespace()
            .map(|tok| {
                tok.parse().map_err(|_| Error::MalformedModel {
                    line: self.lines[self.at - 1].0,
                    reason: format!("cannot parse {key} entry {tok:?}"),
                })
            })
            .collect()
    }

    fn polynomial(&mut self, key: &str) -> Result<Polynomial> {
        let v = self.value(key)?;
        let line = self.lines[self.at - 1].0;
        let bad = |tok: &str| Error::MalformedModel {
            line,
            reason: format!("bad polynomial term {tok:?}"),
        };
        let terms = v
            .split_whitespace()
            .map(|tok| {
                let parts: Vec<&str> = tok.split(':').collect();
                let [basis, degree, coefficient, exponent] = parts[..] else {
                    return Err(bad(tok));
                };
                Ok(PolyTerm {
                    basis: Basis::from_name(basis).ok_or_else(|| bad(tok))?,
                    degree: degree.parse().map_err(|_| bad(tok))?,
                    coefficient: coefficient.parse().map_err(|_| bad(tok))?,
                    divide_exponent: exponent.parse().map_err(|_| bad(tok))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Polynomial { terms })
    }
}

fn read_config(c: &mut Cursor) -> Result<SortadConfig> {
    c.section("config")?;
    Ok(SortadConfig {
        num_transformations: c.parse("num_transformations")?,
        num_temp_transformations: c.parse("num_temp_transformations")?,
        beta: c.parse("beta")?,
        max_degree: c.parse("max_degree")?,
        chain_length: c.parse("chain_length")?,
        divide_factor: c.parse("divide_factor")?,
        epochs: c.parse("epochs")?,
        batch_size: c.parse("batch_size")?,
        learning_rate: c.parse("learning_rate")?,
        seed: c.parse("seed")?,
        scoring_method: {
            let v = c.value("scoring_method")?;
            ScoringMethod::from_str(v).map_err(|e| c.err(e.to_string()))?
        },
        r: c.parse("r")?,
        epsilon: c.parse("epsilon")?,
        selection_max_rows: c.parse("selection_max_rows")?,
    })
}

fn read_bank(c: &mut Cursor) -> Result<TransformBank> {
    c.section("bank")?;
    let beta = c.parse("beta")?;
    let count: usize = c.parse("count")?;
    let mut specs = Vec::with_capacity(count.min(1024));
    let mut centers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        c.section("transformation")?;
        let id = c.parse("id")?;
        let p1: Vec<usize> = c.list("p1")?;
        let p2 = c.list("p2")?;
        centers.push(c.list("center")?);
        let f = (0..p1.len()).map(|_| c.polynomial("f")).collect::<Result<_>>()?;
        let g = (0..p1.len()).map(|_| c.polynomial("g")).collect::<Result<_>>()?;
        let spec = TransformationSpec { id, p1, p2, f, g };
        spec.validate().map_err(|e| c.err(e.to_string()))?;
        specs.push(spec);
    }
    Ok(TransformBank { specs, centers, beta })
}

fn read_classifier(c: &mut Cursor) -> Result<ClassifierModel> {
    c.section("classifier")?;
    let count: usize = c.parse("layers")?;
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        c.section("layer")?;
        let shape: Vec<usize> = c.list("shape")?;
        let [rows, cols] = shape[..] else {
            return Err(c.err("layer shape needs two entries"));
        };
        let bias: Vec<f64> = c.list("bias")?;
        if bias.len() != cols {
            return Err(c.err("bias length does not match layer shape"));
        }
        let mut weights = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row: Vec<f64> = c.list("w")?;
            if row.len() != cols {
                return Err(c.err("weight row length does not match layer shape"));
            }
            weights.extend(row);
        }
        layers.push(Dense {
            weights: Array2::from_shape_vec((rows, cols), weights).expect("shape checked"),
            bias: Array1::from(bias),
        });
    }
    Ok(ClassifierModel { layers })
}

fn read_dirichlet(c: &mut Cursor, m: usize) -> Result<DirichletModel> {
    c.section("dirichlet")?;
    let r = c.parse("r")?;
    let epsilon = c.parse("epsilon")?;
    let alphas = (0..m).map(|_| c.list("alpha")).collect::<Result<_>>()?;
    let train_means = c.list("train_means")?;
    Ok(DirichletModel {
        alphas,
        train_means,
        r,
        epsilon,
    })
}

pub fn from_str(text: &str) -> Result<SortadModel> {
    let mut c = Cursor::new(text);
    let tag = c.next_line()?;
    if tag != VERSION {
        if tag.starts_with("SORTAD") {
            return Err(Error::VersionMismatch {
                found: tag.to_string(),
                expected: VERSION.to_string(),
            });
        }
        return Err(Error::MalformedModel {
            line: 1,
            reason: "missing version tag".into(),
        });
    }
    let config = read_config(&mut c)?;
    c.section("scaler")?;
    let scaler = RobustScaler {
        medians: c.list("medians")?,
        iqrs: c.list("iqrs")?,
    };
    let bank = read_bank(&mut c)?;
    let classifier = read_classifier(&mut c)?;
    let dirichlet = read_dirichlet(&mut c, bank.len())?;
    if c.next_line()? != END {
        c.at -= 1;
        return Err(c.err("expected END marker"));
    }
    if c.at != c.lines.len() {
        return Err(c.err("trailing content after END"));
    }
    let model = SortadModel {
        config,
        scaler,
        bank,
        classifier,
        dirichlet,
    };
    model.validate().map_err(|e| Error::MalformedModel {
        line: 0,
        reason: e.to_string(),
    })?;
    Ok(model)
}

pub fn save(model: &SortadModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<SortadModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}
