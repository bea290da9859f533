//! Plain-text model files.
//!
//! Line-oriented key/value format; floats are written in scientific notation
//! with 18 significant digits, so reading a written model reproduces every
//! parameter value exactly.
//!
//! ```text
//! hmm-model 1
//! kind discrete
//! states 2
//! symbols 3
//! pi <f> <f>
//! trans <f> <f>        (one line per state)
//! emit <f> <f> <f>     (one line per state)
//! ```
//!
//! Mixture models replace `symbols K` with `components M` / `dim d` and the
//! `emit` lines with per-state `weights` lines followed by `mean` and `var`
//! lines, one per component in state-major order.

use std::io::{self, BufRead, Write};

use ndarray::Array2;

use crate::model::{EmissionModel, HmmModel, MixtureComponent};

const MAGIC: &str = "hmm-model 1";

#[derive(Debug)]
pub enum ModelIoError {
    Io(io::Error),
    Parse { line: usize, message: String },
}

impl std::fmt::Display for ModelIoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelIoError::Io(e) => write!(f, "i/o error: {e}"),
            ModelIoError::Parse { line, message } => {
                write!(f, "model file line {line}: {message}")
            }
        }
    }
}

impl std::error::Error for ModelIoError {}

impl From<io::Error> for ModelIoError {
    fn from(e: io::Error) -> Self {
        ModelIoError::Io(e)
    }
}

fn fmt_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.17e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Render a model in the plain-text format.
pub fn model_to_string(model: &HmmModel) -> String {
    let n = model.n_states();
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    match &model.emission {
        EmissionModel::Discrete { table } => {
            out.push_str("kind discrete\n");
            out.push_str(&format!("states {n}\n"));
            out.push_str(&format!("symbols {}\n", table.ncols()));
            out.push_str(&format!("pi {}\n", fmt_floats(&model.initial)));
            for i in 0..n {
                out.push_str(&format!("trans {}\n", fmt_floats(&model.transition.row(i).to_vec())));
            }
            for j in 0..n {
                out.push_str(&format!("emit {}\n", fmt_floats(&table.row(j).to_vec())));
            }
        }
        EmissionModel::GaussianMixture { states } => {
            let m = states.first().map(Vec::len).unwrap_or(0);
            let d = states
                .first()
                .and_then(|c| c.first())
                .map(|c| c.mean.len())
                .unwrap_or(0);
            out.push_str("kind mixture\n");
            out.push_str(&format!("states {n}\n"));
            out.push_str(&format!("components {m}\n"));
            out.push_str(&format!("dim {d}\n"));
            out.push_str(&format!("pi {}\n", fmt_floats(&model.initial)));
            for i in 0..n {
                out.push_str(&format!("trans {}\n", fmt_floats(&model.transition.row(i).to_vec())));
            }
            for comps in states {
                let weights: Vec<f64> = comps.iter().map(|c| c.weight).collect();
                out.push_str(&format!("weights {}\n", fmt_floats(&weights)));
            }
            for comps in states {
                for comp in comps {
                    out.push_str(&format!("mean {}\n", fmt_floats(&comp.mean)));
                }
            }
            for comps in states {
                for comp in comps {
                    out.push_str(&format!("var {}\n", fmt_floats(&comp.variance)));
                }
            }
        }
    }
    out
}

pub fn write_model<W: Write>(w: &mut W, model: &HmmModel) -> io::Result<()> {
    w.write_all(model_to_string(model).as_bytes())
}

struct Lines {
    lines: Vec<(usize, String)>,
    pos: usize,
}

impl Lines {
    fn next(&mut self) -> Option<(usize, &str)> {
        while self.pos < self.lines.len() {
            let (no, line) = &self.lines[self.pos];
            self.pos += 1;
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('#') {
                return Some((*no, trimmed));
            }
        }
        None
    }

    fn expect(&mut self, key: &str) -> Result<(usize, Vec<String>), ModelIoError> {
        let last_line = self.lines.last().map(|(n, _)| *n).unwrap_or(0);
        let (no, line) = self.next().ok_or_else(|| ModelIoError::Parse {
            line: last_line + 1,
            message: format!("unexpected end of file, expected `{key}`"),
        })?;
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap_or("");
        if head != key {
            return Err(ModelIoError::Parse {
                line: no,
                message: format!("expected `{key}`, found `{head}`"),
            });
        }
        Ok((no, parts.map(str::to_string).collect()))
    }

    fn expect_count(&mut self, key: &str) -> Result<usize, ModelIoError> {
        let (no, parts) = self.expect(key)?;
        if parts.len() != 1 {
            return Err(ModelIoError::Parse {
                line: no,
                message: format!("`{key}` takes exactly one value"),
            });
        }
        parts[0].parse::<usize>().map_err(|e| ModelIoError::Parse {
            line: no,
            message: format!("bad count `{}`: {e}", parts[0]),
        })
    }

    fn expect_floats(&mut self, key: &str, count: usize) -> Result<Vec<f64>, ModelIoError> {
        let (no, parts) = self.expect(key)?;
        if parts.len() != count {
            return Err(ModelIoError::Parse {
                line: no,
                message: format!("`{key}` expects {count} values, found {}", parts.len()),
            });
        }
        parts
            .iter()
            .map(|p| {
                p.parse::<f64>().map_err(|e| ModelIoError::Parse {
                    line: no,
                    message: format!("bad float `{p}`: {e}"),
                })
            })
            .collect()
    }
}

/// Parse a model from the plain-text format.
pub fn parse_model(text: &str) -> Result<HmmModel, ModelIoError> {
    let mut lines = Lines {
        lines: text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.to_string()))
            .collect(),
        pos: 0,
    };
    let (no, header) = lines.next().ok_or(ModelIoError::Parse {
        line: 1,
        message: "empty model file".to_string(),
    })?;
    if header != MAGIC {
        return Err(ModelIoError::Parse {
            line: no,
            message: format!("bad header `{header}`, expected `{MAGIC}`"),
        });
    }
    let (no, kind) = lines.expect("kind")?;
    let kind = kind.first().cloned().unwrap_or_default();
    let n = lines.expect_count("states")?;
    if n == 0 {
        return Err(ModelIoError::Parse {
            line: no,
            message: "states must be at least 1".to_string(),
        });
    }
    match kind.as_str() {
        "discrete" => {
            let k = lines.expect_count("symbols")?;
            let initial = lines.expect_floats("pi", n)?;
            let mut trans = Vec::with_capacity(n * n);
            for _ in 0..n {
                trans.extend(lines.expect_floats("trans", n)?);
            }
            let mut table = Vec::with_capacity(n * k);
            for _ in 0..n {
                table.extend(lines.expect_floats("emit", k)?);
            }
            Ok(HmmModel {
                initial,
                transition: Array2::from_shape_vec((n, n), trans).expect("shape"),
                emission: EmissionModel::Discrete {
                    table: Array2::from_shape_vec((n, k), table).expect("shape"),
                },
            })
        }
        "mixture" => {
            let m = lines.expect_count("components")?;
            let d = lines.expect_count("dim")?;
            let initial = lines.expect_floats("pi", n)?;
            let mut trans = Vec::with_capacity(n * n);
            for _ in 0..n {
                trans.extend(lines.expect_floats("trans", n)?);
            }
            let mut weights = Vec::with_capacity(n);
            for _ in 0..n {
                weights.push(lines.expect_floats("weights", m)?);
            }
            let mut means = Vec::with_capacity(n * m);
            for _ in 0..n * m {
                means.push(lines.expect_floats("mean", d)?);
            }
            let mut vars = Vec::with_capacity(n * m);
            for _ in 0..n * m {
                vars.push(lines.expect_floats("var", d)?);
            }
            let states = (0..n)
                .map(|j| {
                    (0..m)
                        .map(|k| MixtureComponent {
                            weight: weights[j][k],
                            mean: means[j * m + k].clone(),
                            variance: vars[j * m + k].clone(),
                        })
                        .collect()
                })
                .collect();
            Ok(HmmModel {
                initial,
                transition: Array2::from_shape_vec((n, n), trans).expect("shape"),
                emission: EmissionModel::GaussianMixture { states },
            })
        }
        other => Err(ModelIoError::Parse {
            line: no,
            message: format!("unknown model kind `{other}`"),
        }),
    }
}

pub fn read_model<R: BufRead>(mut r: R) -> Result<HmmModel, ModelIoError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    parse_model(&text)
}

pub fn read_model_path(path: &std::path::Path) -> Result<HmmModel, ModelIoError> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}

pub fn write_model_path(path: &std::path::Path, model: &HmmModel) -> Result<(), ModelIoError> {
    Ok(std::fs::write(path, model_to_string(model))?)
}
