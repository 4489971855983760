//! Sparse dataset parsing and text model serialization.
//!
//! Datasets use the widespread sparse text format: one sample per line as
//! `label idx:val idx:val ...` with 1-based, strictly increasing indices,
//! `#`-prefixed comment lines, and absent features meaning zero. Labels may
//! be any integers; they are remapped to contiguous internal ids in sorted
//! order and the mapping travels with the model. Universum files use the
//! same grammar with the label ignored (0 by convention).
//!
//! Models serialize to a self-describing versioned text format with every
//! float printed at 17 significant digits, so a round trip reproduces
//! decision values bit for bit.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::model::{Dataset, Hyperparams, Model, UniversumSet};

/// A parsed dataset together with its external label mapping: internal
/// class id `k` corresponds to external label `label_map[k]`.
#[derive(Debug, Clone)]
pub struct ParsedDataset {
    pub data: Dataset,
    pub label_map: Vec<i64>,
}

/// One raw line: external label and sparse entries.
type RawRecord = (i64, Vec<(usize, f64)>);

fn parse_lines(text: &str) -> Result<(Vec<RawRecord>, usize)> {
    let mut records = Vec::new();
    let mut dim = 0usize;
    for (line_idx, raw) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a first token");
        let label: i64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad label {label_tok:?}"),
        })?;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature index {idx_s:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse { line: line_no, msg: "feature indices start at 1".into() });
            }
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature value {val_s:?}"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite feature value {val_s:?}"),
                });
            }
            if let Some(&(prev, _)) = entries.last() {
                if idx <= prev {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("feature index {idx} not increasing after {prev}"),
                    });
                }
            }
            dim = dim.max(idx);
            entries.push((idx, val));
        }
        records.push((label, entries));
    }
    if records.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no data lines in file".into() });
    }
    Ok((records, dim))
}

fn densify(entries: &[(usize, f64)], dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for &(idx, val) in entries {
        x[idx - 1] = val;
    }
    x
}

/// Parses a labeled dataset. Labels are remapped to contiguous internal
/// ids in ascending order of the distinct external values.
pub fn parse_dataset(text: &str) -> Result<ParsedDataset> {
    let (records, dim) = parse_lines(text)?;
    let mut label_map: Vec<i64> = records.iter().map(|(l, _)| *l).collect();
    label_map.sort_unstable();
    label_map.dedup();
    if label_map.len() < 2 {
        return Err(Error::Parse {
            line: 0,
            msg: format!("need at least 2 distinct labels, got {}", label_map.len()),
        });
    }
    let data = Dataset {
        samples: records.iter().map(|(_, e)| densify(e, dim)).collect(),
        labels: records
            .iter()
            .map(|(l, _)| label_map.binary_search(l).expect("label present"))
            .collect(),
        n_classes: label_map.len(),
    };
    data.validate()?;
    Ok(ParsedDataset { data, label_map })
}

/// Parses a universum set; the label column is ignored.
pub fn parse_universum(text: &str) -> Result<UniversumSet> {
    let (records, dim) = parse_lines(text)?;
    Ok(UniversumSet {
        samples: records.iter().map(|(_, e)| densify(e, dim)).collect(),
    })
}

/// Serializes a dataset back to the sparse text format, mapping internal
/// class ids through `label_map`. Zero features are omitted; values are
/// printed at 17 significant digits, so parsing the output reproduces the
/// vectors exactly.
pub fn serialize_dataset(data: &Dataset, label_map: &[i64]) -> String {
    let mut out = String::new();
    for (x, &y) in data.samples.iter().zip(&data.labels) {
        sparse_line(&mut out, label_map.get(y).copied().unwrap_or(y as i64), x);
    }
    out
}

/// Serializes a universum set with the conventional label 0.
pub fn serialize_universum(universum: &UniversumSet) -> String {
    let mut out = String::new();
    for x in &universum.samples {
        sparse_line(&mut out, 0, x);
    }
    out
}

fn sparse_line(out: &mut String, label: i64, x: &[f64]) {
    use std::fmt::Write;
    write!(out, "{label}").unwrap();
    for (d, &v) in x.iter().enumerate() {
        if v != 0.0 {
            write!(out, " {}:{:.16e}", d + 1, v).unwrap();
        }
    }
    out.push('\n');
}

const MODEL_HEADER: &str = "musvm model v1";

/// Serializes a model to the versioned text format.
pub fn serialize_model(model: &Model) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "{MODEL_HEADER}").unwrap();
    match model.kernel {
        KernelSpec::Linear => writeln!(out, "kernel linear").unwrap(),
        KernelSpec::Rbf { gamma } => writeln!(out, "kernel rbf {gamma:.16e}").unwrap(),
    }
    writeln!(out, "classes {}", model.n_classes).unwrap();
    writeln!(out, "dim {}", model.dim).unwrap();
    let labels: Vec<String> = model.label_map.iter().map(|l| l.to_string()).collect();
    writeln!(out, "labels {}", labels.join(" ")).unwrap();
    writeln!(
        out,
        "params {:.16e} {:.16e} {:.16e}",
        model.params.c, model.params.c_star, model.params.delta
    )
    .unwrap();
    writeln!(out, "support {}", model.support_samples.len()).unwrap();
    for (x, a) in model.support_samples.iter().zip(&model.alpha) {
        let mut fields: Vec<String> = Vec::with_capacity(model.dim + model.n_classes);
        fields.extend(x.iter().map(|v| format!("{v:.16e}")));
        fields.extend(a.iter().map(|v| format!("{v:.16e}")));
        writeln!(out, "{}", fields.join(" ")).unwrap();
    }
    writeln!(out, "end").unwrap();
    out
}

/// Parses a model from the versioned text format. Fails closed: any
/// missing field, bad count or absent end marker is an error and no
/// partial model is returned.
pub fn deserialize_model(text: &str) -> Result<Model> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next_line = |what: &str| -> Result<(usize, &str)> {
        lines
            .next()
            .ok_or_else(|| Error::FormatVersion(format!("model file truncated before {what}")))
    };

    let (_, header) = next_line("header")?;
    if header != MODEL_HEADER {
        return Err(Error::FormatVersion(format!(
            "expected header {MODEL_HEADER:?}, found {header:?}"
        )));
    }

    fn field<'a>(line: &'a str, key: &str, line_no: usize) -> Result<&'a str> {
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' ').or(Some(rest).filter(|r| r.is_empty())))
            .ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected {key:?} line, found {line:?}"),
            })
    }
    fn parse_f64(tok: &str, line_no: usize) -> Result<f64> {
        tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad float {tok:?}"),
        })
    }

    let (no, line) = next_line("kernel")?;
    let kernel_rest = field(line, "kernel", no)?;
    let kernel = if kernel_rest == "linear" {
        KernelSpec::Linear
    } else if let Some(g) = kernel_rest.strip_prefix("rbf ") {
        KernelSpec::Rbf { gamma: parse_f64(g.trim(), no)? }
    } else {
        return Err(Error::Parse { line: no, msg: format!("unknown kernel {kernel_rest:?}") });
    };
    kernel.validate()?;

    let (no, line) = next_line("classes")?;
    let n_classes: usize = field(line, "classes", no)?
        .parse()
        .map_err(|_| Error::Parse { line: no, msg: "bad class count".into() })?;
    if n_classes < 2 {
        return Err(Error::Parse { line: no, msg: format!("need 2+ classes, got {n_classes}") });
    }

    let (no, line) = next_line("dim")?;
    let dim: usize = field(line, "dim", no)?
        .parse()
        .map_err(|_| Error::Parse { line: no, msg: "bad dimension".into() })?;

    let (no, line) = next_line("labels")?;
    let label_map: Vec<i64> = field(line, "labels", no)?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse { line: no, msg: format!("bad label {t:?}") }))
        .collect::<Result<_>>()?;
    if label_map.len() != n_classes {
        return Err(Error::Parse {
            line: no,
            msg: format!("{} labels for {n_classes} classes", label_map.len()),
        });
    }

    let (no, line) = next_line("params")?;
    let toks: Vec<&str> = field(line, "params", no)?.split_whitespace().collect();
    if toks.len() != 3 {
        return Err(Error::Parse { line: no, msg: "params needs 3 values".into() });
    }
    let params = Hyperparams {
        c: parse_f64(toks[0], no)?,
        c_star: parse_f64(toks[1], no)?,
        delta: parse_f64(toks[2], no)?,
    };
    params.validate()?;

    let (no, line) = next_line("support")?;
    let n_support: usize = field(line, "support", no)?
        .parse()
        .map_err(|_| Error::Parse { line: no, msg: "bad support count".into() })?;

    let mut support_samples = Vec::with_capacity(n_support);
    let mut alpha = Vec::with_capacity(n_support);
    for _ in 0..n_support {
        let (no, line) = next_line("support row")?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_f64(t, no))
            .collect::<Result<_>>()?;
        if values.len() != dim + n_classes {
            return Err(Error::Parse {
                line: no,
                msg: format!("support row has {} values, expected {}", values.len(), dim + n_classes),
            });
        }
        support_samples.push(values[..dim].to_vec());
        alpha.push(values[dim..].to_vec());
    }

    let (no, line) = next_line("end marker")?;
    if line != "end" {
        return Err(Error::Parse { line: no, msg: format!("expected end marker, found {line:?}") });
    }

    Ok(Model { kernel, params, n_classes, dim, label_map, support_samples, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sparse_lines_with_gaps_and_comments() {
        let text = "# a comment\n2 1:0.5 3:-1\n\n7 2:2.25\n7 1:1 2:1 3:1\n";
        let parsed = parse_dataset(text).unwrap();
        assert_eq!(parsed.label_map, vec![2, 7]);
        assert_eq!(parsed.data.n_classes, 2);
        assert_eq!(parsed.data.labels, vec![0, 1, 1]);
        assert_eq!(parsed.data.samples[0], vec![0.5, 0.0, -1.0]);
        assert_eq!(parsed.data.samples[1], vec![0.0, 2.25, 0.0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_dataset("1 1:0.5\nx 1:1\n").unwrap_err();
        match e {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
        let e = parse_dataset("1 2:1 2:3\n2 1:1\n").unwrap_err();
        match e {
            Error::Parse { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("not increasing"), "{msg}");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(parse_dataset("# only comments\n").is_err());
    }

    #[test]
    fn universum_mode_ignores_labels() {
        let u = parse_universum("0 1:1\n-5 2:3\n").unwrap();
        assert_eq!(u.samples, vec![vec![1.0, 0.0], vec![0.0, 3.0]]);
    }

    #[test]
    fn dataset_round_trips_exactly() {
        let text = "3 1:0.1 2:-7.25e-3\n9 2:1e300\n3 1:-0.30000000000000004\n";
        let parsed = parse_dataset(text).unwrap();
        let written = serialize_dataset(&parsed.data, &parsed.label_map);
        let again = parse_dataset(&written).unwrap();
        assert_eq!(parsed.data.samples, again.data.samples);
        assert_eq!(parsed.data.labels, again.data.labels);
        assert_eq!(parsed.label_map, again.label_map);
    }

    fn toy_model() -> Model {
        Model {
            kernel: KernelSpec::Rbf { gamma: 0.0078125 },
            params: Hyperparams { c: 1.5, c_star: 0.25, delta: 0.05 },
            n_classes: 3,
            dim: 2,
            label_map: vec![-4, 0, 12],
            support_samples: vec![vec![0.1, -0.2], vec![1.0 / 3.0, 2.0f64.sqrt()]],
            alpha: vec![vec![0.5, -0.25, -0.25], vec![-0.125, 0.125, 0.0]],
        }
    }

    #[test]
    fn model_round_trips_bit_exactly() {
        let model = toy_model();
        let text = serialize_model(&model);
        let back = deserialize_model(&text).unwrap();
        assert_eq!(model.kernel, back.kernel);
        assert_eq!(model.label_map, back.label_map);
        assert_eq!(model.support_samples, back.support_samples);
        assert_eq!(model.alpha, back.alpha);
        // Decision values agree bit for bit on probes.
        for probe in [[0.0, 0.0], [0.3, -1.7], [5.0, 2.0]] {
            let a = model.decision_values(&probe);
            let b = back.decision_values(&probe);
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn empty_support_model_round_trips() {
        let mut model = toy_model();
        model.support_samples.clear();
        model.alpha.clear();
        let back = deserialize_model(&serialize_model(&model)).unwrap();
        assert!(back.support_samples.is_empty());
        // The constant predictor breaks ties toward the first class.
        assert_eq!(back.predict(&[0.0, 0.0]), 0);
    }

    #[test]
    fn corrupted_models_fail_closed() {
        let model = toy_model();
        let good = serialize_model(&model);
        // Bad header.
        let bad = good.replacen("musvm model v1", "musvm model v9", 1);
        assert!(matches!(deserialize_model(&bad), Err(Error::FormatVersion(_))));
        // Truncation loses the end marker.
        let cut = &good[..good.len() - 5];
        assert!(deserialize_model(cut).is_err());
        // A support row with the wrong arity.
        let bad = good.replace("support 2", "support 3");
        assert!(deserialize_model(&bad).is_err());
    }
}
