//! Flat `key = value` experiment files.
//!
//! ```text
//! # small-matrix sweep
//! n_symbols = 15
//! n_dims = 10
//! snr_grid_db = 0:2:16
//! realizations = 200
//! detectors = soav,linf
//! master_seed = 7
//! output_path = results.csv
//! soav.max_iter = 100
//! linf.penalty_schedule = 0.01,0.1,1,10,100
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! errors. `n_symbols` and `n_dims` are required; everything else defaults
//! to [`ExperimentConfig::new`].

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{DetectorKind, DetectorSpec, ExperimentConfig};
use crate::baselines::Epsilon;
use crate::error::{Error, Result};
use crate::model::Modulation;
use crate::soav::{InitialPoint, Lipschitz};

/// Parses `start:step:stop` (stop included when it lies on the grid) or a
/// comma-separated list of values.
pub fn parse_snr_range(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::Config(format!("invalid SNR grid '{spec}': {msg}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                return Err(bad("need step > 0 and stop >= start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| start + i as f64 * step).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad("expected start:step:stop or a comma-separated list")),
    };
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("values must be strictly increasing"));
    }
    Ok(grid)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("invalid value '{value}' for {key}"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid boolean '{value}' for {key}")),
    }
}

fn parse_list(key: &str, value: &str) -> std::result::Result<Vec<f64>, String> {
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

/// Parses an experiment file's text. `origin` is used in error messages.
pub fn parse_experiment_config(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', found '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key '{key}'")));
        }
        entries.push((line_no, key.to_string(), value.to_string()));
    }

    let lookup = |name: &str| entries.iter().find(|(_, k, _)| k == name);
    let required = |name: &str| -> Result<(u64, String)> {
        lookup(name)
            .map(|(l, _, v)| (*l, v.clone()))
            .ok_or_else(|| Error::Config(format!("{}: missing required key '{name}'", origin.display())))
    };
    let at = |line: u64| {
        move |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        }
    };

    let (l, v) = required("n_symbols")?;
    let n_symbols: usize = parse_value("n_symbols", &v).map_err(at(l))?;
    let (l, v) = required("n_dims")?;
    let n_dims: usize = parse_value("n_dims", &v).map_err(at(l))?;
    let mut cfg = ExperimentConfig::new(n_symbols, n_dims);
    let mut bits_given = false;

    if let Some((l, _, v)) = lookup("detectors") {
        cfg.detectors = DetectorSpec::parse_list(v).map_err(|e| at(*l)(e.to_string()))?;
    }

    for (line, key, value) in &entries {
        let fail = at(*line);
        let value = value.as_str();
        match key.as_str() {
            "n_symbols" | "n_dims" | "detectors" => {}
            "modulation" => cfg.modulation = value.parse::<Modulation>().map_err(|e| fail(e.to_string()))?,
            "snr_grid_db" => cfg.snr_grid_db = parse_snr_range(value).map_err(|e| fail(e.to_string()))?,
            "realizations" => cfg.realizations = parse_value(key, value).map_err(fail)?,
            "bits_per_realization" => {
                cfg.bits_per_realization = parse_value(key, value).map_err(fail)?;
                bits_given = true;
            }
            "master_seed" => cfg.master_seed = parse_value(key, value).map_err(fail)?,
            "output_path" => cfg.output_path = Some(PathBuf::from(value)),
            "plot_path" => cfg.plot_path = Some(PathBuf::from(value)),
            "record_timing" => cfg.record_timing = parse_bool(key, value).map_err(fail)?,
            other => {
                let (section, field) = other.split_once('.').ok_or_else(|| fail(format!("unknown key '{other}'")))?;
                let mut matched = false;
                for det in cfg.detectors.iter_mut().filter(|d| d.name == section) {
                    matched = true;
                    apply_detector_key(&mut det.kind, field, value).map_err(&fail)?;
                }
                if !matched {
                    return Err(fail(format!(
                        "key '{other}' configures detector '{section}', which is not in the detector list"
                    )));
                }
            }
        }
    }

    if !bits_given {
        cfg = cfg.with_vectors_per_realization(super::DEFAULT_VECTORS_PER_REALIZATION);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_detector_key(kind: &mut DetectorKind, field: &str, value: &str) -> std::result::Result<(), String> {
    let unknown = || format!("unknown detector option '{field}'");
    match kind {
        DetectorKind::Soav(c) => match field {
            "lambda" => c.lambda = parse_value(field, value)?,
            "lipschitz" => {
                c.lipschitz = if value == "power" {
                    Lipschitz::PowerIteration
                } else {
                    Lipschitz::Fixed(parse_value(field, value)?)
                }
            }
            "max_iter" => c.max_iter = parse_value(field, value)?,
            "tolerance" => c.tolerance = parse_value(field, value)?,
            "initial_point" => {
                c.initial_point = match value {
                    "ones" => InitialPoint::Ones,
                    "zeros" => InitialPoint::Zeros,
                    _ => return Err(format!("initial_point must be 'ones' or 'zeros', got '{value}'")),
                }
            }
            _ => return Err(unknown()),
        },
        DetectorKind::Linf(c) => match field {
            "epsilon" => {
                c.epsilon = if value == "discrepancy" {
                    Epsilon::Discrepancy
                } else {
                    Epsilon::Fixed(parse_value(field, value)?)
                }
            }
            "max_outer" => c.max_outer = parse_value(field, value)?,
            "inner_tol" => c.inner_tol = parse_value(field, value)?,
            "inner_max_iter" => c.inner_max_iter = parse_value(field, value)?,
            "penalty_schedule" => c.penalty_schedule = parse_list(field, value)?,
            _ => return Err(unknown()),
        },
        DetectorKind::Ml(c) => match field {
            "max_dimension" => c.max_dimension = parse_value(field, value)?,
            _ => return Err(unknown()),
        },
    }
    Ok(())
}

/// Reads and parses an experiment file.
pub fn read_experiment_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_experiment_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soav::SoavConfig;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_experiment_config(text, Path::new("test.cfg"))
    }

    #[test]
    fn snr_ranges() {
        assert_eq!(parse_snr_range("0:2:16").unwrap().len(), 9);
        assert_eq!(parse_snr_range("0:2:15").unwrap(), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]);
        assert_eq!(parse_snr_range("0:0.1:0.3").unwrap().len(), 4);
        assert_eq!(parse_snr_range("4,8,12").unwrap(), vec![4.0, 8.0, 12.0]);
        assert_eq!(parse_snr_range("200").unwrap(), vec![200.0]);
        for bad in ["0:0:4", "4:1:0", "a:1:2", "1:2", "3,2"] {
            assert!(parse_snr_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn full_file() {
        let cfg = parse(
            "# comment\n\
             n_symbols = 15\n\
             n_dims = 10\n\
             modulation = qpsk\n\
             snr_grid_db = 0:4:8   # inline comment\n\
             realizations = 20\n\
             bits_per_realization = 300\n\
             detectors = soav,linf,ml\n\
             master_seed = 9\n\
             output_path = out.csv\n\
             record_timing = true\n\
             soav.lambda = 0.02\n\
             soav.lipschitz = power\n\
             linf.penalty_schedule = 0.1,1\n\
             ml.max_dimension = 30\n",
        )
        .unwrap();
        assert_eq!((cfg.n_symbols, cfg.n_dims, cfg.realizations), (15, 10, 20));
        assert_eq!(cfg.snr_grid_db, vec![0.0, 4.0, 8.0]);
        assert_eq!(cfg.vectors_per_realization(), 10);
        assert_eq!(cfg.master_seed, 9);
        assert!(cfg.record_timing);
        assert_eq!(cfg.output_path.as_deref(), Some(Path::new("out.csv")));
        let DetectorKind::Soav(soav) = &cfg.detectors[0].kind else { panic!() };
        assert_eq!(
            soav,
            &SoavConfig { lambda: 0.02, lipschitz: Lipschitz::PowerIteration, ..SoavConfig::default() }
        );
        let DetectorKind::Linf(linf) = &cfg.detectors[1].kind else { panic!() };
        assert_eq!(linf.penalty_schedule, vec![0.1, 1.0]);
    }

    #[test]
    fn defaults_when_only_dimensions_given() {
        let cfg = parse("n_symbols = 4\nn_dims = 3\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::new(4, 3));
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse("n_symbols = 4\nn_dims = 3\n\nfoo = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = parse("n_symbols = 4\nn_dims = 3\nsoav.bogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse("n_symbols = 4\nn_dims = 3\ndetectors = soav\nlinf.max_outer = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse("n_symbols 4\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("n_symbols = 4\nn_symbols = 5\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("n_dims = 3\n"), Err(Error::Config(_))));
        assert!(matches!(parse("n_symbols = x\nn_dims = 3\n"), Err(Error::Parse { line: 1, .. })));
    }
}
