//! Plain-text chain parameter files.
//!
//! ```text
//! # comment
//! name = planar3
//! task_dim = 2          # 2 (planar x–y) or 3
//! gravity = 9.81        # m/s², along −y; optional
//!
//! [dh]
//! # a  alpha  d  theta_offset      one row per joint
//! 1.0  0      0  0
//!
//! [links]                          optional, planar chains only
//! # mass  com_offset  [inertia_about_com]
//! 1.0     0.5         1/12
//! ```
//!
//! Every numeric field is an arithmetic expression (`pi`, `sin`, `cos`, …)
//! without embedded whitespace. A missing inertia defaults to the slender-rod
//! value `m·a²/12`.

use super::{DhRow, LinkInertia, SerialChain};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 3] = ["planar2", "planar3", "spatial6"];

/// One of the shipped chains by name.
pub fn preset(name: &str) -> Result<SerialChain> {
    let text = match name {
        "planar2" => include_str!("../../presets/planar2.chain"),
        "planar3" => include_str!("../../presets/planar3.chain"),
        "spatial6" => include_str!("../../presets/spatial6.chain"),
        other => {
            return Err(Error::config(format!(
                "unknown chain preset `{other}` (known: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    parse_chain(text)
}

#[derive(PartialEq)]
enum Section {
    Header,
    Dh,
    Links,
}

fn number(field: &str, line: usize) -> Result<f64> {
    let v = meval::eval_str(field).map_err(|e| Error::Parse {
        line,
        message: format!("`{field}`: {e}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("`{field}` is not finite"),
        });
    }
    Ok(v)
}

pub fn parse_chain(text: &str) -> Result<SerialChain> {
    let mut section = Section::Header;
    let mut name = String::from("chain");
    let mut task_dim: Option<usize> = None;
    let mut gravity = 9.81;
    let mut rows = Vec::new();
    let mut links: Vec<(usize, Vec<f64>)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        match content {
            "[dh]" => {
                section = Section::Dh;
                continue;
            }
            "[links]" => {
                section = Section::Links;
                continue;
            }
            s if s.starts_with('[') => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown section {s}"),
                })
            }
            _ => {}
        }
        match section {
            Section::Header => {
                let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                    line,
                    message: "expected `key = value`".into(),
                })?;
                let value = value.trim();
                match key.trim() {
                    "name" => name = value.to_string(),
                    "task_dim" => {
                        task_dim = Some(value.parse().map_err(|_| Error::Parse {
                            line,
                            message: format!("bad task_dim `{value}`"),
                        })?)
                    }
                    "gravity" => gravity = number(value, line)?,
                    other => {
                        return Err(Error::Parse {
                            line,
                            message: format!("unknown key `{other}`"),
                        })
                    }
                }
            }
            Section::Dh => {
                let fields: Vec<&str> = content.split_whitespace().collect();
                if fields.len() != 4 {
                    return Err(Error::Parse {
                        line,
                        message: format!("DH row needs 4 fields, found {}", fields.len()),
                    });
                }
                rows.push(DhRow {
                    a: number(fields[0], line)?,
                    alpha: number(fields[1], line)?,
                    d: number(fields[2], line)?,
                    theta_offset: number(fields[3], line)?,
                });
            }
            Section::Links => {
                let fields = content
                    .split_whitespace()
                    .map(|f| number(f, line))
                    .collect::<Result<Vec<_>>>()?;
                if !(2..=3).contains(&fields.len()) {
                    return Err(Error::Parse {
                        line,
                        message: "link row needs mass, com_offset and optional inertia".into(),
                    });
                }
                links.push((line, fields));
            }
        }
    }

    let task_dim = task_dim.ok_or(Error::Parse {
        line: 0,
        message: "missing task_dim".into(),
    })?;
    let chain = SerialChain::new(name, rows, task_dim)?;
    if links.is_empty() {
        return Ok(chain);
    }
    if links.len() != chain.n_joints() {
        return Err(Error::Parse {
            line: links[0].0,
            message: format!("{} link rows for {} joints", links.len(), chain.n_joints()),
        });
    }
    let inertias = links
        .iter()
        .zip(chain.rows())
        .map(|((_, f), row)| LinkInertia {
            mass: f[0],
            com_offset: f[1],
            inertia: f.get(2).copied().unwrap_or(f[0] * row.a * row.a / 12.0),
        })
        .collect();
    chain.with_dynamics(inertias, gravity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn presets_load() {
        for name in PRESET_NAMES {
            let chain = preset(name).unwrap();
            assert_eq!(chain.name(), name);
        }
        let p3 = preset("planar3").unwrap();
        assert!(p3.has_dynamics());
        assert_eq!(p3.n_joints(), 3);
        assert_relative_eq!(p3.links().unwrap()[0].inertia, 1.0 / 12.0);
        let s6 = preset("spatial6").unwrap();
        assert!(!s6.has_dynamics());
        assert_eq!(s6.task_dim(), 3);
        assert_relative_eq!(s6.rows()[1].alpha, PI);
        assert!(preset("nope").is_err());
    }

    #[test]
    fn default_inertia_is_slender_rod() {
        let chain = parse_chain(
            "task_dim = 2\n[dh]\n2 0 0 0\n2 0 0 0\n2 0 0 0\n[links]\n3 1\n3 1\n3 1\n",
        )
        .unwrap();
        assert_relative_eq!(chain.links().unwrap()[2].inertia, 1.0);
    }

    #[test]
    fn reports_bad_lines() {
        let err = parse_chain("task_dim = 2\n[dh]\n1 0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_chain("task_dim = 2\n[dh]\n1 0 0 0\n1 0 0 zz\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        assert!(parse_chain("[dh]\n1 0 0 0\n1 0 0 0\n1 0 0 0\n").is_err());
        let spatial_links = "task_dim = 3\n[dh]\n0 pi/2 1 0\n1 0 0 0\n1 0 0 0\n1 0 0 0\n[links]\n1 0.5\n1 0.5\n1 0.5\n1 0.5\n";
        assert!(matches!(
            parse_chain(spatial_links),
            Err(Error::DynamicsUnavailable(_))
        ));
    }
}
