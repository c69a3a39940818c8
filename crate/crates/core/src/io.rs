//! Flat `key = value` experiment configs and line-delimited JSON files.
//!
//! Config syntax: one `key = value` per line, `#` starts a comment, list
//! values are comma separated. `preset = desk|full` selects the starting
//! values and may appear on any line. Unknown keys are errors. `k_max` and
//! `n_frames` set both the network and the model dimensions.
//!
//! Line-delimited files hold a JSON header object on the first line and one
//! JSON record per following line.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::NetworkConfig;
use crate::trainer::{Supervision, TrainConfig};

pub const DATASET_FORMAT: &str = "pra-dataset";
pub const ORACLE_FORMAT: &str = "pra-oracle";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    pub fn desk() -> Self {
        Self {
            network: NetworkConfig::desk(),
            train: TrainConfig::desk(),
        }
    }

    pub fn full() -> Self {
        Self {
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.train.validate()?;
        if self.network.k_max != self.train.k_max || self.network.n_frames != self.train.n_frames {
            return Err(Error::InvalidArgument(
                "network and model disagree on k_max or n_frames".into(),
            ));
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let n = &self.network;
        let t = &self.train;
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let flist = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let pairs: Vec<(&str, String)> = vec![
            ("n_bs", n.n_bs.to_string()),
            ("cell_radius_m", n.cell_radius_m.to_string()),
            ("n_tx", n.n_tx.to_string()),
            ("p_max_w", n.p_max_w.to_string()),
            ("w_max_hz", n.w_max_hz.to_string()),
            ("pathloss_intercept_db", n.pathloss_intercept_db.to_string()),
            ("pathloss_slope_db", n.pathloss_slope_db.to_string()),
            ("cell_edge_snr_db", n.cell_edge_snr_db.to_string()),
            ("road_offsets_m", flist(&n.road_offsets_m)),
            ("frame_s", n.frame_s.to_string()),
            ("slots_per_frame", n.slots_per_frame.to_string()),
            ("slot_s", n.slot_s.to_string()),
            ("n_frames", n.n_frames.to_string()),
            ("k_max", n.k_max.to_string()),
            ("w_idle_hz", n.w_idle_hz.to_string()),
            ("w_busy_hz", n.w_busy_hz.to_string()),
            ("bw_std_factor", n.bw_std_factor.to_string()),
            ("speed_min_mps", n.speed_min_mps.to_string()),
            ("speed_max_mps", n.speed_max_mps.to_string()),
            ("file_mb_min", n.file_mb_min.to_string()),
            ("file_mb_max", n.file_mb_max.to_string()),
            ("plan_hidden_per_block", list(&t.plan_hidden_per_block)),
            ("multiplier_hidden", list(&t.multiplier_hidden)),
            ("sharing", t.sharing.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("lr", t.lr.to_string()),
            ("seed", t.seed.to_string()),
            ("supervision", t.supervision.name().to_string()),
            ("input_scale", t.input_scale.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn parse_list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|x| parse_num(x.trim())).collect()
}

fn apply(cfg: &mut ExperimentConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    let n = &mut cfg.network;
    let t = &mut cfg.train;
    match key {
        "n_bs" => n.n_bs = parse_num(v)?,
        "cell_radius_m" => n.cell_radius_m = parse_num(v)?,
        "n_tx" => n.n_tx = parse_num(v)?,
        "p_max_w" => n.p_max_w = parse_num(v)?,
        "w_max_hz" => n.w_max_hz = parse_num(v)?,
        "pathloss_intercept_db" => n.pathloss_intercept_db = parse_num(v)?,
        "pathloss_slope_db" => n.pathloss_slope_db = parse_num(v)?,
        "cell_edge_snr_db" => n.cell_edge_snr_db = parse_num(v)?,
        "road_offsets_m" => n.road_offsets_m = parse_list(v)?,
        "frame_s" => n.frame_s = parse_num(v)?,
        "slots_per_frame" => n.slots_per_frame = parse_num(v)?,
        "slot_s" => n.slot_s = parse_num(v)?,
        "n_frames" => {
            n.n_frames = parse_num(v)?;
            t.n_frames = n.n_frames;
        }
        "k_max" => {
            n.k_max = parse_num(v)?;
            t.k_max = n.k_max;
        }
        "w_idle_hz" => n.w_idle_hz = parse_num(v)?,
        "w_busy_hz" => n.w_busy_hz = parse_num(v)?,
        "bw_std_factor" => n.bw_std_factor = parse_num(v)?,
        "speed_min_mps" => n.speed_min_mps = parse_num(v)?,
        "speed_max_mps" => n.speed_max_mps = parse_num(v)?,
        "file_mb_min" => n.file_mb_min = parse_num(v)?,
        "file_mb_max" => n.file_mb_max = parse_num(v)?,
        "plan_hidden_per_block" => t.plan_hidden_per_block = parse_list(v)?,
        "multiplier_hidden" => t.multiplier_hidden = parse_list(v)?,
        "sharing" => t.sharing = parse_num(v)?,
        "epochs" => t.epochs = parse_num(v)?,
        "batch_size" => t.batch_size = parse_num(v)?,
        "lr" => t.lr = parse_num(v)?,
        "seed" => t.seed = parse_num(v)?,
        "supervision" => {
            t.supervision =
                Supervision::from_name(v).ok_or_else(|| format!("unknown supervision {v:?}"))?
        }
        "input_scale" => t.input_scale = parse_num(v)?,
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

/// Parses a config; every error carries its 1-based line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries = Vec::new();
    let mut preset = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                msg: format!("expected `key = value`, got {content:?}"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if v.is_empty() {
            return Err(Error::Config {
                line,
                msg: format!("missing value for {k:?}"),
            });
        }
        if k == "preset" {
            if preset.is_some() {
                return Err(Error::Config {
                    line,
                    msg: "preset given twice".into(),
                });
            }
            preset = Some(match v {
                "desk" => ExperimentConfig::desk(),
                "full" => ExperimentConfig::full(),
                _ => {
                    return Err(Error::Config {
                        line,
                        msg: format!("unknown preset {v:?}"),
                    })
                }
            });
        } else {
            entries.push((line, k, v));
        }
    }
    let mut cfg = preset.unwrap_or_default();
    for (line, k, v) in entries {
        apply(&mut cfg, k, v).map_err(|msg| Error::Config { line, msg })?;
    }
    cfg.validate().map_err(|e| Error::Config {
        line: 0,
        msg: e.to_string(),
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

/// Writes a header object and one record per line.
pub fn write_jsonl<W: Write, H: Serialize, T: Serialize>(
    mut w: W,
    header: &H,
    records: &[T],
) -> Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead, H: DeserializeOwned, T: DeserializeOwned>(
    r: R,
) -> Result<(H, Vec<T>)> {
    let mut header = None;
    let mut records = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |e: serde_json::Error| Error::Format(format!("line {}: {e}", idx + 1));
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(err)?);
        } else {
            records.push(serde_json::from_str(&line).map_err(err)?);
        }
    }
    let header = header.ok_or_else(|| Error::Format("empty file".into()))?;
    Ok((header, records))
}

/// First line of dataset and oracle files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub count: usize,
}

impl FileHeader {
    pub fn new(format: &str, seed: u64, config_hash: &str, count: usize) -> Self {
        Self {
            format: format.into(),
            version: FORMAT_VERSION,
            seed,
            config_hash: config_hash.into(),
            count,
        }
    }

    /// Rejects files of another format, version or record count.
    pub fn check(&self, format: &str, records: usize) -> Result<()> {
        if self.format != format || self.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "expected {format} v{FORMAT_VERSION}, found {} v{}",
                self.format, self.version
            )));
        }
        if self.count != records {
            return Err(Error::Format(format!(
                "header announces {} records, file has {records}",
                self.count
            )));
        }
        Ok(())
    }
}
