//! Prediction-window scenarios on a line of cells.
//!
//! Base stations sit on the x-axis at `(2i + 1)·R_b`, alternating idle and
//! busy residual bandwidth starting with idle. Mobile stations drive along
//! straight roads parallel to that line (all on one side, at the configured
//! offsets) at constant speed, in the +x or −x direction. Each frame a mobile
//! associates with the base station of highest large-scale gain, which on this
//! geometry is the nearest one; exact ties go to the lower index.
//!
//! Noise power is fixed by the cell-edge SNR, taken as the per-antenna receive
//! SNR `P_max·g(R_b)/σ₀²` at distance `R_b`. The frame-average rate then uses
//! the array gain `N_tx` on top of it:
//! `R = W_j·log2(1 + α·N_tx·P_max/σ₀²)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::{derive_seed, substream, Purpose};

/// Bits in one megabyte of file payload.
pub const BITS_PER_MB: f64 = 8e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_bs: usize,
    pub cell_radius_m: f64,
    pub n_tx: usize,
    pub p_max_w: f64,
    pub w_max_hz: f64,
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
    pub cell_edge_snr_db: f64,
    pub road_offsets_m: Vec<f64>,
    /// Frame duration Δ in seconds.
    pub frame_s: f64,
    pub slots_per_frame: usize,
    pub slot_s: f64,
    /// Frames per prediction window, T_f.
    pub n_frames: usize,
    pub k_max: usize,
    pub w_idle_hz: f64,
    pub w_busy_hz: f64,
    /// Standard deviation of slot bandwidth as a fraction of its mean.
    pub bw_std_factor: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    /// File sizes are uniform in `[file_mb_min, file_mb_max]` megabytes.
    pub file_mb_min: f64,
    pub file_mb_max: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_bs: 4,
            cell_radius_m: 250.0,
            n_tx: 8,
            p_max_w: 40.0,
            w_max_hz: 20e6,
            pathloss_intercept_db: 36.8,
            pathloss_slope_db: 36.7,
            cell_edge_snr_db: 5.0,
            road_offsets_m: vec![50.0, 100.0, 150.0],
            frame_s: 1.0,
            slots_per_frame: 100,
            slot_s: 0.01,
            n_frames: 30,
            k_max: 20,
            w_idle_hz: 10e6,
            w_busy_hz: 5e6,
            bw_std_factor: 0.2,
            speed_min_mps: 10.0,
            speed_max_mps: 25.0,
            file_mb_min: 1.0,
            file_mb_max: 1.0,
        }
    }
}

impl NetworkConfig {
    /// Small network used for quick experiments: 2 cells, 4 users, 5 frames.
    pub fn desk() -> Self {
        Self {
            n_bs: 2,
            n_frames: 5,
            k_max: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("network config: {msg}")));
        let positive = [
            ("cell_radius_m", self.cell_radius_m),
            ("p_max_w", self.p_max_w),
            ("w_max_hz", self.w_max_hz),
            ("frame_s", self.frame_s),
            ("slot_s", self.slot_s),
            ("w_idle_hz", self.w_idle_hz),
            ("w_busy_hz", self.w_busy_hz),
            ("speed_min_mps", self.speed_min_mps),
            ("file_mb_min", self.file_mb_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.n_bs == 0 || self.n_tx == 0 || self.slots_per_frame == 0 || self.n_frames == 0 {
            return bad("counts must be positive");
        }
        if self.k_max == 0 {
            return bad("k_max must be >= 1");
        }
        if self.road_offsets_m.is_empty() || self.road_offsets_m.iter().any(|&d| !(d > 0.0)) {
            return bad("road offsets must be positive");
        }
        if (self.slots_per_frame as f64 * self.slot_s - self.frame_s).abs() > 1e-9 * self.frame_s {
            return bad("slots_per_frame * slot_s must equal frame_s");
        }
        if self.speed_max_mps < self.speed_min_mps || self.file_mb_max < self.file_mb_min {
            return bad("ranges must satisfy min <= max");
        }
        if !(self.bw_std_factor >= 0.0) {
            return bad("bw_std_factor must be non-negative");
        }
        Ok(())
    }

    pub fn bs_position(&self, i: usize) -> f64 {
        (2 * i + 1) as f64 * self.cell_radius_m
    }

    /// Mean residual bandwidth of BS `i`; even indices are idle.
    pub fn mean_bandwidth(&self, i: usize) -> f64 {
        if i.is_multiple_of(2) {
            self.w_idle_hz
        } else {
            self.w_busy_hz
        }
    }

    /// Length of the stretch of road covered by the cells.
    pub fn segment_length(&self) -> f64 {
        2.0 * self.cell_radius_m * self.n_bs as f64
    }
}

/// Linear large-scale gain at distance `d` metres.
pub fn pathloss_gain(d: f64, cfg: &NetworkConfig) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance must be positive, got {d}"
        )));
    }
    let loss_db = cfg.pathloss_intercept_db + cfg.pathloss_slope_db * d.log10();
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Noise power σ₀² in watts implied by the cell-edge SNR.
pub fn derive_noise_power(cfg: &NetworkConfig) -> f64 {
    let edge_gain = pathloss_gain(cfg.cell_radius_m, cfg).expect("validated cell radius");
    cfg.p_max_w * edge_gain / 10f64.powf(cfg.cell_edge_snr_db / 10.0)
}

/// Frame-average rate in bit/s for large-scale gain `alpha` and average
/// residual bandwidth `w_hz`.
pub fn avg_rate(alpha: f64, w_hz: f64, cfg: &NetworkConfig) -> f64 {
    let snr = alpha * cfg.n_tx as f64 * cfg.p_max_w / derive_noise_power(cfg);
    w_hz * (1.0 + snr).log2()
}

/// One slot of channel state for one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotChannel {
    pub bandwidth_hz: f64,
    /// `‖γ‖²`, the small-scale array gain.
    pub fading_gain: f64,
}

/// Draws `‖γ‖²` for `N_tx` i.i.d. unit-variance Rayleigh antennas.
pub fn draw_fading_gain<R: Rng + ?Sized>(rng: &mut R, n_tx: usize) -> f64 {
    (0..n_tx).map(|_| -> f64 { Exp1.sample(rng) }).sum()
}

/// Slot rate in bit/s for a known channel.
pub fn slot_rate_for(alpha: f64, ch: SlotChannel, cfg: &NetworkConfig) -> f64 {
    let snr = alpha * ch.fading_gain * cfg.p_max_w / derive_noise_power(cfg);
    ch.bandwidth_hz * (1.0 + snr).log2()
}

/// Slot rate in bit/s with a freshly drawn Rayleigh fading gain.
pub fn slot_rate<R: Rng + ?Sized>(
    rng: &mut R,
    alpha: f64,
    w_slot_hz: f64,
    cfg: &NetworkConfig,
) -> f64 {
    let ch = SlotChannel {
        bandwidth_hz: w_slot_hz,
        fading_gain: draw_fading_gain(rng, cfg.n_tx),
    };
    slot_rate_for(alpha, ch, cfg)
}

/// Serving BS and its large-scale gain for a mobile at `(x, road_offset)`.
pub fn associate(x: f64, road_offset: f64, cfg: &NetworkConfig) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..cfg.n_bs {
        let d = (x - cfg.bs_position(i)).hypot(road_offset);
        let g = pathloss_gain(d, cfg).expect("road offsets are positive");
        if g > best.1 {
            best = (i, g);
        }
    }
    best
}

/// Per-slot residual bandwidth `[bs][frame][slot]` for a scenario seed.
pub fn slot_bandwidth(seed: u64, cfg: &NetworkConfig) -> Vec<Vec<Vec<f64>>> {
    let mut rng = substream(seed, Purpose::Bandwidth, 0);
    (0..cfg.n_bs)
        .map(|i| {
            let mean = cfg.mean_bandwidth(i);
            let normal = Normal::new(mean, cfg.bw_std_factor * mean).expect("validated std");
            (0..cfg.n_frames)
                .map(|_| {
                    (0..cfg.slots_per_frame)
                        .map(|_| normal.sample(&mut rng).clamp(0.0, cfg.w_max_hz))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// One prediction window.
///
/// Matrices indexed by user are `k_max x n_frames`; rows at or beyond `k`
/// are zero padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    /// Number of active users K.
    pub k: usize,
    pub frame_s: f64,
    /// File size B_k in bits, zero for padded users.
    pub file_bits: Vec<f64>,
    /// Frame-average rates R_j^k in bit/s.
    pub rates: Matrix,
    /// Normalized rates r_j^k = R_j^k / (B_k Δ).
    pub norm_rates: Matrix,
    /// One binary matrix M_i per base station.
    pub assoc: Vec<Matrix>,
    /// Large-scale gain α_j^k towards the serving BS.
    pub gain: Matrix,
    /// Frame-average residual bandwidth W_j per BS (`n_bs x n_frames`).
    pub bandwidth: Matrix,
}

impl Scenario {
    pub fn k_max(&self) -> usize {
        self.norm_rates.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.norm_rates.cols()
    }

    pub fn n_bs(&self) -> usize {
        self.assoc.len()
    }

    pub fn serving_bs(&self, k: usize, j: usize) -> Option<usize> {
        self.assoc.iter().position(|m| m.get(k, j) != 0.0)
    }

    /// Builds a scenario directly from normalized rates and serving cells, for
    /// hand-made instances. Files are 1 MB and frames 1 s.
    pub fn from_normalized(
        k: usize,
        n_bs: usize,
        norm_rates: Matrix,
        serving: &[Vec<Option<usize>>],
    ) -> Result<Self> {
        let (k_max, t_f) = norm_rates.shape();
        if serving.len() != k_max || serving.iter().any(|r| r.len() != t_f) {
            return Err(Error::Dimension(
                "serving map must be k_max x n_frames".into(),
            ));
        }
        let mut assoc = vec![Matrix::zeros(k_max, t_f); n_bs];
        for (kk, row) in serving.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                if let Some(i) = s {
                    if *i >= n_bs {
                        return Err(Error::InvalidArgument(format!("BS index {i} >= {n_bs}")));
                    }
                    assoc[*i].set(kk, j, 1.0);
                }
            }
        }
        let file_bits: Vec<f64> = (0..k_max)
            .map(|kk| if kk < k { BITS_PER_MB } else { 0.0 })
            .collect();
        let rates = Matrix::from_fn(k_max, t_f, |kk, j| norm_rates.get(kk, j) * file_bits[kk]);
        let sc = Self {
            seed: 0,
            k,
            frame_s: 1.0,
            file_bits,
            rates,
            norm_rates,
            assoc,
            gain: Matrix::zeros(k_max, t_f),
            bandwidth: Matrix::zeros(n_bs, t_f),
        };
        sc.validate()?;
        Ok(sc)
    }

    /// Checks the association and padding invariants.
    pub fn validate(&self) -> Result<()> {
        let (k_max, t_f) = self.norm_rates.shape();
        if self.k == 0 || self.k > k_max {
            return Err(Error::InvalidArgument(format!(
                "K = {} outside 1..={k_max}",
                self.k
            )));
        }
        if self.assoc.iter().any(|m| m.shape() != (k_max, t_f)) || self.file_bits.len() != k_max {
            return Err(Error::Dimension(
                "scenario matrices disagree in shape".into(),
            ));
        }
        for kk in 0..k_max {
            for j in 0..t_f {
                let n: f64 = self.assoc.iter().map(|m| m.get(kk, j)).sum();
                let expected = if kk < self.k { 1.0 } else { 0.0 };
                if n != expected {
                    return Err(Error::InvalidArgument(format!(
                        "user {kk} frame {j} associated to {n} base stations"
                    )));
                }
                let r = self.norm_rates.get(kk, j);
                if r < 0.0 || (kk >= self.k && r != 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "bad rate at user {kk} frame {j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Draws a scenario seed from `rng` and builds the scenario from it.
pub fn gen_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    cfg: &NetworkConfig,
) -> Result<Scenario> {
    gen_scenario_seeded(rng.random(), k, cfg)
}

/// Builds the scenario identified by `seed` with `k` active users.
pub fn gen_scenario_seeded(seed: u64, k: usize, cfg: &NetworkConfig) -> Result<Scenario> {
    cfg.validate()?;
    if k == 0 || k > cfg.k_max {
        return Err(Error::InvalidArgument(format!(
            "K = {k} outside 1..={}",
            cfg.k_max
        )));
    }
    let (k_max, t_f) = (cfg.k_max, cfg.n_frames);
    let mut rng = substream(seed, Purpose::Scenario, 0);

    let slots = slot_bandwidth(seed, cfg);
    let bandwidth = Matrix::from_fn(cfg.n_bs, t_f, |i, j| {
        slots[i][j].iter().sum::<f64>() / cfg.slots_per_frame as f64
    });

    let mut file_bits = vec![0.0; k_max];
    let mut rates = Matrix::zeros(k_max, t_f);
    let mut norm_rates = Matrix::zeros(k_max, t_f);
    let mut gain = Matrix::zeros(k_max, t_f);
    let mut assoc = vec![Matrix::zeros(k_max, t_f); cfg.n_bs];

    for user in 0..k {
        let road = cfg.road_offsets_m[rng.random_range(0..cfg.road_offsets_m.len())];
        let start = rng.random_range(0.0..cfg.segment_length());
        let speed = if cfg.speed_max_mps > cfg.speed_min_mps {
            rng.random_range(cfg.speed_min_mps..cfg.speed_max_mps)
        } else {
            cfg.speed_min_mps
        };
        let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mb = if cfg.file_mb_max > cfg.file_mb_min {
            rng.random_range(cfg.file_mb_min..=cfg.file_mb_max)
        } else {
            cfg.file_mb_min
        };
        file_bits[user] = mb * BITS_PER_MB;

        for j in 0..t_f {
            // Position at the middle of frame j.
            let x = start + dir * speed * (j as f64 + 0.5) * cfg.frame_s;
            let (bs, alpha) = associate(x, road, cfg);
            assoc[bs].set(user, j, 1.0);
            gain.set(user, j, alpha);
            let r = avg_rate(alpha, bandwidth.get(bs, j), cfg);
            rates.set(user, j, r);
            norm_rates.set(user, j, r / (file_bits[user] * cfg.frame_s));
        }
    }

    Ok(Scenario {
        seed,
        k,
        frame_s: cfg.frame_s,
        file_bits,
        rates,
        norm_rates,
        assoc,
        gain,
        bandwidth,
    })
}

/// `count` scenarios of a run seeded with `seed`. Scenario `n` is built from
/// `derive_seed(seed, n)`; its user count is `k_max`, or uniform in
/// `1..=k_max` from the user-count stream when `random_k` is set.
pub fn gen_dataset(
    seed: u64,
    count: usize,
    random_k: bool,
    cfg: &NetworkConfig,
) -> Result<Vec<Scenario>> {
    (0..count as u64)
        .map(|n| {
            let k = if random_k {
                substream(seed, Purpose::UserCount, n).random_range(1..=cfg.k_max)
            } else {
                cfg.k_max
            };
            gen_scenario_seeded(derive_seed(seed, n), k, cfg)
        })
        .collect()
}
