use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::harness::SessionLog;

pub const DEFAULT_CELL_SIZE_M: f64 = 1.0;

/// Seconds of user dwell per square cell, row 0 at `y = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub world: String,
    pub cell_size_m: f64,
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<f64>,
    pub total_s: f64,
    pub excluded_speech_s: f64,
}

impl Heatmap {
    pub fn new(world: impl Into<String>, cell_size_m: f64, rows: usize, cols: usize) -> Self {
        Self {
            world: world.into(),
            cell_size_m,
            rows,
            cols,
            cells: vec![0.0; rows * cols],
            total_s: 0.0,
            excluded_speech_s: 0.0,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.cols + col]
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }

    fn index_of(&self, x: f64, y: f64) -> usize {
        let clamp = |v: f64, n: usize| ((v / self.cell_size_m).floor().max(0.0) as usize).min(n - 1);
        clamp(y, self.rows) * self.cols + clamp(x, self.cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "e")]
    E,
    #[serde(rename = "2")]
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub h: f64,
    pub n_nonzero_cells: usize,
    pub cell_size_m: f64,
    pub log_base: LogBase,
}

/// User dwell heatmap. Each trajectory sample stands for one sample period
/// in its cell; with `exclude_agent_speech`, samples taken while the agent
/// is in `Playback` are set aside instead.
pub fn heatmap(log: &SessionLog, cell_size_m: f64, exclude_agent_speech: bool) -> Result<Heatmap, AnalyticsError> {
    log.validate()?;
    if !(cell_size_m > 0.0) {
        return Err(AnalyticsError::InvalidCellSize(cell_size_m));
    }
    let period = log.header.sample_period_s;
    let cells_for = |extent: f64| ((extent / cell_size_m).ceil() as usize).max(1);
    let mut h = Heatmap::new(
        log.header.world.clone(),
        cell_size_m,
        cells_for(log.header.world_height_m),
        cells_for(log.header.world_width_m),
    );
    let speech: Vec<(f64, f64)> = log
        .agent_intervals
        .iter()
        .filter(|iv| iv.state == "Playback")
        .map(|iv| (iv.t0_s, iv.t1_s))
        .collect();
    let mut any = false;
    for s in log.user_samples() {
        any = true;
        h.total_s += period;
        if exclude_agent_speech && speech.iter().any(|&(a, b)| a <= s.t_s && s.t_s < b) {
            h.excluded_speech_s += period;
            continue;
        }
        let i = h.index_of(s.x, s.y);
        h.cells[i] += period;
    }
    if !any {
        return Err(AnalyticsError::EmptyTrajectory);
    }
    Ok(h)
}

/// Shannon entropy of a dwell distribution, skipping empty cells.
pub fn entropy_of(cells: &[f64], base: LogBase) -> Option<(f64, usize)> {
    let total: f64 = cells.iter().filter(|c| **c > 0.0).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut h = 0.0;
    let mut n = 0;
    for &c in cells.iter().filter(|c| **c > 0.0) {
        let p = c / total;
        h -= p * p.ln();
        n += 1;
    }
    let h = match base {
        LogBase::E => h,
        LogBase::Two => h / std::f64::consts::LN_2,
    };
    Some((h.max(0.0), n))
}

pub fn spatial_entropy(h: &Heatmap) -> Result<EntropyResult, AnalyticsError> {
    spatial_entropy_base(h, LogBase::E)
}

pub fn spatial_entropy_base(h: &Heatmap, log_base: LogBase) -> Result<EntropyResult, AnalyticsError> {
    let (value, n_nonzero_cells) = entropy_of(&h.cells, log_base).ok_or(AnalyticsError::EmptyHeatmap)?;
    Ok(EntropyResult {
        h: value,
        n_nonzero_cells,
        cell_size_m: h.cell_size_m,
        log_base,
    })
}

/// Blue (short) to red (long) over `ln(1 + dwell)`, scaled to the hottest
/// cell. Empty cells are white.
pub fn colormap(dwell_s: f64, max_s: f64) -> [u8; 3] {
    if dwell_s <= 0.0 || max_s <= 0.0 {
        return [255, 255, 255];
    }
    let v = ((1.0 + dwell_s).ln() / (1.0 + max_s).ln()).clamp(0.0, 1.0);
    [(255.0 * v).round() as u8, 0, (255.0 * (1.0 - v)).round() as u8]
}

/// Binary PPM (P6), `scale` pixels per cell, north up.
pub fn render_ppm(h: &Heatmap, scale: usize) -> Vec<u8> {
    let scale = scale.max(1);
    let (w, ht) = (h.cols * scale, h.rows * scale);
    let max = h.cells.iter().copied().fold(0.0, f64::max);
    let mut out = format!("P6\n{w} {ht}\n255\n").into_bytes();
    out.reserve(w * ht * 3);
    for py in 0..ht {
        let row = h.rows - 1 - py / scale;
        for px in 0..w {
            out.extend_from_slice(&colormap(h.get(row, px / scale), max));
        }
    }
    out
}
