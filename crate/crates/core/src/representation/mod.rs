//! Patch-based event representation.
//!
//! A window of events becomes a per-pixel histogram `F` of shape
//! `H x W x B x 2` (time bins, polarity), smoothed as `ln(F + 1)`. The frame
//! is cut into non-overlapping `P x P` patches; a patch is kept when at
//! least `m` percent of its pixels saw an event. Windows that keep fewer
//! than `n` patches are widened until they do or the stream runs out.

mod window;

pub use window::{next_window, window_iterator, WindowResult, Windows};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_io::EventStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReprConfig {
    /// Base window length in microseconds.
    pub delta_t_us: u64,
    pub bins: usize,
    pub patch_size: usize,
    /// Percent of patch pixels that must have events.
    pub min_pixel_pct: f64,
    /// Minimum activated patches per window.
    pub min_patches: usize,
    /// Microseconds added per expansion; `None` means `delta_t_us`.
    pub expansion_step_us: Option<u64>,
}

impl Default for ReprConfig {
    fn default() -> Self {
        Self {
            delta_t_us: 24_000,
            bins: 2,
            patch_size: 6,
            min_pixel_pct: 7.5,
            min_patches: 16,
            expansion_step_us: None,
        }
    }
}

impl ReprConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.delta_t_us == 0 {
            return fail("delta_t_us must be positive");
        }
        if self.bins == 0 {
            return fail("bins must be >= 1");
        }
        if self.patch_size == 0 {
            return fail("patch_size must be >= 1");
        }
        if !(0.0..=100.0).contains(&self.min_pixel_pct) {
            return fail("min_pixel_pct must lie in [0, 100]");
        }
        if self.expansion_step_us == Some(0) {
            return fail("expansion_step_us must be positive");
        }
        Ok(())
    }

    pub fn expansion_step(&self) -> u64 {
        self.expansion_step_us.unwrap_or(self.delta_t_us)
    }

    /// Smallest pixel count that activates a patch: `ceil(m/100 * P^2)`.
    pub fn activation_threshold(&self) -> usize {
        let area = (self.patch_size * self.patch_size) as f64;
        (self.min_pixel_pct * area / 100.0).ceil() as usize
    }

    /// Flattened token length `P^2 * B * 2`.
    pub fn token_len(&self) -> usize {
        self.patch_size * self.patch_size * self.bins * 2
    }

    /// Patch grid `(rows, cols)` for a sensor; trailing pixels are dropped.
    pub fn grid_dims(&self, width: u16, height: u16) -> (usize, usize) {
        (
            usize::from(height) / self.patch_size,
            usize::from(width) / self.patch_size,
        )
    }
}

/// Dense histogram of one window and its log-smoothed copy.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFrame {
    pub width: usize,
    pub height: usize,
    pub bins: usize,
    /// Layout `[y][x][bin][polarity]`, row-major.
    pub counts: Vec<u32>,
    pub smoothed: Vec<f64>,
    pub window_start: u64,
    pub window_end: u64,
}

impl EventFrame {
    #[inline]
    pub fn index(&self, y: usize, x: usize, bin: usize, polarity: usize) -> usize {
        ((y * self.width + x) * self.bins + bin) * 2 + polarity
    }

    pub fn count(&self, y: usize, x: usize, bin: usize, polarity: usize) -> u32 {
        self.counts[self.index(y, x, bin, polarity)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// The `2B` counts of one pixel.
    pub fn pixel(&self, y: usize, x: usize) -> &[u32] {
        let i = self.index(y, x, 0, 0);
        &self.counts[i..i + 2 * self.bins]
    }

    pub fn pixel_active(&self, y: usize, x: usize) -> bool {
        self.pixel(y, x).iter().any(|&c| c > 0)
    }
}

/// A flattened activated patch and its grid position.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchToken {
    /// Pixel row-major within the patch, then bin, then polarity.
    pub values: Vec<f64>,
    pub grid_row: usize,
    pub grid_col: usize,
}

/// Time bin of an event at `t` in `[start, end)`, clamped to the last bin.
#[inline]
pub fn bin_index(t: u64, start: u64, end: u64, bins: usize) -> usize {
    let num = u128::from(t - start) * bins as u128;
    let b = (num / u128::from(end - start)) as usize;
    b.min(bins - 1)
}

pub fn build_frame(
    stream: &EventStream,
    window_start: u64,
    window_end: u64,
    cfg: &ReprConfig,
) -> Result<EventFrame> {
    if window_end <= window_start {
        return Err(Error::InvertedWindow {
            start: window_start,
            end: window_end,
        });
    }
    let (width, height, bins) = (
        usize::from(stream.width()),
        usize::from(stream.height()),
        cfg.bins,
    );
    let mut frame = EventFrame {
        width,
        height,
        bins,
        counts: vec![0; width * height * bins * 2],
        smoothed: Vec::new(),
        window_start,
        window_end,
    };
    for e in stream.slice_time(window_start, window_end) {
        let b = bin_index(e.t, window_start, window_end, bins);
        let i = frame.index(usize::from(e.y), usize::from(e.x), b, usize::from(e.p));
        frame.counts[i] += 1;
    }
    frame.smoothed = frame.counts.iter().map(|&c| f64::from(c).ln_1p()).collect();
    Ok(frame)
}

/// Number of event-bearing pixels in the patch at grid cell `(gr, gc)`.
pub fn patch_active_pixels(frame: &EventFrame, p: usize, gr: usize, gc: usize) -> usize {
    let mut n = 0;
    for y in gr * p..(gr + 1) * p {
        for x in gc * p..(gc + 1) * p {
            n += usize::from(frame.pixel_active(y, x));
        }
    }
    n
}

fn flatten_patch(frame: &EventFrame, p: usize, gr: usize, gc: usize) -> Vec<f64> {
    let per_pixel = 2 * frame.bins;
    let mut values = Vec::with_capacity(p * p * per_pixel);
    for y in gr * p..(gr + 1) * p {
        let row_start = frame.index(y, gc * p, 0, 0);
        values.extend_from_slice(&frame.smoothed[row_start..row_start + p * per_pixel]);
    }
    values
}

/// Activated patches of a frame in grid row-major order.
pub fn activated_patches(frame: &EventFrame, cfg: &ReprConfig) -> Vec<PatchToken> {
    let p = cfg.patch_size;
    let (gh, gw) = (frame.height / p, frame.width / p);
    let threshold = cfg.activation_threshold();
    let mut tokens = Vec::new();
    for gr in 0..gh {
        for gc in 0..gw {
            if patch_active_pixels(frame, p, gr, gc) >= threshold {
                tokens.push(PatchToken {
                    values: flatten_patch(frame, p, gr, gc),
                    grid_row: gr,
                    grid_col: gc,
                });
            }
        }
    }
    tokens
}

/// ASCII map of the patch grid: `#` for activated cells, `.` otherwise.
pub fn render_activation_grid(tokens: &[PatchToken], grid_h: usize, grid_w: usize) -> String {
    let mut cells = vec![b'.'; grid_h * grid_w];
    for t in tokens {
        if t.grid_row < grid_h && t.grid_col < grid_w {
            cells[t.grid_row * grid_w + t.grid_col] = b'#';
        }
    }
    let mut out = String::with_capacity(grid_h * (grid_w + 1));
    for row in cells.chunks(grid_w.max(1)).take(grid_h) {
        out.push_str(std::str::from_utf8(row).unwrap());
        out.push('\n');
    }
    out
}
