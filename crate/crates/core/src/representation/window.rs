use super::{activated_patches, build_frame, PatchToken, ReprConfig};
use crate::event_io::EventStream;

/// Tokens of one (possibly expanded) window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub tokens: Vec<PatchToken>,
    pub window_start: u64,
    pub window_end: u64,
    /// The stream ran out before `min_patches` patches were reached.
    pub exhausted: bool,
}

impl WindowResult {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

/// Pixel-occupancy bookkeeping used to find the window end without
/// rebuilding the frame for every candidate. A patch's activation depends
/// only on which pixels saw events, never on the binning, so the activated
/// count can only change when a new event enters the window.
struct Occupancy {
    width: usize,
    patch: usize,
    grid_w: usize,
    grid_h: usize,
    threshold: usize,
    pixel: Vec<bool>,
    per_patch: Vec<usize>,
    activated: usize,
}

impl Occupancy {
    fn new(stream: &EventStream, cfg: &ReprConfig) -> Self {
        let (grid_h, grid_w) = cfg.grid_dims(stream.width(), stream.height());
        let width = usize::from(stream.width());
        Self {
            width,
            patch: cfg.patch_size,
            grid_w,
            grid_h,
            threshold: cfg.activation_threshold(),
            pixel: vec![false; width * usize::from(stream.height())],
            per_patch: vec![0; grid_h * grid_w],
            // With a zero threshold every patch is active from the start.
            activated: if cfg.activation_threshold() == 0 {
                grid_h * grid_w
            } else {
                0
            },
        }
    }

    fn add(&mut self, x: usize, y: usize) {
        let i = y * self.width + x;
        if self.pixel[i] {
            return;
        }
        self.pixel[i] = true;
        let (gr, gc) = (y / self.patch, x / self.patch);
        if gr >= self.grid_h || gc >= self.grid_w {
            return;
        }
        let c = &mut self.per_patch[gr * self.grid_w + gc];
        *c += 1;
        if *c == self.threshold {
            self.activated += 1;
        }
    }
}

/// Builds the window starting at `cursor`, widening it by the expansion step
/// until it holds at least `min_patches` activated patches or covers the
/// rest of the stream.
///
/// The returned end is the smallest `cursor + delta_t + k * step` meeting
/// the patch rule, or the first such value past the last event.
pub fn next_window(stream: &EventStream, cursor: u64, cfg: &ReprConfig) -> WindowResult {
    let events = stream.events();
    let step = cfg.expansion_step();
    let mut occ = Occupancy::new(stream, cfg);
    let mut i = events.partition_point(|e| e.t < cursor);
    let mut end = cursor.saturating_add(cfg.delta_t_us);
    let exhausted = loop {
        while i < events.len() && events[i].t < end {
            occ.add(usize::from(events[i].x), usize::from(events[i].y));
            i += 1;
        }
        if occ.activated >= cfg.min_patches {
            break false;
        }
        if i == events.len() || end == u64::MAX {
            break true;
        }
        // Skip candidates that would add no events: the next one that can
        // change the count is the first end strictly past events[i].t.
        let gap = events[i].t - end + 1;
        let k = gap.div_ceil(step);
        end = end.saturating_add(k.saturating_mul(step));
    };

    // Rebuilding cannot fail: end > cursor because delta_t > 0.
    let frame = build_frame(stream, cursor, end, cfg).expect("window end after cursor");
    WindowResult {
        tokens: activated_patches(&frame, cfg),
        window_start: cursor,
        window_end: end,
        exhausted,
    }
}

/// Sequential cursor over a stream's windows.
///
/// Windows are contiguous from time 0. Windows without tokens are skipped,
/// and iteration stops after the first exhausted window.
pub struct Windows<'a> {
    stream: &'a EventStream,
    cfg: &'a ReprConfig,
    cursor: u64,
    done: bool,
}

pub fn window_iterator<'a>(stream: &'a EventStream, cfg: &'a ReprConfig) -> Windows<'a> {
    Windows {
        stream,
        cfg,
        cursor: 0,
        done: false,
    }
}

impl Iterator for Windows<'_> {
    type Item = WindowResult;

    fn next(&mut self) -> Option<WindowResult> {
        while !self.done {
            match self.stream.last_t() {
                Some(last) if self.cursor <= last => {}
                _ => {
                    self.done = true;
                    break;
                }
            }
            let w = next_window(self.stream, self.cursor, self.cfg);
            self.cursor = w.window_end;
            if w.exhausted {
                self.done = true;
            }
            if !w.tokens.is_empty() {
                return Some(w);
            }
        }
        None
    }
}
