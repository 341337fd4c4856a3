//! Deterministic synthetic gesture streams.
//!
//! A bright primitive (a bar or a dot) moves across the sensor. Pixels
//! entered by its leading edge fire positive events, pixels left behind by
//! its trailing edge fire negative events, each delayed by a uniform jitter
//! below one millisecond. Uniform background noise is mixed in on request.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{Event, EventStream};
use crate::error::{Error, Result};

const JITTER_US: u64 = 1000;

/// Motion patterns the generator can draw, indexed by class id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Motion {
    BarRight,
    BarLeft,
    BarDown,
    BarUp,
    DotClockwise,
    DotCounterClockwise,
}

impl Motion {
    pub const ALL: [Motion; 6] = [
        Motion::BarRight,
        Motion::BarLeft,
        Motion::BarDown,
        Motion::BarUp,
        Motion::DotClockwise,
        Motion::DotCounterClockwise,
    ];

    pub fn from_id(id: u32) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn id(self) -> u32 {
        Self::ALL.iter().position(|&m| m == self).unwrap() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub class_id: u32,
    pub duration_us: u64,
    pub width: u16,
    pub height: u16,
    /// Expected signal events per pixel crossed by an edge.
    pub signal_rate: f64,
    /// Expected noise events per pixel per second.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            class_id: 0,
            duration_us: 240_000,
            width: 128,
            height: 128,
            signal_rate: 1.0,
            noise_rate: 0.5,
            seed: 0,
        }
    }
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<EventStream> {
    let motion = Motion::from_id(spec.class_id)
        .ok_or_else(|| Error::Config(format!("unknown motion class {}", spec.class_id)))?;
    if spec.duration_us == 0 {
        return Err(Error::Config("synthetic duration must be positive".into()));
    }
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::Config("sensor dimensions must be positive".into()));
    }
    for (name, rate) in [
        ("signal_rate", spec.signal_rate),
        ("noise_rate", spec.noise_rate),
    ] {
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::Config(format!("{name} must be finite and >= 0")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gen = Generator {
        rng: &mut rng,
        spec,
        events: Vec::new(),
    };
    match motion {
        Motion::BarRight => gen.bar(Axis::X, false),
        Motion::BarLeft => gen.bar(Axis::X, true),
        Motion::BarDown => gen.bar(Axis::Y, false),
        Motion::BarUp => gen.bar(Axis::Y, true),
        Motion::DotClockwise => gen.dot(true),
        Motion::DotCounterClockwise => gen.dot(false),
    }
    gen.noise();

    let mut events = gen.events;
    events.sort_by_key(|e| e.t);
    EventStream::new(spec.width, spec.height, events, Some(spec.class_id))
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

struct Generator<'a> {
    rng: &'a mut ChaCha8Rng,
    spec: &'a SynthSpec,
    events: Vec<Event>,
}

impl Generator<'_> {
    /// Number of events for one edge crossing: floor(rate) plus a Bernoulli
    /// draw on the fractional part.
    fn crossing_count(&mut self) -> u32 {
        let rate = self.spec.signal_rate;
        let whole = rate.floor();
        let extra = self.rng.gen::<f64>() < rate - whole;
        whole as u32 + u32::from(extra)
    }

    fn emit_crossing(&mut self, t: f64, x: u16, y: u16, p: u8) {
        if t < 0.0 {
            return;
        }
        for _ in 0..self.crossing_count() {
            let te = t as u64 + self.rng.gen_range(0..JITTER_US);
            if te < self.spec.duration_us {
                self.events.push(Event::new(te, x, y, p));
            }
        }
    }

    fn bar(&mut self, axis: Axis, reversed: bool) {
        let (along, across) = match axis {
            Axis::X => (self.spec.width as f64, self.spec.height as f64),
            Axis::Y => (self.spec.height as f64, self.spec.width as f64),
        };
        let thickness = f64::from(self.rng.gen_range(3u32..=6));
        let span_start = (self.rng.gen_range(0.1..0.3) * across).floor();
        let span_len = (self.rng.gen_range(0.4..0.6) * across).ceil().max(1.0);
        let lead0 = self.rng.gen_range(0.05..0.2) * along;
        let travel = self.rng.gen_range(0.6..0.75) * along;
        let duration = self.spec.duration_us as f64;
        let speed = travel / duration;

        let span_end = (span_start + span_len).min(across);
        for c in 0..along as u32 {
            let enter = (f64::from(c) - lead0) / speed;
            let leave = (f64::from(c) + thickness - lead0) / speed;
            let line = if reversed { along as u32 - 1 - c } else { c };
            for (t, p) in [(enter, 1u8), (leave, 0u8)] {
                if !(0.0..duration).contains(&t) {
                    continue;
                }
                for k in span_start as u32..span_end as u32 {
                    let (x, y) = match axis {
                        Axis::X => (line, k),
                        Axis::Y => (k, line),
                    };
                    self.emit_crossing(t, x as u16, y as u16, p);
                }
            }
        }
    }

    fn dot(&mut self, clockwise: bool) {
        let (w, h) = (self.spec.width as f64, self.spec.height as f64);
        let scale = w.min(h);
        let cx = w / 2.0 + self.rng.gen_range(-0.05..0.05) * scale;
        let cy = h / 2.0 + self.rng.gen_range(-0.05..0.05) * scale;
        let orbit = self.rng.gen_range(0.2..0.3) * scale;
        let radius = (self.rng.gen_range(0.04..0.07) * scale).max(1.5);
        let phase = self.rng.gen_range(0.0..std::f64::consts::TAU);
        let duration = self.spec.duration_us as f64;
        // One revolution over the stream; y grows downward, so a growing
        // angle moves clockwise on screen.
        let omega = std::f64::consts::TAU / duration * if clockwise { 1.0 } else { -1.0 };
        let step = (0.5 / (omega.abs() * orbit)).max(1.0);

        let inside = |t: f64| {
            let a = phase + omega * t;
            let (px, py) = (cx + orbit * a.cos(), cy + orbit * a.sin());
            let mut set = Vec::new();
            let x0 = (px - radius).floor().max(0.0) as i64;
            let x1 = (px + radius).ceil().min(w - 1.0) as i64;
            let y0 = (py - radius).floor().max(0.0) as i64;
            let y1 = (py + radius).ceil().min(h - 1.0) as i64;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (dx, dy) = (x as f64 + 0.5 - px, y as f64 + 0.5 - py);
                    if dx * dx + dy * dy <= radius * radius {
                        set.push((x as u16, y as u16));
                    }
                }
            }
            set
        };

        let mut prev = inside(0.0);
        let mut t = step;
        while t < duration {
            let cur = inside(t);
            for &(x, y) in cur.iter().filter(|q| !prev.contains(q)) {
                self.emit_crossing(t, x, y, 1);
            }
            for &(x, y) in prev.iter().filter(|q| !cur.contains(q)) {
                self.emit_crossing(t, x, y, 0);
            }
            prev = cur;
            t += step;
        }
    }

    fn noise(&mut self) {
        let s = self.spec;
        let mean =
            s.noise_rate * f64::from(s.width) * f64::from(s.height) * s.duration_us as f64 / 1e6;
        if mean <= 0.0 {
            return;
        }
        let n = Poisson::new(mean).map_or(0, |d| d.sample(self.rng) as u64);
        for _ in 0..n {
            let t = self.rng.gen_range(0..s.duration_us);
            let x = self.rng.gen_range(0..s.width);
            let y = self.rng.gen_range(0..s.height);
            let p = self.rng.gen_range(0..=1u8);
            self.events.push(Event::new(t, x, y, p));
        }
    }
}
