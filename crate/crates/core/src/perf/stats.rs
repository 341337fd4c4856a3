use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::event_io::EventStream;
use crate::representation::{window_iterator, ReprConfig};

/// Distribution of activated patches per window over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchStats {
    pub windows: usize,
    pub mean_tokens: f64,
    pub median_tokens: f64,
    /// Windows per token count.
    pub histogram: BTreeMap<usize, usize>,
    /// Mean of `T / (grid_h * grid_w)` over windows.
    pub mean_fraction: f64,
}

pub fn patch_stats(dataset: &[EventStream], repr: &ReprConfig) -> Result<PatchStats> {
    if dataset.is_empty() {
        return Err(Error::Dataset("empty dataset".into()));
    }
    repr.validate()?;
    let mut counts = Vec::new();
    let mut fraction_sum = 0.0;
    for s in dataset {
        let (gh, gw) = repr.grid_dims(s.width(), s.height());
        let capacity = (gh * gw).max(1) as f64;
        for w in window_iterator(s, repr) {
            counts.push(w.token_count());
            fraction_sum += w.token_count() as f64 / capacity;
        }
    }
    let mut histogram = BTreeMap::new();
    for &c in &counts {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let n = counts.len();
    if n == 0 {
        return Ok(PatchStats {
            windows: 0,
            mean_tokens: 0.0,
            median_tokens: 0.0,
            histogram,
            mean_fraction: 0.0,
        });
    }
    counts.sort_unstable();
    let median_tokens = if n % 2 == 1 {
        counts[n / 2] as f64
    } else {
        (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0
    };
    Ok(PatchStats {
        windows: n,
        mean_tokens: counts.iter().sum::<usize>() as f64 / n as f64,
        median_tokens,
        histogram,
        mean_fraction: fraction_sum / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_io::{generate_synthetic, Event, SynthSpec};

    #[test]
    fn empty_windows_do_not_count() {
        let repr = ReprConfig {
            delta_t_us: 100,
            patch_size: 2,
            min_pixel_pct: 50.0,
            min_patches: 1,
            ..ReprConfig::default()
        };
        // Two lit patches, a long silence, one more lit patch.
        let ev = vec![
            Event::new(0, 0, 0, 1),
            Event::new(0, 1, 0, 1),
            Event::new(0, 2, 0, 1),
            Event::new(0, 3, 0, 1),
            Event::new(1000, 0, 2, 1),
            Event::new(1000, 1, 2, 1),
        ];
        let s = EventStream::new(4, 4, ev, None).unwrap();
        let st = patch_stats(&[s], &repr).unwrap();
        assert_eq!(st.windows, 2);
        assert_eq!(st.histogram, BTreeMap::from([(1, 1), (2, 1)]));
        assert_eq!(st.mean_tokens, 1.5);
        assert_eq!(st.mean_fraction, 1.5 / 4.0);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(patch_stats(&[], &ReprConfig::default()).is_err());
    }

    #[test]
    fn synthetic_bars_are_sparse() {
        let data: Vec<_> = (0..4)
            .map(|c| {
                generate_synthetic(&SynthSpec {
                    class_id: c,
                    noise_rate: 0.0,
                    seed: c as u64,
                    ..SynthSpec::default()
                })
                .unwrap()
            })
            .collect();
        let st = patch_stats(&data, &ReprConfig::default()).unwrap();
        assert!(st.windows > 0);
        assert!(st.mean_fraction < 0.5, "{}", st.mean_fraction);
    }
}
