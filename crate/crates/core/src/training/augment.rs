use rand::Rng;

use super::config::TrainConfig;
use crate::representation::WindowResult;

/// Moves every token by `(dr, dc)` grid cells, dropping tokens that leave
/// the `grid_h x grid_w` grid and windows left without tokens.
pub fn spatial_shift(
    windows: &[WindowResult],
    dr: i64,
    dc: i64,
    grid_h: usize,
    grid_w: usize,
) -> Vec<WindowResult> {
    let shift = |v: usize, d: i64, n: usize| -> Option<usize> {
        let s = v as i64 + d;
        (0..n as i64).contains(&s).then_some(s as usize)
    };
    windows
        .iter()
        .filter_map(|w| {
            let tokens: Vec<_> = w
                .tokens
                .iter()
                .filter_map(|t| {
                    let r = shift(t.grid_row, dr, grid_h)?;
                    let c = shift(t.grid_col, dc, grid_w)?;
                    let mut t = t.clone();
                    t.grid_row = r;
                    t.grid_col = c;
                    Some(t)
                })
                .collect();
            (!tokens.is_empty()).then(|| WindowResult {
                tokens,
                ..w.clone()
            })
        })
        .collect()
}

/// Keeps a random contiguous run of at least `ceil(frac * n)` windows.
pub fn temporal_crop(windows: &[WindowResult], frac: f64, rng: &mut impl Rng) -> Vec<WindowResult> {
    let n = windows.len();
    if n == 0 || frac >= 1.0 {
        return windows.to_vec();
    }
    let min_keep = ((frac * n as f64).ceil() as usize).clamp(1, n);
    let keep = rng.gen_range(min_keep..=n);
    let start = rng.gen_range(0..=n - keep);
    windows[start..start + keep].to_vec()
}

/// Drops each token with probability `p`; a window that would lose every
/// token keeps one of them at random.
pub fn token_drop(windows: &[WindowResult], p: f64, rng: &mut impl Rng) -> Vec<WindowResult> {
    if p <= 0.0 {
        return windows.to_vec();
    }
    windows
        .iter()
        .map(|w| {
            let mut tokens: Vec<_> = w
                .tokens
                .iter()
                .filter(|_| rng.gen::<f64>() >= p)
                .cloned()
                .collect();
            if tokens.is_empty() && !w.tokens.is_empty() {
                tokens.push(w.tokens[rng.gen_range(0..w.tokens.len())].clone());
            }
            WindowResult {
                tokens,
                ..w.clone()
            }
        })
        .collect()
}

/// Temporal crop, then spatial shift, then token drop. A shift that would
/// remove every token is skipped.
pub fn augment(
    windows: &[WindowResult],
    cfg: &TrainConfig,
    grid: (usize, usize),
    rng: &mut impl Rng,
) -> Vec<WindowResult> {
    let mut out = temporal_crop(windows, cfg.temporal_crop_frac, rng);
    if cfg.spatial_shift_max > 0 {
        let m = cfg.spatial_shift_max as i64;
        let dr = rng.gen_range(-m..=m);
        let dc = rng.gen_range(-m..=m);
        let shifted = spatial_shift(&out, dr, dc, grid.0, grid.1);
        if !shifted.is_empty() {
            out = shifted;
        }
    }
    token_drop(&out, cfg.token_drop_p, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::PatchToken;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn window(cells: &[(usize, usize)], start: u64) -> WindowResult {
        WindowResult {
            tokens: cells
                .iter()
                .map(|&(r, c)| PatchToken {
                    values: vec![r as f64, c as f64],
                    grid_row: r,
                    grid_col: c,
                })
                .collect(),
            window_start: start,
            window_end: start + 10,
            exhausted: false,
        }
    }

    fn sample() -> Vec<WindowResult> {
        (0..8)
            .map(|k| window(&[(0, 0), (1, 2), (3, 3), (2, k % 4)], 10 * k as u64))
            .collect()
    }

    #[test]
    fn zero_rates_are_identity() {
        let cfg = TrainConfig::default().without_augmentation();
        let ws = sample();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(augment(&ws, &cfg, (4, 4), &mut rng), ws);
    }

    #[test]
    fn shift_moves_and_discards() {
        let ws = vec![window(&[(0, 1), (3, 2)], 0)];
        let out = spatial_shift(&ws, 1, 0, 4, 4);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].tokens.len(), 1);
        assert_eq!(
            (out[0].tokens[0].grid_row, out[0].tokens[0].grid_col),
            (1, 1)
        );
        assert_eq!(out[0].tokens[0].values, vec![0.0, 1.0]);
        let gone = spatial_shift(&[window(&[(3, 0)], 0)], 1, 0, 4, 4);
        assert!(gone.is_empty());
        let left = spatial_shift(&[window(&[(2, 0), (2, 3)], 0)], 0, -1, 4, 4);
        assert_eq!(left[0].tokens[0].grid_col, 2);
    }

    #[test]
    fn drop_rate_concentrates() {
        let cells: Vec<_> = (0..100).map(|i| (i / 10, i % 10)).collect();
        let ws: Vec<_> = (0..100).map(|k| window(&cells, k)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = token_drop(&ws, 0.5, &mut rng);
        let kept: usize = out.iter().map(|w| w.tokens.len()).sum();
        let frac = kept as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn drop_never_empties_a_window() {
        let ws: Vec<_> = (0..200).map(|k| window(&[(0, 0), (1, 1)], k)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = token_drop(&ws, 0.99, &mut rng);
        assert!(out.iter().all(|w| !w.tokens.is_empty()));
    }

    #[test]
    fn crop_keeps_a_long_enough_contiguous_run() {
        let ws = sample();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let out = temporal_crop(&ws, 0.5, &mut rng);
            assert!(out.len() >= 4);
            let first = ws.iter().position(|w| *w == out[0]).unwrap();
            assert_eq!(&ws[first..first + out.len()], &out[..]);
        }
        assert!(!temporal_crop(&ws, 0.0, &mut rng).is_empty());
    }

    #[test]
    fn augment_is_seeded() {
        let cfg = TrainConfig {
            token_drop_p: 0.3,
            temporal_crop_frac: 0.5,
            spatial_shift_max: 1,
            ..TrainConfig::default()
        };
        let ws = sample();
        let run = |seed| augment(&ws, &cfg, (4, 4), &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(run(9), run(9));
        for seed in 0..100 {
            let out = run(seed);
            assert!(!out.is_empty());
            assert!(out.iter().all(|w| !w.tokens.is_empty()));
        }
    }
}
