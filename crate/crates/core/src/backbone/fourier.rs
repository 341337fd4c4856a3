use crate::numeric::Matrix;

/// 2-D Fourier features for every cell of a `grid_h x grid_w` patch grid.
///
/// Row `r * grid_w + c` holds `4 * bands` values laid out as
/// `[sin(pi f u) | cos(pi f u) | sin(pi f v) | cos(pi f v)]`, each block
/// over the `bands` frequencies. `u` and `v` are the cell centres mapped
/// into `(-1, 1)` along rows and columns; frequencies are log-spaced from 1
/// to half the larger grid side.
pub fn fourier_positions(grid_h: usize, grid_w: usize, bands: usize) -> Matrix {
    let bands = bands.max(1);
    let top = (grid_h.max(grid_w) as f64 / 2.0).max(1.0);
    let freqs: Vec<f64> = (0..bands)
        .map(|k| {
            if bands == 1 {
                1.0
            } else {
                (top.ln() * k as f64 / (bands - 1) as f64).exp()
            }
        })
        .collect();
    let centre = |i: usize, n: usize| -1.0 + (2 * i + 1) as f64 / n as f64;
    let pi = std::f64::consts::PI;

    let mut data = Vec::with_capacity(grid_h * grid_w * 4 * bands);
    for r in 0..grid_h {
        let u = centre(r, grid_h);
        for c in 0..grid_w {
            let v = centre(c, grid_w);
            data.extend(freqs.iter().map(|f| (pi * f * u).sin()));
            data.extend(freqs.iter().map(|f| (pi * f * u).cos()));
            data.extend(freqs.iter().map(|f| (pi * f * v).sin()));
            data.extend(freqs.iter().map(|f| (pi * f * v).cos()));
        }
    }
    Matrix::from_vec(grid_h * grid_w, 4 * bands, data).expect("finite features")
}
