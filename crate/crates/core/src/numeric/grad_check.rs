//! Central-difference gradient checking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Matrix;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Check at most this many coordinates (every tensor gets at least one).
    pub max_coords: usize,
    /// Gradients smaller than this are compared on an absolute scale.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_coords: 2000,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(tensor, flat index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` against central differences of `f` around `params`.
pub fn grad_check(
    f: impl Fn(&[Matrix]) -> f64,
    params: &[Matrix],
    analytic: &[Matrix],
    opts: &GradCheckOptions,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "one gradient per parameter");
    let coords = choose_coords(params, opts);
    let mut work: Vec<Matrix> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: None,
    };
    for (t, i) in coords {
        let orig = work[t].as_slice()[i];
        work[t].as_mut_slice()[i] = orig + opts.step;
        let plus = f(&work);
        work[t].as_mut_slice()[i] = orig - opts.step;
        let minus = f(&work);
        work[t].as_mut_slice()[i] = orig;

        let numeric = (plus - minus) / (2.0 * opts.step);
        let err = relative_error(analytic[t].as_slice()[i], numeric, opts.floor);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((t, i));
        }
    }
    report
}

fn choose_coords(params: &[Matrix], opts: &GradCheckOptions) -> Vec<(usize, usize)> {
    let total: usize = params.iter().map(Matrix::len).sum();
    let all = || {
        params
            .iter()
            .enumerate()
            .flat_map(|(t, m)| (0..m.len()).map(move |i| (t, i)))
    };
    if total <= opts.max_coords {
        return all().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(t, m)| (t, sample(&mut rng, m.len(), 1).index(0)))
        .collect();
    let extra = opts.max_coords.saturating_sub(coords.len());
    let flat: Vec<(usize, usize)> = all().collect();
    coords.extend(sample(&mut rng, total, extra).into_iter().map(|k| flat[k]));
    coords.sort_unstable();
    coords.dedup();
    coords
}
