use rand::Rng;

use super::OptimizeError;

fn key(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Stochastic bubble-sort ranking. Adjacent pairs are compared by objective when
/// both have zero penalty or with probability `pf`, otherwise by penalty.
/// Returns the population indices, best first.
pub fn stochastic_rank<R: Rng + ?Sized>(f: &[f64], penalty: &[f64], pf: f64, rng: &mut R) -> Result<Vec<usize>, OptimizeError> {
    let n = f.len();
    if n == 0 {
        return Err(OptimizeError::EmptyPopulation);
    }
    if penalty.len() != n {
        return Err(OptimizeError::InvalidConfig("objective and penalty lengths differ".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for _ in 0..n {
        let mut swapped = false;
        for j in 0..n - 1 {
            let (a, b) = (idx[j], idx[j + 1]);
            let u: f64 = rng.random();
            let by_f = (penalty[a] == 0.0 && penalty[b] == 0.0) || u < pf;
            let worse = if by_f { key(f[a]) > key(f[b]) } else { key(penalty[a]) > key(penalty[b]) };
            if worse {
                idx.swap(j, j + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    Ok(idx)
}
