use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Label, LearnError};

pub const DEFAULT_SMOTE_K: usize = 5;

/// `a + gap * (b - a)`.
pub fn interpolate(a: &[f64], b: &[f64], gap: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + gap * (y - x)).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Oversamples the minority class until both classes have the same size.
///
/// Synthetic rows are appended after the original rows. Each one lies on
/// the segment between a minority row (taken round-robin) and one of its
/// `k` nearest minority neighbours.
pub fn smote(x: &[Vec<f64>], y: &[Label], k: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Label>), LearnError> {
    let failures: Vec<usize> = (0..y.len()).filter(|&i| y[i].is_failure()).collect();
    let normals: Vec<usize> = (0..y.len()).filter(|&i| !y[i].is_failure()).collect();
    if failures.is_empty() || normals.is_empty() {
        return Err(LearnError::SingleClass);
    }
    let (minority, label, missing) = if failures.len() < normals.len() {
        let missing = normals.len() - failures.len();
        (failures, Label::Failure, missing)
    } else {
        let missing = failures.len() - normals.len();
        (normals, Label::Normal, missing)
    };
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    if missing == 0 {
        return Ok((xs, ys));
    }
    if minority.len() == 1 {
        log::warn!("minority class has a single sample; duplicating it");
        for _ in 0..missing {
            xs.push(x[minority[0]].clone());
            ys.push(label);
        }
        return Ok((xs, ys));
    }
    let k = k.max(1).min(minority.len() - 1);
    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut d: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (sq_dist(&x[i], &x[j]), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..missing {
        let slot = s % minority.len();
        let base = minority[slot];
        let other = neighbours[slot][rng.gen_range(0..neighbours[slot].len())];
        let gap = loop {
            let g: f64 = rng.gen();
            if g > 0.0 {
                break g;
            }
        };
        xs.push(interpolate(&x[base], &x[other], gap));
        ys.push(label);
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_input_unchanged() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![Label::Normal, Label::Failure];
        assert_eq!(smote(&x, &y, 5, 1).unwrap(), (x, y));
    }

    #[test]
    fn interpolation_midpoint() {
        assert_eq!(interpolate(&[0.0, 0.0], &[2.0, 2.0], 0.5), [1.0, 1.0]);
    }

    #[test]
    fn balances_and_stays_on_segments() {
        let mut x = vec![vec![0.0, 0.0], vec![2.0, 2.0], vec![4.0, 0.0]];
        let mut y = vec![Label::Failure; 3];
        for i in 0..10 {
            x.push(vec![i as f64, 9.0]);
            y.push(Label::Normal);
        }
        let (xs, ys) = smote(&x, &y, 5, 7).unwrap();
        assert_eq!(ys.iter().filter(|l| l.is_failure()).count(), 10);
        assert_eq!(xs.len(), 20);
        for p in &xs[13..] {
            assert!(p[1] >= 0.0 && p[1] <= 2.0 && p[0] >= 0.0 && p[0] <= 4.0);
        }
    }

    #[test]
    fn single_minority_duplicates() {
        let x = vec![vec![1.0], vec![0.0], vec![0.5]];
        let y = vec![Label::Failure, Label::Normal, Label::Normal];
        let (xs, ys) = smote(&x, &y, 5, 0).unwrap();
        assert_eq!(xs[3], [1.0]);
        assert_eq!(ys[3], Label::Failure);
    }
}
