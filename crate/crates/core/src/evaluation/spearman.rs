use crate::error::{Error, Result};

/// Average ranks starting at 1; tied values share the mean of their span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantVector);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::invalid("spearman correlation needs at least two points"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("spearman correlation of non-finite values"));
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Spearman's rho of `b` against ranks of another vector computed once with
/// [`average_ranks`]; saves re-ranking a fixed reference in inner loops.
pub fn spearman_against_ranks(ranks_a: &[f64], b: &[f64]) -> Result<f64> {
    if ranks_a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: ranks_a.len(),
            found: b.len(),
        });
    }
    if b.len() < 2 {
        return Err(Error::invalid("spearman correlation needs at least two points"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("spearman correlation of non-finite values"));
    }
    pearson(ranks_a, &average_ranks(b))
}
