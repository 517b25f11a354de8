//! Small helpers for points stored as `f64` slices.

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn add_assign(acc: &mut [f64], v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}

/// `a + t * (b - a)` direction helper: point at `step` from `from` towards
/// `to`. Returns `from` when the two coincide.
pub fn towards(from: &[f64], to: &[f64], step: f64) -> Vec<f64> {
    let d = dist(from, to);
    if d == 0.0 {
        return from.to_vec();
    }
    from.iter()
        .zip(to)
        .map(|(a, b)| a + (b - a) * (step / d))
        .collect()
}

pub fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let r = norm(v);
    (r > 0.0).then(|| v.iter().map(|x| x / r).collect())
}
