#![allow(dead_code)]

use latlist::{Lattice, ListDecoder};

/// Exhaustive nearest lattice point among integer coordinates within
/// `radius` lattice units of `x / gamma` in every coordinate.
pub fn brute_nearest(lattice: &Lattice, x: &[f64], radius: f64) -> Vec<i64> {
    let g = lattice.gamma();
    let lo: Vec<i64> = x.iter().map(|v| (v / g - radius).floor() as i64).collect();
    let hi: Vec<i64> = x.iter().map(|v| (v / g + radius).ceil() as i64).collect();
    let mut best: Option<(f64, Vec<i64>)> = None;
    for_each_box(&lo, &hi, |z| {
        if !lattice.contains_coords(z) {
            return;
        }
        let d: f64 = z.iter().zip(x).map(|(&zi, xi)| (zi as f64 * g - xi).powi(2)).sum();
        let better = match &best {
            None => true,
            Some((bd, bz)) => d < *bd - 1e-12 || ((d - bd).abs() <= 1e-12 && z < bz.as_slice()),
        };
        if better {
            best = Some((d, z.to_vec()));
        }
    });
    best.expect("box contains a lattice point").1
}

/// List decoding by scanning every fine point `λ_c` with `λ_c - Y'` inside
/// the covering box of `V_s`.
pub fn window_scan_list(decoder: &ListDecoder, y: &[f64]) -> Vec<Vec<i64>> {
    let list = decoder.list_lattice();
    let g = list.gamma();
    let half = list.covering_box_half_width() / g + 1.0;
    let lo: Vec<i64> = y.iter().map(|v| (v / g - half).floor() as i64).collect();
    let hi: Vec<i64> = y.iter().map(|v| (v / g + half).ceil() as i64).collect();
    let mut out = Vec::new();
    for_each_box(&lo, &hi, |z| {
        if !decoder.fine().contains_coords(z) {
            return;
        }
        let diff: Vec<f64> = z.iter().zip(y).map(|(&zi, yi)| zi as f64 * g - yi).collect();
        if list.in_voronoi(&diff).unwrap() {
            out.push(decoder.coarse().reduce_coords(z).unwrap());
        }
    });
    out.sort();
    out.dedup();
    out
}

/// Calls `f` on every integer vector in the box `[lo, hi]`.
pub fn for_each_box(lo: &[i64], hi: &[i64], mut f: impl FnMut(&[i64])) {
    let mut z = lo.to_vec();
    loop {
        f(&z);
        let mut i = 0;
        loop {
            if i == z.len() {
                return;
            }
            if z[i] < hi[i] {
                z[i] += 1;
                break;
            }
            z[i] = lo[i];
            i += 1;
        }
    }
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// `½ log2(1 + x)` written independently of the library.
pub fn cap(x: f64) -> f64 {
    (1.0 + x).ln() / (2.0 * std::f64::consts::LN_2)
}

/// `max over α in [0, 1]` of `min(C(αP/N_R), ½log2(1 + (P + P_R + 2 sqrt((1-α) P P_R)) / (excess + N_R)))`
/// by bisection on the crossing of the increasing and decreasing terms.
pub fn relay_cut_oracle(p: f64, pr: f64, nr: f64, excess: f64) -> f64 {
    let up = |a: f64| cap(a * p / nr);
    let down = |a: f64| cap((p + pr + 2.0 * ((1.0 - a) * p * pr).sqrt()) / (excess + nr));
    if up(1.0) <= down(1.0) {
        return up(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if up(mid) < down(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    up(lo).min(down(lo)).max(up(hi).min(down(hi)))
}

/// Dense-grid maximum of the same objective with spacing `step`.
pub fn relay_cut_dense(p: f64, pr: f64, nr: f64, excess: f64, step: f64) -> f64 {
    let count = (1.0 / step).round() as usize;
    (0..=count)
        .map(|i| {
            let a = i as f64 / count as f64;
            cap(a * p / nr).min(cap((p + pr + 2.0 * ((1.0 - a) * p * pr).sqrt()) / (excess + nr)))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
