//! Linear algebra over the prime field of `p` elements.
//!
//! Vectors are stored as `u64` residues in `[0, p)`.

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn reduce(x: i64, p: u64) -> u64 {
    x.rem_euclid(p as i64) as u64
}

fn inverse(a: u64, p: u64) -> u64 {
    // Fermat: a^(p-2) mod p
    let mut result = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    result
}

/// Reduced row echelon form. Returns the nonzero rows and their pivot columns.
pub fn rref(rows: &[Vec<u64>], p: u64) -> (Vec<Vec<u64>>, Vec<usize>) {
    let mut m: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|&v| v % p).collect()).collect();
    let ncols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == m.len() {
            break;
        }
        let Some(sel) = (r..m.len()).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, sel);
        let inv = inverse(m[r][c], p);
        for v in m[r].iter_mut() {
            *v = *v * inv % p;
        }
        let pivot = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && row[c] != 0 {
                let f = row[c];
                for (v, &pv) in row.iter_mut().zip(&pivot) {
                    *v = (*v + p * p - f * pv) % p;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(rows: &[Vec<u64>], p: u64) -> usize {
    rref(rows, p).1.len()
}

/// True iff `v` lies in the row span of `rows`.
pub fn in_span(rows: &[Vec<u64>], v: &[u64], p: u64) -> bool {
    let r = rank(rows, p);
    let mut ext = rows.to_vec();
    ext.push(v.to_vec());
    rank(&ext, p) == r
}

/// `sum_i coeffs[i] * rows[i] mod p`.
pub fn combine(rows: &[Vec<u64>], coeffs: &[u64], n: usize, p: u64) -> Vec<u64> {
    let mut out = vec![0u64; n];
    for (row, &a) in rows.iter().zip(coeffs) {
        if a == 0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(row) {
            *o = (*o + a * v) % p;
        }
    }
    out
}

/// Calls `f` on every coefficient vector in `[0, p)^len`, in lexicographic order.
pub fn for_each_coeffs(len: usize, p: u64, mut f: impl FnMut(&[u64])) {
    let mut a = vec![0u64; len];
    loop {
        f(&a);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            a[i] += 1;
            if a[i] < p {
                break;
            }
            a[i] = 0;
        }
    }
}

/// Extends the span of `base` to the span of `target` and returns the extra rows.
pub fn complement(base: &[Vec<u64>], target: &[Vec<u64>], p: u64) -> Vec<Vec<u64>> {
    let mut span = base.to_vec();
    let mut extra = Vec::new();
    for row in target {
        if !in_span(&span, row, p) {
            span.push(row.clone());
            extra.push(row.clone());
        }
    }
    extra
}
