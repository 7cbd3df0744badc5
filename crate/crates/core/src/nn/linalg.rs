//! Small dense kernels used by the tape operations.
//!
//! Parallel paths partition output rows; every row is reduced sequentially,
//! so results are bitwise identical for any thread count.

use rayon::prelude::*;

/// Work threshold (multiply-adds) below which matmul stays single-threaded.
const PAR_THRESHOLD: usize = 1 << 17;

/// C[m,n] = A[m,k] * B[k,n], row-major.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    let row = |crow: &mut [f64], arow: &[f64]| {
        for (kk, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    };
    if m * k * n >= PAR_THRESHOLD && m > 1 {
        c.par_chunks_mut(n)
            .zip(a.par_chunks(k))
            .for_each(|(crow, arow)| row(crow, arow));
    } else {
        for (crow, arow) in c.chunks_mut(n).zip(a.chunks(k)) {
            row(crow, arow);
        }
    }
    c
}

/// C[m,n] = A^T[m,k] * B[k,n] where A is stored [k,m] row-major.
pub fn matmul_at_b(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    // Accumulate rank-1 updates in k-order; deterministic and cache-friendly.
    for kk in 0..k {
        let arow = &a[kk * m..(kk + 1) * m];
        let brow = &b[kk * n..(kk + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// C[m,n] = A[m,k] * B^T[k,n] where B is stored [n,k] row-major.
pub fn matmul_a_bt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut c = vec![0.0; m * n];
    let row = |crow: &mut [f64], arow: &[f64]| {
        for (j, cv) in crow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (av, bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            *cv = acc;
        }
    };
    if m * k * n >= PAR_THRESHOLD && m > 1 {
        c.par_chunks_mut(n)
            .zip(a.par_chunks(k))
            .for_each(|(crow, arow)| row(crow, arow));
    } else {
        for (crow, arow) in c.chunks_mut(n).zip(a.chunks(k)) {
            row(crow, arow);
        }
    }
    c
}
