//! Symmetric tridiagonal Toeplitz algebra: log-determinant, solves and
//! quadratic forms in O(n).
//!
//! The matrices here have a constant diagonal `d` and off-diagonal `e`. The
//! LDLᵀ pivots obey `p_1 = d`, `p_k = d - e²/p_{k-1}`, which is the ratio
//! `D_k / D_{k-1}` of the determinant recursion `D_k = d·D_{k-1} - e²·D_{k-2}`.
//! Summing `log p_k` therefore carries that recursion in log space.

use crate::error::{Error, Result};

fn check_pivot(k: usize, p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite { index: k, pivot: p })
    }
}

/// `log det` of the `n × n` matrix with diagonal `diag` and off-diagonal `off`.
pub fn tridiag_logdet(diag: f64, off: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let e2 = off * off;
    let mut p = diag;
    check_pivot(0, p)?;
    let mut s = p.ln();
    for k in 1..n {
        p = diag - e2 / p;
        check_pivot(k, p)?;
        s += p.ln();
    }
    Ok(s)
}

/// Solves `Ω x = y`.
pub fn tridiag_solve(y: &[f64], diag: f64, off: f64) -> Result<Vec<f64>> {
    let n = y.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut piv = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut p = diag;
    check_pivot(0, p)?;
    piv.push(p);
    w.push(y[0]);
    for k in 1..n {
        let l = off / p;
        p = diag - l * off;
        check_pivot(k, p)?;
        piv.push(p);
        w.push(y[k] - l * w[k - 1]);
    }
    let mut x = vec![0.0; n];
    x[n - 1] = w[n - 1] / piv[n - 1];
    for k in (0..n - 1).rev() {
        x[k] = (w[k] - off * x[k + 1]) / piv[k];
    }
    Ok(x)
}

/// `yᵀ Ω⁻¹ y`.
pub fn tridiag_quadform(y: &[f64], diag: f64, off: f64) -> Result<f64> {
    Ok(logdet_and_quadform(y, diag, off)?.1)
}

/// `(log det Ω, yᵀΩ⁻¹y)` from one LDLᵀ sweep. Pivots converge geometrically;
/// once they stop changing the steady value is reused.
pub fn logdet_and_quadform(y: &[f64], diag: f64, off: f64) -> Result<(f64, f64)> {
    let n = y.len();
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let e2 = off * off;
    let mut p = diag;
    check_pivot(0, p)?;
    let mut logdet = p.ln();
    let mut w = y[0];
    let mut q = w * w / p;
    let mut k = 1;
    while k < n {
        let l = off / p;
        let next = diag - e2 / p;
        check_pivot(k, next)?;
        w = y[k] - l * w;
        q += w * w / next;
        logdet += next.ln();
        let settled = (next - p).abs() <= 1e-16 * next;
        p = next;
        k += 1;
        if settled {
            break;
        }
    }
    if k < n {
        let l = off / p;
        let inv = 1.0 / p;
        let mut acc = 0.0;
        for &yk in &y[k..] {
            w = yk - l * w;
            acc += w * w;
        }
        q += acc * inv;
        logdet += (n - k) as f64 * p.ln();
    }
    Ok((logdet, q))
}
