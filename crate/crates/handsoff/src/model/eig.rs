// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense real eigenvalues: Householder reduction to upper Hessenberg
//! form followed by the Francis implicit double-shift QR iteration
//! (the classic EISPACK `hqr` scheme, eigenvalues only).

use nalgebra::{Complex, DMatrix};

/// Reduce a square matrix to upper Hessenberg form by orthogonal
/// similarity transforms, in place.
pub(crate) fn hessenberg_in_place(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0f64; n];
    for k in 0..n - 2 {
        let mut norm2 = 0.0;
        for i in k + 1..n {
            norm2 += a[(i, k)] * a[(i, k)];
        }
        if norm2 == 0.0 {
            continue;
        }
        let mut alpha = norm2.sqrt();
        if a[(k + 1, k)] > 0.0 {
            alpha = -alpha;
        }
        v[k + 1] = a[(k + 1, k)] - alpha;
        for i in k + 2..n {
            v[i] = a[(i, k)];
        }
        let vtv: f64 = v[k + 1..n].iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        // A <- (I - beta v v^T) A
        for j in 0..n {
            let mut s = 0.0;
            for i in k + 1..n {
                s += v[i] * a[(i, j)];
            }
            s *= beta;
            for i in k + 1..n {
                a[(i, j)] -= s * v[i];
            }
        }
        // A <- A (I - beta v v^T)
        for i in 0..n {
            let mut s = 0.0;
            for j in k + 1..n {
                s += a[(i, j)] * v[j];
            }
            s *= beta;
            for j in k + 1..n {
                a[(i, j)] -= s * v[j];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by shifted QR, with a hard
/// cap on the total number of QR steps. On failure returns the number of
/// eigenvalues deflated before the cap was hit.
pub(crate) fn hessenberg_eigenvalues(
    mut h: DMatrix<f64>,
    iter_cap: usize,
) -> Result<Vec<Complex<f64>>, usize> {
    let n = h.nrows();
    let mut out = vec![Complex::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(out);
    }
    if n == 1 {
        out[0] = Complex::new(h[(0, 0)], 0.0);
        return Ok(out);
    }

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(out);
    }

    let mut nn = n - 1; // upper index of the active block
    let mut t = 0.0; // accumulated exceptional shifts
    let mut total_steps = 0usize;
    'deflate: loop {
        let mut its = 0usize;
        loop {
            // Look for a negligible subdiagonal element splitting the block.
            let mut l = nn;
            while l >= 1 {
                let mut s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if h[(l, l - 1)].abs() <= f64::EPSILON * s {
                    h[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = h[(nn, nn)];
            if l == nn {
                // One real root.
                out[nn] = Complex::new(x + t, 0.0);
                if nn == 0 {
                    break 'deflate;
                }
                nn -= 1;
                break;
            }
            let mut y = h[(nn - 1, nn - 1)];
            let mut w = h[(nn, nn - 1)] * h[(nn - 1, nn)];
            if l + 1 == nn {
                // Two roots from the trailing 2x2 block.
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let zz = if p >= 0.0 { p + z } else { p - z };
                    out[nn - 1] = Complex::new(x + zz, 0.0);
                    out[nn] = if zz != 0.0 {
                        Complex::new(x - w / zz, 0.0)
                    } else {
                        Complex::new(x + zz, 0.0)
                    };
                } else {
                    out[nn - 1] = Complex::new(x + p, z);
                    out[nn] = Complex::new(x + p, -z);
                }
                if nn <= 1 {
                    break 'deflate;
                }
                nn -= 2;
                break;
            }
            if total_steps >= iter_cap {
                return Err(n - 1 - nn);
            }
            total_steps += 1;
            if its == 10 || its == 20 {
                // Exceptional shift to break rare cycling.
                t += x;
                for i in 0..=nn {
                    h[(i, i)] -= x;
                }
                let s = h[(nn, nn - 1)].abs() + h[(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            // Find two consecutive small subdiagonals starting the bulge.
            let mut m = nn - 2;
            let mut p;
            let mut q;
            let mut r;
            loop {
                let z = h[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - rr - ss;
                r = h[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = h[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                h[(i, i - 2)] = 0.0;
                if i != m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Chase the bulge with 3x3 Householder reflections.
            for k in m..nn {
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if k != nn - 1 { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s_mag = (p * p + q * q + r * r).sqrt();
                let s = if p >= 0.0 { s_mag } else { -s_mag };
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                } else {
                    h[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nn {
                    let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                    if k != nn - 1 {
                        pp += r * h[(k + 2, j)];
                        h[(k + 2, j)] -= pp * z;
                    }
                    h[(k + 1, j)] -= pp * y;
                    h[(k, j)] -= pp * x;
                }
                let mmin = nn.min(k + 3);
                for i in l..=mmin {
                    let mut pp = x * h[(i, k)] + y * h[(i, k + 1)];
                    if k != nn - 1 {
                        pp += z * h[(i, k + 2)];
                        h[(i, k + 2)] -= pp * r;
                    }
                    h[(i, k + 1)] -= pp * q;
                    h[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(out)
}
