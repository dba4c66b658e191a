use num_complex::Complex64;

use super::{CMatrix, FockDim, PhasePoint};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `â` with `⟨n−1|â|n⟩ = √n`.
pub fn annihilation(dim: FockDim) -> CMatrix {
    let n = dim.get();
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation(dim: FockDim) -> CMatrix {
    annihilation(dim).adjoint()
}

/// `x̂ = (â + â†)/√2`.
pub fn position(dim: FockDim) -> CMatrix {
    let a = annihilation(dim);
    (&a + a.adjoint()).unscale(std::f64::consts::SQRT_2)
}

/// `p̂ = (â − â†)/(i√2)`.
pub fn momentum(dim: FockDim) -> CMatrix {
    let a = annihilation(dim);
    (&a - a.adjoint()) * (-I / std::f64::consts::SQRT_2)
}

pub fn number(dim: FockDim) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim.get(), |k, _| {
        Complex64::new(k as f64, 0.0)
    }))
}

/// `ln(k!)` for small `k`, summed directly (exact to rounding for k ≤ a few hundred).
pub fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// Matrix of `D̂(x, p)` in the truncated basis.
pub fn displacement(pt: PhasePoint, dim: FockDim) -> CMatrix {
    displacement_alpha(pt.alpha(), dim.get())
}

/// Matrix of `D̂(α) = exp(α â† − α* â)` on `n` Fock levels.
///
/// Elements come from the closed form
/// `⟨m|D̂(α)|n⟩ = √(n!/m!) α^{m−n} e^{−|α|²/2} L_n^{(m−n)}(|α|²)` for `m ≥ n`
/// (and `(−α*)^{n−m}` with the roles swapped above the diagonal). Every entry of
/// the truncated block is therefore the exact infinite-dimensional matrix
/// element. The Laguerre factor is carried in the scaled form
/// `f_j = √(j!/(j+k)!) |α|^k e^{−|α|²/2} L_j^{(k)}(|α|²)`, which obeys
///
/// `√((j+1)(j+k+1)) f_{j+1} = (2j+1+k−|α|²) f_j − √(j(j+k)) f_{j−1}`
///
/// and never overflows; the seed `f_0` is built in log space.
pub fn displacement_alpha(alpha: Complex64, n: usize) -> CMatrix {
    let mut d = CMatrix::zeros(n, n);
    let x = alpha.norm_sqr();
    if x == 0.0 {
        d.fill_with_identity();
        return d;
    }
    let ln_abs = 0.5 * x.ln();
    let theta = alpha.arg();
    let ln_fact: Vec<f64> = {
        let mut t = vec![0.0; n + 1];
        for k in 2..=n {
            t[k] = t[k - 1] + (k as f64).ln();
        }
        t
    };

    let mut f = vec![0.0f64; n];
    for k in 0..n {
        let len = n - k;
        let kf = k as f64;
        f[0] = (kf * ln_abs - 0.5 * x - 0.5 * ln_fact[k]).exp();
        if len > 1 {
            f[1] = f[0] * (1.0 + kf - x) / (kf + 1.0).sqrt();
        }
        for j in 1..len.saturating_sub(1) {
            let jf = j as f64;
            f[j + 1] = ((2.0 * jf + 1.0 + kf - x) * f[j] - (jf * (jf + kf)).sqrt() * f[j - 1])
                / ((jf + 1.0) * (jf + kf + 1.0)).sqrt();
        }
        let below = Complex64::from_polar(1.0, kf * theta);
        let above = if k % 2 == 0 { below.conj() } else { -below.conj() };
        for j in 0..len {
            d[(j + k, j)] = below * f[j];
            if k > 0 {
                d[(j, j + k)] = above * f[j];
            }
        }
    }
    d
}

/// Diagonal `⟨n|D̂(α)|n⟩ = e^{−|α|²/2} L_n(|α|²)` for `n < len`, given `|α|²`.
/// These are real and depend only on `|α|`.
pub fn displacement_diagonal(alpha_sqr: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    if len == 0 {
        return out;
    }
    out[0] = (-0.5 * alpha_sqr).exp();
    if len > 1 {
        out[1] = out[0] * (1.0 - alpha_sqr);
    }
    for j in 1..len.saturating_sub(1) {
        let jf = j as f64;
        out[j + 1] = ((2.0 * jf + 1.0 - alpha_sqr) * out[j] - jf * out[j - 1]) / (jf + 1.0);
    }
    out
}
