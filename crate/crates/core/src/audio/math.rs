// Modified Bessel functions of the first kind (Abramowitz & Stegun 9.8.1-9.8.4).
// Relative accuracy is around 1e-7, which is plenty for spectral gains and
// Kaiser windows.

/// `exp(-x) * I0(x)` for `x >= 0`.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= 3.75 {
        let t = (x / 3.75).powi(2);
        let i0 = 1.0
            + t * (3.5156229
                + t * (3.0899424
                    + t * (1.2067492 + t * (0.2659732 + t * (0.0360768 + t * 0.0045813)))));
        i0 * (-x).exp()
    } else {
        let t = 3.75 / x;
        let p = 0.39894228
            + t * (0.01328592
                + t * (0.00225319
                    + t * (-0.00157565
                        + t * (0.00916281
                            + t * (-0.02057706
                                + t * (0.02635537 + t * (-0.01647633 + t * 0.00392377)))))));
        p / x.sqrt()
    }
}

/// `exp(-x) * I1(x)` for `x >= 0`.
pub fn bessel_i1e(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= 3.75 {
        let t = (ax / 3.75).powi(2);
        let i1 = ax
            * (0.5
                + t * (0.87890594
                    + t * (0.51498869
                        + t * (0.15084934
                            + t * (0.02658733 + t * (0.00301532 + t * 0.00032411))))));
        i1 * (-ax).exp()
    } else {
        let t = 3.75 / ax;
        let p = 0.39894228
            + t * (-0.03988024
                + t * (-0.00362018
                    + t * (0.00163801
                        + t * (-0.01031555
                            + t * (0.02282967
                                + t * (-0.02895312 + t * (0.01787654 - t * 0.00420059)))))));
        p / ax.sqrt()
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

pub fn bessel_i0(x: f64) -> f64 {
    bessel_i0e(x) * x.abs().exp()
}
