//! Scalar Gaussian special functions.
//!
//! The bivariate CDF follows the Drezner–Wesolowsky construction with Genz's
//! double-precision refinements: Gauss–Legendre quadrature over the Plackett
//! angle for moderate correlations, and an asymptotic expansion plus
//! correction integral when `|rho| >= 0.925`.

#![allow(clippy::excessive_precision)]

use crate::error::{arg_err, Error, Result};
use core::f64::consts::{FRAC_1_SQRT_2, PI};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Standard normal CDF, accurate to a few ulps over the whole line.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
fn fast_exp(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.exp()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::exp(x)
    }
}

// Cody's rational approximations for the normal CDF.
const CODY_A: [f64; 5] = [
    2.2352520354606839287,
    161.02823106855587881,
    1067.6894854603709582,
    18154.981253343561249,
    0.065682337918207449113,
];
const CODY_B: [f64; 4] = [47.20258190468824187, 976.09855173777669322, 10260.932208618978205, 45507.789335026729956];
const CODY_C: [f64; 9] = [
    0.39894151208813466764,
    8.8831497943883759412,
    93.506656132177855979,
    597.27027639480026226,
    2494.5375852903726711,
    6848.1904505362823326,
    11602.651437647350124,
    9842.7148383839780218,
    1.0765576773720192317e-8,
];
const CODY_D: [f64; 8] = [
    22.266688044328115691,
    235.38790178262499861,
    1519.377599407554805,
    6485.558298266760755,
    18615.571640885098091,
    34900.952721145977266,
    38912.003286093271411,
    19685.429676859990727,
];
const CODY_P: [f64; 6] = [
    0.21589853405795699,
    0.1274011611602473639,
    0.022235277870649807,
    0.001421619193227893466,
    2.9112874951168792e-5,
    0.02307344176494017303,
];
const CODY_Q: [f64; 5] =
    [1.28426009614491121, 0.468238212480865118, 0.0659881378689285515, 0.00378239633202758244, 7.29751555083966205e-5];

/// Standard normal CDF with one exponential. Relative error grows like
/// `x^2` ulps in the lower tail (about 1e-14 at `x = -9`); meant for inner
/// loops where [`norm_cdf`] is too slow.
#[inline]
pub fn norm_cdf_fast(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.67448975 {
        let xsq = x * x;
        let (mut num, mut den) = (CODY_A[4] * xsq, xsq);
        for i in 0..3 {
            num = (num + CODY_A[i]) * xsq;
            den = (den + CODY_B[i]) * xsq;
        }
        return 0.5 + x * (num + CODY_A[3]) / (den + CODY_B[3]);
    }
    let tail = if y <= 5.656_854_249_492_381 {
        let (mut num, mut den) = (CODY_C[8] * y, y);
        for i in 0..7 {
            num = (num + CODY_C[i]) * y;
            den = (den + CODY_D[i]) * y;
        }
        fast_exp(-0.5 * y * y) * (num + CODY_C[7]) / (den + CODY_D[7])
    } else {
        let xsq = 1.0 / (y * y);
        let (mut num, mut den) = (CODY_P[5] * xsq, xsq);
        for i in 0..4 {
            num = (num + CODY_P[i]) * xsq;
            den = (den + CODY_Q[i]) * xsq;
        }
        let r = xsq * (num + CODY_P[4]) / (den + CODY_Q[4]);
        fast_exp(-0.5 * y * y) * (FRAC_1_SQRT_2PI - r) / y
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Upper tail `1 - Φ(x)` without cancellation.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Inverse of the standard normal CDF (Wichura's AS 241, ~1e-16 relative).
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&AS241_A, r) / poly(&AS241_B, r);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = libm::sqrt(-libm::log(r));
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(&AS241_C, r) / poly(&AS241_D, r)
    } else {
        r -= 5.0;
        poly(&AS241_E, r) / poly(&AS241_F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const AS241_A: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e+2,
    1.9715909503065514427e+3,
    1.3731693765509461125e+4,
    4.5921953931549871457e+4,
    6.7265770927008700853e+4,
    3.3430575583588128105e+4,
    2.5090809287301226727e+3,
];
const AS241_B: [f64; 8] = [
    1.0,
    4.2313330701600911252e+1,
    6.8718700749205790830e+2,
    5.3941960214247511077e+3,
    2.1213794301586595867e+4,
    3.9307895800092710610e+4,
    2.8729085735721942674e+4,
    5.2264952788528545610e+3,
];
const AS241_C: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
const AS241_D: [f64; 8] = [
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
const AS241_E: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
const AS241_F: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];

/// Arguments of the standard bivariate normal CDF `P(S <= h, T <= k)` with
/// `corr(S, T) = rho`. Infinite limits are accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvnArgs {
    h: f64,
    k: f64,
    rho: f64,
}

impl BvnArgs {
    pub fn new(h: f64, k: f64, rho: f64) -> Result<Self> {
        if h.is_nan() || k.is_nan() {
            return arg_err("bivariate normal limits must not be NaN");
        }
        if !(-1.0..=1.0).contains(&rho) {
            return arg_err(alloc::format!("correlation {rho} outside [-1, 1]"));
        }
        Ok(Self { h, k, rho })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// `P(S <= h, T <= k)` for a standard bivariate normal pair.
pub fn bvn_cdf(args: &BvnArgs) -> f64 {
    bvn_lower(args.h, args.k, args.rho)
}

/// Unvalidated `P(S <= h, T <= k)`; `rho` must already lie in `[-1, 1]`.
#[inline]
pub(crate) fn bvn_lower(h: f64, k: f64, rho: f64) -> f64 {
    bvn_upper(-h, -k, rho)
}

// Gauss–Legendre half-rules (weights, positive nodes) for n = 6, 12, 20.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, 0.9324695142031522),
    (0.3607615730481384, 0.6612093864662647),
    (0.4679139345726904, 0.2386191860831970),
];
const GL12: [(f64, f64); 6] = [
    (0.04717533638651177, 0.9815606342467191),
    (0.1069393259953183, 0.9041172563704750),
    (0.1600783285433464, 0.7699026741943050),
    (0.2031674267230659, 0.5873179542866171),
    (0.2334925365383547, 0.3678314989981802),
    (0.2491470458134029, 0.1252334085114692),
];
const GL20: [(f64, f64); 10] = [
    (0.01761400713915212, 0.9931285991850949),
    (0.04060142980038694, 0.9639719272779138),
    (0.06267204833410906, 0.9122344282513259),
    (0.08327674157670475, 0.8391169718222188),
    (0.1019301198172404, 0.7463319064601508),
    (0.1181945319615184, 0.6360536807265150),
    (0.1316886384491766, 0.5108670019508271),
    (0.1420961093183821, 0.3737060887154196),
    (0.1491729864726037, 0.2277858511416451),
    (0.1527533871307259, 0.07652652113349733),
];

/// `P(S > dh, T > dk)`.
fn bvn_upper(dh: f64, dk: f64, r: f64) -> f64 {
    if dh == f64::INFINITY || dk == f64::INFINITY {
        return 0.0;
    }
    if dh == f64::NEG_INFINITY {
        return if dk == f64::NEG_INFINITY { 1.0 } else { norm_sf(dk) };
    }
    if dk == f64::NEG_INFINITY {
        return norm_sf(dh);
    }
    if r == 0.0 {
        return norm_sf(dh) * norm_sf(dk);
    }
    if r >= 1.0 {
        return norm_sf(dh.max(dk));
    }
    if r <= -1.0 {
        // S = -T: P(T < -dh, T > dk)
        return (norm_cdf(-dh) - norm_cdf(dk)).max(0.0);
    }

    let two_pi = 2.0 * PI;
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };

    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;

    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = libm::asin(r) / 2.0;
        for &(w, x) in rule {
            for node in [1.0 - x, 1.0 + x] {
                let sn = libm::sin(asr * node);
                bvn += w * libm::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        bvn = bvn * asr / two_pi + norm_sf(h) * norm_sf(k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = libm::sqrt(as_);
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 80.0;
        let asr = -(bs / as_ + hk) / 2.0;
        if asr > -100.0 {
            bvn = a * libm::exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
        }
        if hk > -100.0 {
            let b = libm::sqrt(bs);
            let sp = libm::sqrt(two_pi) * norm_cdf(-b / a);
            bvn -= libm::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
        }
        a /= 2.0;
        let mut acc = 0.0;
        for &(w, x) in rule {
            for node in [1.0 - x, 1.0 + x] {
                let xs = (a * node) * (a * node);
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = libm::sqrt(1.0 - xs);
                    let ep = libm::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
                    acc += w * libm::exp(asr) * (sp - ep);
                }
            }
        }
        bvn = (a * acc - bvn) / two_pi;
        if r > 0.0 {
            bvn += norm_sf(h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 { norm_cdf(k) - norm_cdf(h) } else { norm_cdf(-h) - norm_cdf(-k) };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Moments of a Gaussian conditioned on an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncMoments {
    pub mean: f64,
    pub variance: f64,
    /// Gaussian probability of the interval.
    pub mass: f64,
}

const NARROW_WIDTH: f64 = 0.5;

// Series coefficients of the standardized truncated mean shift (times 1/c)
// and variance in powers of h^2, each a polynomial in c^2 (ascending).
const SHIFT_SERIES: [(&[f64], f64); 6] = [
    (&[-1.0], 3.0),
    (&[2.0, 1.0], 45.0),
    (&[-2.0, -8.0, -2.0], 945.0),
    (&[-2.0, 18.0, 18.0, 3.0], 14175.0),
    (&[10.0, -28.0, -150.0, -80.0, -10.0], 467775.0),
    (&[46.0, -4826.0, 25216.0, 38696.0, 13820.0, 1382.0], 638512875.0),
];
const VAR_SERIES: [(&[f64], f64); 6] = [
    (&[1.0], 3.0),
    (&[-2.0, -3.0], 45.0),
    (&[2.0, 24.0, 10.0], 945.0),
    (&[2.0, -54.0, -90.0, -21.0], 14175.0),
    (&[-10.0, 84.0, 750.0, 560.0, 90.0], 467775.0),
    (&[-46.0, 14478.0, -126080.0, -270872.0, -124380.0, -15202.0], 638512875.0),
];

fn series_in_h2(table: &[(&[f64], f64); 6], c2: f64, h2: f64) -> f64 {
    table.iter().rev().fold(0.0, |acc, (poly, den)| {
        let coef = poly.iter().rev().fold(0.0, |p, a| p * c2 + a) / den;
        acc * h2 + coef
    })
}

/// Mean shift from the midpoint and variance of a standard normal restricted
/// to `[c - h, c + h]`, for `h * max(1, |c|)` small.
fn narrow_moments(c: f64, h: f64) -> (f64, f64) {
    let (c2, h2) = (c * c, h * h);
    (c * h2 * series_in_h2(&SHIFT_SERIES, c2, h2), h2 * series_in_h2(&VAR_SERIES, c2, h2))
}

/// Smallest interval mass for which conditional moments are returned.
pub const MIN_TRUNCATION_MASS: f64 = 1e-300;

/// Conditional mean and variance of `N(mu, sigma^2)` restricted to `(u, v)`,
/// with the probability of the interval.
pub fn trunc_norm_moments(mu: f64, sigma: f64, u: f64, v: f64) -> Result<TruncMoments> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return arg_err("truncated normal requires finite mu and sigma > 0");
    }
    if u.is_nan() || v.is_nan() || !(u < v) {
        return arg_err(alloc::format!("truncation interval ({u}, {v}) is empty"));
    }
    let alpha = (u - mu) / sigma;
    let beta = (v - mu) / sigma;
    let mass = gaussian_mass(alpha, beta);
    if !(mass >= MIN_TRUNCATION_MASS) {
        return Err(Error::EmptyInterval { lower: u, upper: v });
    }
    let (pa, pb) = (norm_pdf(alpha), norm_pdf(beta));
    // x φ(x) vanishes at ±∞
    let apa = if alpha.is_finite() { alpha * pa } else { 0.0 };
    let bpb = if beta.is_finite() { beta * pb } else { 0.0 };
    let width = beta - alpha;
    let c = 0.5 * (alpha + beta);
    let (mean, factor) = if width * c.abs().max(1.0) < NARROW_WIDTH && width.is_finite() {
        // short interval: series in the half-width around the midpoint
        let (shift, var) = narrow_moments(c, 0.5 * width);
        (mu + sigma * (c + shift), var)
    } else {
        let ratio = (pa - pb) / mass;
        (mu + sigma * ratio, 1.0 + (apa - bpb) / mass - ratio * ratio)
    };
    let variance = sigma * sigma * factor.clamp(0.0, 1.0);
    let mean = if u.is_finite() && v.is_finite() { mean.clamp(u, v) } else { mean };
    Ok(TruncMoments { mean, variance, mass })
}

/// `Φ(b) - Φ(a)` evaluated on the side of zero that avoids cancellation.
#[inline]
pub fn gaussian_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        norm_sf(a) - norm_sf(b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    }
}
