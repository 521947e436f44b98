//! Gamma-family special functions, evaluated in log space where tails matter.

use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, reflection below 1/2).
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        let pi = T::PI();
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a = a + T::lit(c) / (x + T::lit(i as f64));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::lit(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + a.ln()
}

pub fn gamma<T: Real>(x: T) -> T {
    ln_gamma(x).exp()
}

const ITMAX: usize = 10_000;

/// Regularized incomplete gamma functions as `(ln P(a, x), ln Q(a, x))`.
pub fn ln_gamma_pq<T: Real>(a: T, x: T) -> (T, T) {
    if x <= T::zero() {
        return (T::neg_infinity(), T::zero());
    }
    if x.is_infinite() {
        return (T::zero(), T::neg_infinity());
    }
    let eps = T::epsilon();
    let prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + T::one() {
        // Series for P.
        let mut ap = a;
        let mut del = T::one() / a;
        let mut sum = del;
        for _ in 0..ITMAX {
            ap = ap + T::one();
            del = del * x / ap;
            sum = sum + del;
            if del.abs() < sum.abs() * eps {
                break;
            }
        }
        let ln_p = prefactor + sum.ln();
        let p = ln_p.exp();
        (ln_p, (-p).ln_1p())
    } else {
        // Modified Lentz continued fraction for Q.
        let tiny = T::min_positive_value() / eps;
        let mut b = x + T::one() - a;
        let mut c = T::one() / tiny;
        let mut d = T::one() / b;
        let mut h = d;
        for i in 1..ITMAX {
            let an = -T::lit(i as f64) * (T::lit(i as f64) - a);
            b = b + T::lit(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = T::one() / d;
            let del = d * c;
            h = h * del;
            if (del - T::one()).abs() < eps {
                break;
            }
        }
        let ln_q = prefactor + h.ln();
        let q = ln_q.exp();
        ((-q).ln_1p(), ln_q)
    }
}

/// `ln erfc(x)` for `x >= 0`, accurate deep into the tail.
pub fn ln_erfc<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return erfc(x).ln();
    }
    ln_gamma_pq(T::lit(0.5), x * x).1
}

pub fn erfc<T: Real>(x: T) -> T {
    if x < T::zero() {
        T::lit(2.0) - erfc(-x)
    } else if x == T::zero() {
        T::one()
    } else {
        ln_gamma_pq(T::lit(0.5), x * x).1.exp()
    }
}

/// `ln E|g|^q` for a standard Gaussian `g`, `q > -1`.
pub fn ln_gaussian_abs_moment<T: Real>(q: T) -> T {
    let half = T::lit(0.5);
    half * q * T::lit(2.0).ln() + ln_gamma((q + T::one()) * half) - half * T::PI().ln()
}
