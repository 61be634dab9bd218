//! Welch's two-sample t-test and the special functions behind it.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta, evaluated by modified Lentz.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` for `a, b > 0`.
pub fn betainc(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

/// Two-tailed `P(|T| ≥ |t|)` for Student's t with `dof` degrees of freedom.
pub fn student_t_two_tailed_p(t: f64, dof: f64) -> f64 {
    if t.is_nan() || !(dof > 0.0) {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    betainc(x, 0.5 * dof, 0.5).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub dof: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (`n - 1` denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    for (name, xs) in [("a", a), ("b", b)] {
        if xs.len() < 2 {
            return Err(Error::UndefinedTest(format!(
                "sample {name} has {} observations, need at least 2",
                xs.len()
            )));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample {name} contains a non-finite value"
            )));
        }
    }
    let (n_a, n_b) = (a.len() as f64, b.len() as f64);
    let (mean_a, mean_b) = (mean(a), mean(b));
    let va = sample_variance(a) / n_a;
    let vb = sample_variance(b) / n_b;
    if va == 0.0 && vb == 0.0 {
        return Err(Error::UndefinedTest("both samples have zero variance".into()));
    }
    let se = (va + vb).sqrt();
    let t = (mean_a - mean_b) / se;
    let dof = (va + vb).powi(2) / (va * va / (n_a - 1.0) + vb * vb / (n_b - 1.0));
    Ok(TTestResult {
        t_statistic: t,
        p_value: student_t_two_tailed_p(t, dof),
        dof,
        mean_a,
        mean_b,
        n_a: a.len(),
        n_b: b.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub test: TTestResult,
    pub mean_poem: f64,
    pub mean_ppo: f64,
    pub significant: bool,
}

/// Runs `welch_t_test(ppo, poem)`, so `t < 0` when POEM scores higher.
pub fn compare_runs(rewards_poem: &[f64], rewards_ppo: &[f64], alpha: f64) -> Result<Comparison> {
    let test = welch_t_test(rewards_ppo, rewards_poem)?;
    let (mean_poem, mean_ppo) = (test.mean_b, test.mean_a);
    Ok(Comparison {
        significant: test.p_value < alpha && mean_poem > mean_ppo,
        test,
        mean_poem,
        mean_ppo,
    })
}
