//! Gamma function, unit-ball volumes and small combinatorial helpers.

use std::f64::consts::PI;

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

/// Natural log of the Gamma function for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma is only defined here for x > 0");
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Volume of the `j`-dimensional unit ball, `pi^{j/2} / Gamma(j/2 + 1)`.
pub fn kappa(j: usize) -> f64 {
    let h = j as f64 / 2.0;
    (h * PI.ln() - ln_gamma(h + 1.0)).exp()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Falling factorial `(j)_r = j! / (j - r)!`.
pub fn falling_factorial(j: usize, r: usize) -> f64 {
    if r > j {
        return 0.0;
    }
    (0..r).fold(1.0, |acc, i| acc * (j - i) as f64)
}

/// Calls `f` with every `k`-subset of `items`, in lexicographic order of
/// positions.
pub fn for_each_combination<F: FnMut(&[usize])>(items: &[usize], k: usize, mut f: F) {
    let n = items.len();
    if k == 0 {
        f(&[]);
        return;
    }
    if k > n {
        return;
    }
    let mut pos: Vec<usize> = (0..k).collect();
    let mut buf: Vec<usize> = pos.iter().map(|&p| items[p]).collect();
    loop {
        f(&buf);
        let mut i = k - 1;
        while pos[i] == i + n - k {
            if i == 0 {
                return;
            }
            i -= 1;
        }
        pos[i] += 1;
        for j in i + 1..k {
            pos[j] = pos[j - 1] + 1;
        }
        for j in i..k {
            buf[j] = items[pos[j]];
        }
    }
}

/// Relative difference `|a - b| / max(|a|, |b|)`, 0 when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}
