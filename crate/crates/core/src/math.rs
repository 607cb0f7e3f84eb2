//! Small numerical helpers shared by the model, estimator and rate code.

use crate::error::{Error, Result};

/// Binary Shannon entropy in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            what: "binary_entropy argument",
            value: p,
        });
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Entropy of an error-rate bound: rates above 1/2 cost a full bit.
pub fn entropy_of_bound(p: f64) -> f64 {
    let p = p.clamp(0.0, 0.5);
    binary_entropy(p).unwrap_or(1.0)
}

/// `ln(k!)`, exact summation below 256 and Stirling's series above.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 256 {
        (2..=k).map(|i| (i as f64).ln()).sum()
    } else {
        let n = k as f64;
        let inv = 1.0 / n;
        let inv2 = inv * inv;
        n * n.ln() - n
            + 0.5 * (2.0 * std::f64::consts::PI * n).ln()
            + inv / 12.0 * (1.0 - inv2 / 30.0 * (1.0 - inv2 * 2.0 / 7.0))
    }
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Modified Bessel function of the first kind, order zero.
///
/// The power series has only positive terms, so it stays accurate well past
/// the usual crossover; the asymptotic expansion takes over at `x >= 20`
/// where its smallest term is below `1e-17`.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < 20.0 {
        let q = x * x / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let kf = k as f64;
            let next = term * (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
            if next > term {
                break;
            }
            term = next;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        x.exp() / (2.0 * std::f64::consts::PI * x).sqrt() * sum
    }
}

/// `I0(x) - 1` without cancellation for small `x`.
pub fn bessel_i0m1(x: f64) -> f64 {
    let x = x.abs();
    if x >= 20.0 {
        return bessel_i0(x) - 1.0;
    }
    let q = x * x / 4.0;
    let mut term = q;
    let mut sum = q;
    let mut k = 2.0;
    while term >= sum * 1e-17 && term > 0.0 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (hi - lo).abs() > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Coarse grid followed by golden-section refinement around the best grid point.
pub fn maximize_1d<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, grid: usize) -> (f64, f64) {
    let step = (hi - lo) / grid as f64;
    let points: Vec<f64> = (1..=grid).map(|i| lo + step * i as f64).collect();
    let values: Vec<f64> = points.iter().map(|&x| f(x)).collect();
    let (best, _) = values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let a = if best == 0 {
        lo + step * 1e-3
    } else {
        points[best - 1]
    };
    let b = points[(best + 1).min(grid - 1)];
    let (x, v) = golden_section_max(&mut f, a, b, step * 1e-4);
    if v >= values[best] {
        (x, v)
    } else {
        (points[best], values[best])
    }
}

/// Nelder-Mead minimization from `start` with initial simplex edge `step`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    step: f64,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if (values[n] - values[0]).abs() <= tol * (values[0].abs() + tol) {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|p| p[d]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|d| centroid[d] + t * (simplex[n][d] - centroid[d]))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] {
                along(-0.5)
            } else {
                along(0.5)
            };
            let fc = f(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = (0..n)
                        .map(|d| simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]))
                        .collect();
                    values[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    (simplex[best].clone(), values[best])
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
