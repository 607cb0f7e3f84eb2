//! Click statistics at the interfering beam splitter.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Joint click probabilities of the two detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickProbs {
    /// Only the L detector clicks.
    pub left: f64,
    /// Only the R detector clicks.
    pub right: f64,
    pub double: f64,
    pub none: f64,
}

impl ClickProbs {
    pub fn single(&self) -> f64 {
        self.left + self.right
    }
}

/// Mean photon numbers at the L and R outputs for post-loss coherent amplitudes.
///
/// L is the constructive port for equal phases.
pub fn output_intensities(amp_a: Complex64, amp_b: Complex64) -> (f64, f64) {
    (
        (amp_a + amp_b).norm_sqr() / 2.0,
        (amp_a - amp_b).norm_sqr() / 2.0,
    )
}

/// Click probabilities for threshold detectors with dark-count probability `dark`.
///
/// Each output port carries a coherent state, so a detector stays silent with
/// probability `(1 - dark) exp(-intensity)`, independently of the other.
pub fn detector_click_probs(amp_a: Complex64, amp_b: Complex64, dark: f64) -> ClickProbs {
    let (i_l, i_r) = output_intensities(amp_a, amp_b);
    let silent_l = (1.0 - dark) * (-i_l).exp();
    let silent_r = (1.0 - dark) * (-i_r).exp();
    ClickProbs {
        left: (1.0 - silent_l) * silent_r,
        right: silent_l * (1.0 - silent_r),
        double: (1.0 - silent_l) * (1.0 - silent_r),
        none: silent_l * silent_r,
    }
}

/// Probability of swapping the output ports that adds `misalignment` to the
/// wrong-port fraction.
///
/// With minority fraction `s` the wrong port receives `s + p (1 - 2 s)` of the
/// light after a swap with probability `p`; `p = e0 / (1 - 2 s)` makes that
/// `s + e0`, the per-group error of the analytic model. Capped at 1/2, where
/// both ports are equally likely.
pub fn misalignment_flip_probability(minority_fraction: f64, misalignment: f64) -> f64 {
    let contrast = 1.0 - 2.0 * minority_fraction;
    if misalignment <= 0.0 {
        0.0
    } else if contrast <= 2.0 * misalignment {
        0.5
    } else {
        misalignment / contrast
    }
}

/// Fraction of the interfered light that exits the L port for relative phase `theta`.
pub fn left_fraction(theta: f64) -> f64 {
    let c = (theta / 2.0).cos();
    c * c
}

/// Single-click probabilities of one port split by the emitted photon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortClasses {
    pub single_photon: f64,
    pub odd_multi: f64,
    pub even: f64,
}

impl PortClasses {
    pub fn total(&self) -> f64 {
        self.single_photon + self.odd_multi + self.even
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.single_photon, self.odd_multi, self.even]
    }
}

/// Probabilities of the nine outcome classes of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeClasses {
    pub left: PortClasses,
    pub right: PortClasses,
    pub double: f64,
    pub none: f64,
}

/// Outcome classes for total intensity `mu`, per-arm transmittance `eta` and
/// L-port fraction `c` of the transmitted light.
///
/// The emitted photon number is the sum of three independent Poisson counts:
/// photons reaching L, photons reaching R and photons lost on the way. A
/// single L click needs R silent, which fixes the R count at zero; the parity
/// of the rest follows from the Poisson parity generating function. With
/// `x1 = 1 - eta (1 - c)` and `x0 = 1 - eta`, the L-only even probability is
/// `e^-mu (1 - dark) [cosh(mu x1) - (1 - dark) cosh(mu x0)]`, written with
/// products of hyperbolic functions so weak pulses keep full precision.
pub fn outcome_classes(mu: f64, eta: f64, c: f64, dark: f64) -> OutcomeClasses {
    let port = |c: f64| {
        let x1 = 1.0 - eta * (1.0 - c);
        let x0 = 1.0 - eta;
        let half_sum = mu * (x1 + x0) / 2.0;
        let half_diff = mu * eta * c / 2.0;
        let scale = (-mu).exp() * (1.0 - dark);
        let even = scale * (2.0 * half_sum.sinh() * half_diff.sinh() + dark * (mu * x0).cosh());
        let odd = scale * (2.0 * half_sum.cosh() * half_diff.sinh() + dark * (mu * x0).sinh());
        let single_photon = scale * mu * (eta * c + dark * x0);
        PortClasses {
            single_photon,
            odd_multi: (odd - single_photon).max(0.0),
            even,
        }
    };
    let i_l = eta * mu * c;
    let i_r = eta * mu * (1.0 - c);
    let double = (1.0 - (1.0 - dark) * (-i_l).exp()) * (1.0 - (1.0 - dark) * (-i_r).exp());
    let none = (1.0 - dark) * (1.0 - dark) * (-eta * mu).exp();
    OutcomeClasses {
        left: port(c),
        right: port(1.0 - c),
        double,
        none,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dark_port_for_equal_amplitudes() {
        let a = Complex64::new(0.3, 0.1);
        let p = detector_click_probs(a, a, 0.0);
        assert_eq!(p.right, 0.0);
        assert_eq!(p.double, 0.0);
        assert!((p.left + p.none - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_arm_total_click() {
        let a = Complex64::new(0.4, 0.0);
        let pd = 1e-3;
        let p = detector_click_probs(a, Complex64::new(0.0, 0.0), pd);
        let want = 1.0 - (1.0 - pd).powi(2) * (-0.16f64).exp();
        assert!((p.single() + p.double - want).abs() < 1e-15);
    }

    #[test]
    fn classes_sum_to_one_and_match_ports() {
        for &(mu, eta, c, pd) in &[
            (0.1, 0.02, 0.9, 1e-8),
            (1.5, 0.7, 0.3, 1e-3),
            (0.0, 0.5, 1.0, 1e-2),
        ] {
            let o = outcome_classes(mu, eta, c, pd);
            let sum = o.left.total() + o.right.total() + o.double + o.none;
            assert!((sum - 1.0).abs() < 1e-14, "{sum}");
            let theta = 2.0 * c.sqrt().acos();
            let amp = (eta * mu / 2.0).sqrt();
            let p = detector_click_probs(
                Complex64::new(amp, 0.0),
                Complex64::from_polar(amp, -theta),
                pd,
            );
            assert!((o.left.total() - p.left).abs() < 1e-15);
            assert!((o.right.total() - p.right).abs() < 1e-15);
        }
    }

    #[test]
    fn classes_match_brute_force_sum() {
        // Sum over (n_l, n_lost) with n_r = 0 directly.
        let (mu, eta, c, pd): (f64, f64, f64, f64) = (0.8, 0.3, 0.7, 0.05);
        let pois = |l: f64, n: u32| {
            (-l).exp() * l.powi(n as i32) / (1..=n).map(f64::from).product::<f64>()
        };
        let (il, ir, l0) = (eta * mu * c, eta * mu * (1.0 - c), mu * (1.0 - eta));
        let mut by_k = [0.0; 60];
        for nl in 0..30 {
            for nlost in 0..30 {
                let click = if nl > 0 { 1.0 } else { pd };
                by_k[(nl + nlost) as usize] += pois(il, nl) * pois(l0, nlost) * click;
            }
        }
        let r_silent = (1.0 - pd) * (-ir).exp();
        let even: f64 = by_k.iter().step_by(2).sum::<f64>() * r_silent;
        let odd_multi: f64 = by_k.iter().skip(3).step_by(2).sum::<f64>() * r_silent;
        let o = outcome_classes(mu, eta, c, pd);
        assert!((o.left.even - even).abs() < 1e-15);
        assert!((o.left.single_photon - by_k[1] * r_silent).abs() < 1e-15);
        assert!((o.left.odd_multi - odd_multi).abs() < 1e-15);
    }

    #[test]
    fn misalignment_calibration() {
        assert_eq!(misalignment_flip_probability(0.0, 0.0), 0.0);
        let s = left_fraction(PI - 2.0 * PI / 16.0);
        let p = misalignment_flip_probability(s, 0.03);
        assert!((s + p * (1.0 - 2.0 * s) - s - 0.03).abs() < 1e-15);
        assert_eq!(misalignment_flip_probability(0.5, 0.01), 0.5);
    }
}
