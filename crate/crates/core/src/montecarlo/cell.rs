//! Cell-level engine.
//!
//! Rounds are i.i.d., so the tallies are a multinomial over (setting, phase
//! difference, parity, misalignment swap, outcome class). Sampling those
//! counts directly gives the same distribution as the round engine at a cost
//! independent of the number of rounds.

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use std::f64::consts::PI;

use super::sift::{group_of, phase_difference};
use super::{
    compensation_index, left_fraction, misalignment_flip_probability, outcome_classes, DriftModel,
    PhotonCounts, SimConfig, SimOutput,
};
use crate::error::Result;
use crate::params::IntensitySetting;

pub(super) fn run(config: &SimConfig) -> Result<SimOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let slices = config.protocol.phase_slices;
    let eta = config.channel.eta();
    let dark = config.channel.dark_count_rate;
    let e0 = config.channel.misalignment;
    let phi = match config.drift {
        DriftModel::FixedOffset { phi } => phi,
        _ => 0.0,
    };
    let j_delta = compensation_index(phi, slices);

    let mut out = SimOutput::empty(slices);
    out.stats.rounds = config.rounds();
    let r = config.protocol.intensity_probabilities.as_array();
    let matched = r.map(|p| p * p);
    let mut setting_probs = matched.to_vec();
    setting_probs.push((1.0 - matched.iter().sum::<f64>()).max(0.0));
    let by_setting = multinomial(&mut rng, config.rounds(), &setting_probs);
    out.stats.mismatched = by_setting[3];

    let cells = 2 * slices as usize;
    for setting in IntensitySetting::ALL {
        let mu = config.protocol.intensity(setting);
        let by_cell = multinomial(&mut rng, by_setting[setting.index()], &vec![1.0; cells]);
        for (index, &n) in by_cell.iter().enumerate() {
            let delta = (index / 2) as u32;
            let parity = index % 2 == 1;
            let theta =
                2.0 * PI * delta as f64 / slices as f64 + if parity { PI } else { 0.0 } - phi;
            let sifted = group_of(phase_difference(delta, 0, j_delta, slices), slices);
            let cell = out.tallies.cell_mut(setting, sifted.group);
            cell.sent += n;

            let c = left_fraction(theta);
            let p_swap = misalignment_flip_probability(c.min(1.0 - c), e0);
            let swapped = sample_binomial(&mut rng, n, p_swap);
            for (count, c) in [(n - swapped, c), (swapped, 1.0 - c)] {
                let o = outcome_classes(mu, eta, c, dark);
                let mut probs = Vec::with_capacity(8);
                probs.extend(o.left.as_array());
                probs.extend(o.right.as_array());
                probs.push(o.double);
                probs.push(o.none);
                let k = multinomial(&mut rng, count, &probs);
                let left = PhotonCounts {
                    single_photon: k[0],
                    odd_multi: k[1],
                    even: k[2],
                };
                let right = PhotonCounts {
                    single_photon: k[3],
                    odd_multi: k[4],
                    even: k[5],
                };
                // An L click is an error when the key parity and Bob's flip
                // disagree; an R click flips once more.
                let l_error = parity ^ sifted.flip;
                let cell = out.tallies.cell_mut(setting, sifted.group);
                cell.clicked += left.total() + right.total();
                cell.bit_errors += if l_error { left.total() } else { right.total() };
                let truth = out.truth.cell_mut(setting, sifted.group);
                truth.add(&left);
                truth.add(&right);
                out.stats.double_clicks += k[6];
            }
        }
    }
    Ok(out)
}

fn sample_binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("probability in (0, 1)")
        .sample(rng)
}

/// Multinomial draw by successive conditional binomials. `weights` need not
/// be normalized; the last category takes the remainder.
fn multinomial<R: Rng>(rng: &mut R, n: u64, weights: &[f64]) -> Vec<u64> {
    let mut counts = vec![0; weights.len()];
    let mut left = n;
    let mut mass: f64 = weights.iter().sum();
    for (i, &w) in weights.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == weights.len() {
            counts[i] = left;
            break;
        }
        let p = if mass > 0.0 {
            (w / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        counts[i] = sample_binomial(rng, left, p);
        left -= counts[i];
        mass -= w;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multinomial_conserves_and_follows_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = [0.5, 0.0, 0.25, 0.25];
        let k = multinomial(&mut rng, 1_000_000, &w);
        assert_eq!(k.iter().sum::<u64>(), 1_000_000);
        assert_eq!(k[1], 0);
        assert!((k[0] as f64 - 500_000.0).abs() < 5.0 * 500.0);
        assert_eq!(multinomial(&mut rng, 0, &w), vec![0; 4]);
    }
}
