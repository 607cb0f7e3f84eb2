//! Round-by-round engine.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::sift::{group_of, is_bit_error, phase_difference, sift_round, Click, RoundRecord};
use super::{
    compensation_index, cumulative, draw_setting, misalignment_flip_probability,
    output_intensities, poisson, DriftModel, SimConfig, SimOutput,
};
use crate::error::Result;

/// Batches run on independent streams of one seed; batch `b` uses stream `b`.
pub(super) fn run(config: &SimConfig) -> Result<SimOutput> {
    let rounds = config.rounds();
    let batches = rounds.div_ceil(config.batch_size);
    let size = |b: u64| config.batch_size.min(rounds - b * config.batch_size);
    let mut total = SimOutput::empty(config.protocol.phase_slices);
    match config.drift {
        DriftModel::RandomWalk { .. } => {
            // The walk carries over from batch to batch, so batches run in order.
            let mut phi = 0.0;
            for b in 0..batches {
                let (out, end) = run_batch(config, b, size(b), phi);
                phi = end;
                total.merge(&out)?;
            }
        }
        _ => {
            let outs: Vec<SimOutput> = (0..batches)
                .into_par_iter()
                .map(|b| run_batch(config, b, size(b), 0.0).0)
                .collect();
            for out in &outs {
                total.merge(out)?;
            }
        }
    }
    Ok(total)
}

fn run_batch(config: &SimConfig, batch: u64, rounds: u64, phi_start: f64) -> (SimOutput, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(batch);

    let slices = config.protocol.phase_slices;
    let d = slices as f64;
    let eta = config.channel.eta();
    let dark = config.channel.dark_count_rate;
    let e0 = config.channel.misalignment;
    let cum = cumulative(config);
    let (mut phi, step) = match config.drift {
        DriftModel::None => (0.0, 0.0),
        DriftModel::FixedOffset { phi } => (phi, 0.0),
        DriftModel::RandomWalk { sigma } => (phi_start, sigma),
    };

    let mut out = SimOutput::empty(slices);
    out.stats.rounds = rounds;
    for _ in 0..rounds {
        if step > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            phi += step * z;
        }
        let setting_a = draw_setting(&mut rng, &cum);
        let setting_b = draw_setting(&mut rng, &cum);
        if setting_a != setting_b {
            out.stats.mismatched += 1;
            continue;
        }
        let j_a = rng.random_range(0..slices);
        let j_b = rng.random_range(0..slices);
        let kappa_a: bool = rng.random();
        let kappa_b: bool = rng.random();
        let mu = config.protocol.intensity(setting_a);

        // Coherent amplitudes at the midpoint; drift is a phase on Bob's pulse.
        let amp = (eta * mu / 2.0).sqrt();
        let phase_a = 2.0 * PI * j_a as f64 / d + if kappa_a { PI } else { 0.0 };
        let phase_b = 2.0 * PI * j_b as f64 / d + if kappa_b { PI } else { 0.0 } + phi;
        let (mut i_l, mut i_r) = output_intensities(
            Complex64::from_polar(amp, phase_a),
            Complex64::from_polar(amp, phase_b),
        );
        let transmitted = i_l + i_r;
        if transmitted > 0.0 && e0 > 0.0 {
            let p = misalignment_flip_probability(i_l.min(i_r) / transmitted, e0);
            if rng.random::<f64>() < p {
                std::mem::swap(&mut i_l, &mut i_r);
            }
        }

        let n_l = poisson(&mut rng, i_l);
        let n_r = poisson(&mut rng, i_r);
        let click_l = n_l > 0 || rng.random::<f64>() < dark;
        let click_r = n_r > 0 || rng.random::<f64>() < dark;
        let click = match (click_l, click_r) {
            (false, false) => Click::None,
            (true, false) => Click::L,
            (false, true) => Click::R,
            (true, true) => Click::Double,
        };
        let record = RoundRecord {
            kappa_a,
            kappa_b,
            j_a,
            j_b,
            setting_a,
            setting_b,
            click,
            j_delta: compensation_index(phi, slices),
        };

        let group = group_of(phase_difference(j_a, j_b, record.j_delta, slices), slices).group;
        out.tallies.cell_mut(setting_a, group).sent += 1;
        if click == Click::Double {
            out.stats.double_clicks += 1;
        }
        if let Some(sifted) = sift_round(&record, slices) {
            let cell = out.tallies.cell_mut(setting_a, group);
            cell.clicked += 1;
            cell.bit_errors += is_bit_error(&record, sifted) as u64;
            let lost = poisson(&mut rng, mu * (1.0 - eta));
            out.truth
                .cell_mut(setting_a, group)
                .record(n_l + n_r + lost);
        }
    }
    (out, phi)
}
