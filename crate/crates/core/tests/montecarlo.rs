use std::f64::consts::PI;

use pmqkd::decoy::{asymptotic_q_parity, finite_size_estimate, photon_click_fractions, TallyTable};
use pmqkd::model::{bit_error_rate, gain_mu};
use pmqkd::montecarlo::*;
use pmqkd::rates::{pm_rate_asymptotic, pm_rate_from_tallies, GroupSelection, PhaseErrorBound};
use pmqkd::{ChannelParams, IntensitySetting, ProtocolParams};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use IntensitySetting::{Vac, S, W};

fn config(distance: f64, e0: f64, rounds: f64, seed: u64) -> SimConfig {
    SimConfig::new(
        ChannelParams::table1(distance, e0),
        ProtocolParams::table1(rounds),
        seed,
    )
}

/// Standard score of `hits` out of `n` against probability `p`.
fn z(hits: u64, n: u64, p: f64) -> f64 {
    let var = n as f64 * p * (1.0 - p);
    if var == 0.0 {
        return if hits as f64 == n as f64 * p {
            0.0
        } else {
            f64::INFINITY
        };
    }
    (hits as f64 - n as f64 * p) / var.sqrt()
}

/// Two-sample standard score for proportions `a / n` and `b / m`.
fn z2(a: u64, n: u64, b: u64, m: u64) -> f64 {
    let pooled = (a + b) as f64 / (n + m) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n as f64 + 1.0 / m as f64);
    if var == 0.0 {
        return 0.0;
    }
    (a as f64 / n as f64 - b as f64 / m as f64) / var.sqrt()
}

#[test]
fn same_seed_gives_identical_tallies() {
    let mut c = config(50.0, 0.03, 200_000.0, 11);
    c.batch_size = 7_000;
    let a = simulate(&c).unwrap();
    let b = simulate(&c).unwrap();
    assert_eq!(a, b);
    c.seed = 12;
    assert_ne!(simulate(&c).unwrap().tallies, a.tallies);

    c.engine = Engine::Cell;
    assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
}

#[test]
fn random_walk_is_deterministic_across_batches() {
    let mut c = config(50.0, 0.0, 100_000.0, 5);
    c.batch_size = 9_000;
    c.drift = DriftModel::RandomWalk { sigma: 0.02 };
    assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
}

#[test]
fn lossless_two_slice_link_has_no_errors() {
    // With D = 2 the phases are 0 or pi, so the light always leaves one port.
    let channel = ChannelParams::from_transmittance(1.0, 0.0, 0.0);
    let mut protocol = ProtocolParams::table1(300_000.0);
    protocol.phase_slices = 2;
    protocol.mu = 0.8;
    protocol.nu = 0.3;
    for engine in [Engine::Round, Engine::Cell] {
        let mut c = SimConfig::new(channel, protocol, 3);
        c.engine = engine;
        let out = simulate(&c).unwrap();
        assert_eq!(out.stats.double_clicks, 0);
        for a in IntensitySetting::ALL {
            assert_eq!(out.tallies.bit_errors(a), 0, "{engine:?} {a}");
        }
        assert_eq!(out.tallies.clicked(Vac), 0);
        assert!(out.tallies.clicked(S) > 0);
    }
}

#[test]
fn gains_and_error_rates_match_the_model() {
    let c = config(100.0, 0.03, 1e7, 2024);
    let out = simulate(&c).unwrap();
    let d = c.protocol.phase_slices;
    let mut checked = 0;
    let mut failed = Vec::new();
    for a in IntensitySetting::ALL {
        let mu = c.protocol.intensity(a);
        let q = gain_mu(&c.channel, mu);
        let zq = z(out.tallies.clicked(a), out.tallies.sent(a), q);
        if zq.abs() >= 5.0 {
            failed.push(format!("{a} gain z = {zq}"));
        }
        for (j, cell) in out.tallies.cells(a).iter().enumerate() {
            checked += 1;
            let zg = z(cell.clicked, cell.sent, q);
            if zg.abs() >= 5.0 {
                failed.push(format!("{a} j={j} gain z = {zg}"));
            }
            if a != Vac {
                checked += 1;
                let e = bit_error_rate(&c.channel, mu, j as u32, d).unwrap();
                let ze = z(cell.bit_errors, cell.clicked, e);
                if ze.abs() >= 5.0 {
                    failed.push(format!("{a} j={j} qber z = {ze}"));
                }
            }
        }
    }
    assert!(failed.len() * 100 <= checked, "{failed:?}");
    assert!(failed.is_empty(), "{failed:?}");
}

#[test]
fn cell_engine_matches_round_engine() {
    // Short link and strong pulses so double clicks and multi-photon clicks are common.
    let mut c = config(10.0, 0.05, 3e6, 9);
    c.protocol.mu = 0.9;
    c.protocol.nu = 0.2;
    let round = simulate(&c).unwrap();
    c.engine = Engine::Cell;
    let cell = simulate(&c).unwrap();

    let zd = z2(
        round.stats.double_clicks,
        3_000_000,
        cell.stats.double_clicks,
        3_000_000,
    );
    assert!(zd.abs() < 5.0, "double clicks z = {zd}");
    for a in IntensitySetting::ALL {
        for j in 0..8 {
            let (r, s) = (round.tallies.cell(a, j), cell.tallies.cell(a, j));
            let zc = z2(r.clicked, r.sent, s.clicked, s.sent);
            let ze = z2(
                r.bit_errors,
                r.clicked.max(1),
                s.bit_errors,
                s.clicked.max(1),
            );
            assert!(zc.abs() < 5.0 && ze.abs() < 5.0, "{a} j={j}: {zc} {ze}");
            let (tr, ts) = (round.truth.cell(a, j), cell.truth.cell(a, j));
            for (x, y) in [
                (tr.single_photon, ts.single_photon),
                (tr.even, ts.even),
                (tr.odd_multi, ts.odd_multi),
            ] {
                let zt = z2(x, r.clicked.max(1), y, s.clicked.max(1));
                assert!(zt.abs() < 5.0, "{a} j={j} truth: {x} vs {y}");
            }
        }
    }
}

#[test]
fn ground_truth_matches_photon_click_fractions() {
    let mut c = config(200.0, 0.0, 1e10, 77);
    c.engine = Engine::Cell;
    c.protocol.mu = 0.4;
    let out = simulate(&c).unwrap();
    let all: Vec<usize> = (0..8).collect();
    let t = out.truth.sum(S, &all);
    let n = t.total();
    let q = photon_click_fractions(&c.channel, 0.4, 60).unwrap();
    let (_, q_even) = asymptotic_q_parity(&c.channel, 0.4).unwrap();
    // Dark counts and double clicks shift the sifted fractions by far less than the noise here.
    assert!(z(t.single_photon, n, q[1]).abs() < 5.0);
    assert!(z(t.even, n, q_even).abs() < 5.0);
}

/// Chi-square homogeneity statistic over per-group (no click, correct, error) counts.
fn homogeneity_p_value(a: &TallyTable, b: &TallyTable, setting: IntensitySetting) -> f64 {
    let mut stat = 0.0;
    let mut dof = 0.0;
    for j in 0..a.groups() {
        let (x, y) = (a.cell(setting, j), b.cell(setting, j));
        let rows = [
            [x.sent - x.clicked, x.clicked - x.bit_errors, x.bit_errors],
            [y.sent - y.clicked, y.clicked - y.bit_errors, y.bit_errors],
        ];
        let row_tot = rows.map(|r| r.iter().sum::<u64>() as f64);
        let total = row_tot[0] + row_tot[1];
        for col in 0..3 {
            let col_tot = (rows[0][col] + rows[1][col]) as f64;
            if col_tot == 0.0 {
                continue;
            }
            for (r, row) in rows.iter().enumerate() {
                let expected = row_tot[r] * col_tot / total;
                stat += (row[col] as f64 - expected).powi(2) / expected;
            }
            dof += 1.0;
        }
        dof -= 1.0;
    }
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

#[test]
fn compensated_drift_matches_no_drift() {
    let base = config(60.0, 0.03, 4e6, 1);
    let mut drifted = base;
    drifted.seed = 2;
    drifted.drift = DriftModel::FixedOffset {
        phi: 2.0 * PI * 3.0 / 16.0,
    };
    let a = simulate(&base).unwrap();
    let b = simulate(&drifted).unwrap();
    for setting in [W, S] {
        let p = homogeneity_p_value(&a.tallies, &b.tallies, setting);
        assert!(p > 0.001, "{setting}: p = {p}");
    }
}

#[test]
fn uncompensated_drift_raises_group_zero_qber() {
    // A residual of 0.3 slices rounds to j_delta = 0 and stays uncorrected.
    let residual = 0.3 * 2.0 * PI / 16.0;
    let mut c = config(100.0, 0.03, 1e10, 4);
    c.engine = Engine::Cell;
    c.drift = DriftModel::FixedOffset { phi: residual };
    let out = simulate(&c).unwrap();
    let eta = c.channel.eta();
    let mu = c.protocol.mu;
    let q = gain_mu(&c.channel, mu);
    let base = bit_error_rate(&c.channel, mu, 0, 16).unwrap();
    let raised = base + (residual / 2.0).sin().powi(2) * eta * mu * (-eta * mu).exp() / q;
    let cell = out.tallies.cell(S, 0);
    let ze = z(cell.bit_errors, cell.clicked, raised);
    assert!(ze.abs() < 5.0, "z = {ze}");
    // The rise is resolved: the uncorrected rate is far from the baseline.
    assert!(z(cell.bit_errors, cell.clicked, base) > 20.0);
}

#[test]
fn estimate_from_simulated_tallies_is_sound() {
    let mut c = config(100.0, 0.03, 1e8, 31);
    c.engine = Engine::Cell;
    let out = simulate(&c).unwrap();
    // The finite rate is zero at this size, so take the asymptotically useful groups.
    let finite =
        pm_rate_from_tallies(&out.tallies, &c.protocol, &GroupSelection::AutoPositive).unwrap();
    assert_eq!(finite.rate, 0.0);
    let groups = pm_rate_asymptotic(
        &c.channel,
        &c.protocol,
        &GroupSelection::AutoPositive,
        PhaseErrorBound::EvenParity,
    )
    .unwrap()
    .groups_kept();
    assert!(!groups.is_empty());
    let est = finite_size_estimate(&out.tallies, &c.protocol, &groups).unwrap();
    assert!(est.eph_upper >= out.truth.even_fraction(S, &groups).unwrap());
    assert!(est.eph_upper >= out.truth.non_single_fraction(S, &groups).unwrap());
    assert!(est.failure_probability <= c.protocol.epsilon * (1.0 + 1e-9));
}

#[test]
fn tallies_survive_csv_and_metadata_survives_json() {
    let c = config(80.0, 0.03, 50_000.0, 8);
    let (out, meta) = simulate_with_metadata(&c).unwrap();
    let mut buf = Vec::new();
    out.tallies.write_csv(&mut buf).unwrap();
    assert_eq!(TallyTable::read_csv(buf.as_slice()).unwrap(), out.tallies);
    let back = SimMetadata::from_json(&meta.to_json().unwrap()).unwrap();
    assert_eq!(back, meta);
    assert_eq!(back.ground_truth, out.truth);
}
