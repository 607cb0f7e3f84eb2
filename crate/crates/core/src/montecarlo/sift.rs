//! Per-round records and the sifting rule.

use serde::{Deserialize, Serialize};

use crate::params::IntensitySetting;

/// Detection outcome announced by the measurement site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Click {
    None,
    L,
    R,
    Double,
}

/// Everything the two parties hold about one round after the announcement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub kappa_a: bool,
    pub kappa_b: bool,
    pub j_a: u32,
    pub j_b: u32,
    pub setting_a: IntensitySetting,
    pub setting_b: IntensitySetting,
    pub click: Click,
    /// Phase-slice index of the estimated drift, subtracted before grouping.
    pub j_delta: u32,
}

/// Sifting result of a kept round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sifted {
    /// Merged phase group in `0..slices / 2`.
    pub group: usize,
    /// Whether Bob flips his key bit.
    pub flip: bool,
}

/// Merged group and Bob's flip for a compensated phase difference `j_d`.
///
/// Differences `j` and `j + D/2` differ by pi and share a group; a difference
/// in `[D/4, 3D/4)` is closer to pi than to zero, so Bob flips.
pub fn group_of(j_d: u32, slices: u32) -> Sifted {
    let j_d = j_d % slices;
    Sifted {
        group: (j_d % (slices / 2)) as usize,
        flip: 4 * j_d >= slices && 4 * j_d < 3 * slices,
    }
}

/// Compensated phase difference `(j_a - j_b - j_delta) mod D`.
pub fn phase_difference(j_a: u32, j_b: u32, j_delta: u32, slices: u32) -> u32 {
    let d = slices as u64;
    ((j_a as u64 % d + 2 * d - j_b as u64 % d - j_delta as u64 % d) % d) as u32
}

/// Phase group and key flip of a round, or `None` when it is discarded.
///
/// Rounds without exactly one click are discarded. The flip combines the
/// phase-difference rule with the extra flip Bob applies after an R click.
pub fn sift_round(record: &RoundRecord, slices: u32) -> Option<Sifted> {
    let r_click = match record.click {
        Click::L => false,
        Click::R => true,
        Click::None | Click::Double => return None,
    };
    let s = group_of(
        phase_difference(record.j_a, record.j_b, record.j_delta, slices),
        slices,
    );
    Some(Sifted {
        group: s.group,
        flip: s.flip ^ r_click,
    })
}

/// Whether a sifted round carries a bit error.
pub fn is_bit_error(record: &RoundRecord, sifted: Sifted) -> bool {
    (record.kappa_b ^ sifted.flip) != record.kappa_a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(j_a: u32, j_b: u32, click: Click) -> RoundRecord {
        RoundRecord {
            kappa_a: false,
            kappa_b: false,
            j_a,
            j_b,
            setting_a: IntensitySetting::S,
            setting_b: IntensitySetting::S,
            click,
            j_delta: 0,
        }
    }

    #[test]
    fn differences_one_and_nine_merge() {
        let a = sift_round(&record(1, 9, Click::L), 16).unwrap();
        let b = sift_round(&record(1, 1, Click::L), 16).unwrap();
        let c = sift_round(&record(9, 1, Click::L), 16).unwrap();
        assert_eq!(a.group, b.group);
        assert_eq!(a.group, 0);
        assert_eq!(c.group, 0);
        assert!(a.flip && !b.flip);
    }

    #[test]
    fn matched_l_click_has_no_error() {
        let r = record(3, 3, Click::L);
        assert!(!is_bit_error(&r, sift_round(&r, 16).unwrap()));
        let r = record(3, 3, Click::R);
        assert!(is_bit_error(&r, sift_round(&r, 16).unwrap()));
    }

    #[test]
    fn discards_double_and_none() {
        assert!(sift_round(&record(0, 0, Click::Double), 16).is_none());
        assert!(sift_round(&record(0, 0, Click::None), 16).is_none());
    }

    #[test]
    fn compensation_shifts_the_difference() {
        let mut r = record(5, 2, Click::L);
        r.j_delta = 3;
        assert_eq!(
            sift_round(&r, 16).unwrap(),
            sift_round(&record(0, 0, Click::L), 16).unwrap()
        );
        assert_eq!(phase_difference(0, 15, 15, 16), 2);
    }
}
