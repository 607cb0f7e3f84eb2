//! Observed counts per intensity setting and phase group.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::IntensitySetting;

pub const CSV_HEADER: [&str; 5] = ["setting", "j_s", "sent", "clicked", "bit_errors"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyCell {
    pub sent: u64,
    pub clicked: u64,
    pub bit_errors: u64,
}

impl TallyCell {
    fn add(&mut self, other: &TallyCell) {
        self.sent += other.sent;
        self.clicked += other.clicked;
        self.bit_errors += other.bit_errors;
    }
}

/// Sent, clicked and bit-error counts for rounds where both parties chose the
/// same intensity setting, split by merged phase group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyTable {
    groups: usize,
    cells: [Vec<TallyCell>; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    setting: String,
    j_s: u64,
    sent: u64,
    clicked: u64,
    bit_errors: u64,
}

impl TallyTable {
    /// An empty table for `slices` phase slices, i.e. `slices / 2` merged groups.
    pub fn new(slices: u32) -> Self {
        let groups = (slices / 2).max(1) as usize;
        TallyTable {
            groups,
            cells: std::array::from_fn(|_| vec![TallyCell::default(); groups]),
        }
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn slices(&self) -> u32 {
        2 * self.groups as u32
    }

    pub fn cell(&self, setting: IntensitySetting, group: usize) -> &TallyCell {
        &self.cells[setting.index()][group]
    }

    pub fn cell_mut(&mut self, setting: IntensitySetting, group: usize) -> &mut TallyCell {
        &mut self.cells[setting.index()][group]
    }

    pub fn cells(&self, setting: IntensitySetting) -> &[TallyCell] {
        &self.cells[setting.index()]
    }

    /// Aggregate `N^a`.
    pub fn sent(&self, setting: IntensitySetting) -> u64 {
        self.cells(setting).iter().map(|c| c.sent).sum()
    }

    /// Aggregate `M^a`.
    pub fn clicked(&self, setting: IntensitySetting) -> u64 {
        self.cells(setting).iter().map(|c| c.clicked).sum()
    }

    pub fn bit_errors(&self, setting: IntensitySetting) -> u64 {
        self.cells(setting).iter().map(|c| c.bit_errors).sum()
    }

    /// Adds every count of `other` into `self`. Both tables must have the same group count.
    pub fn merge(&mut self, other: &TallyTable) -> Result<()> {
        if other.groups != self.groups {
            return Err(Error::invalid(
                "tallies",
                "cannot merge tables with different group counts",
            ));
        }
        for (mine, theirs) in self.cells.iter_mut().zip(&other.cells) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.add(b);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for setting in IntensitySetting::ALL {
            for (j, c) in self.cells(setting).iter().enumerate() {
                if c.clicked > c.sent || c.bit_errors > c.clicked {
                    return Err(Error::Parse(format!(
                        "inconsistent counts for setting {setting}, j_s = {j}: sent {}, clicked {}, bit_errors {}",
                        c.sent, c.clicked, c.bit_errors
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes the table as CSV, rows ordered by setting name then `j_s`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut settings = IntensitySetting::ALL;
        settings.sort_by_key(|s| s.name());
        for setting in settings {
            for (j, c) in self.cells(setting).iter().enumerate() {
                out.serialize(CsvRow {
                    setting: setting.name().to_string(),
                    j_s: j as u64,
                    sent: c.sent,
                    clicked: c.clicked,
                    bit_errors: c.bit_errors,
                })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Parses a CSV written by [`TallyTable::write_csv`]. Rows may come in any
    /// order but every (setting, `j_s`) pair must appear exactly once; the
    /// group count is the largest `j_s` plus one.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = input.headers()?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::Parse(format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for row in input.deserialize::<CsvRow>() {
            let row = row?;
            let setting: IntensitySetting = row.setting.parse()?;
            rows.push((setting, row));
        }
        let groups = match rows.iter().map(|(_, r)| r.j_s).max() {
            Some(max) if max < 1 << 20 => max as usize + 1,
            Some(max) => return Err(Error::Parse(format!("phase group {max} is out of range"))),
            None => return Err(Error::Parse("tally file has no rows".into())),
        };
        if rows.len() != 3 * groups {
            return Err(Error::Parse(format!(
                "expected {} rows for {groups} phase groups, found {}",
                3 * groups,
                rows.len()
            )));
        }
        let mut table = TallyTable::new(2 * groups as u32);
        let mut seen = vec![[false; 3]; groups];
        for (setting, row) in rows {
            let j = row.j_s as usize;
            if std::mem::replace(&mut seen[j][setting.index()], true) {
                return Err(Error::Parse(format!(
                    "duplicate row for setting {setting}, j_s = {j}"
                )));
            }
            *table.cell_mut(setting, j) = TallyCell {
                sent: row.sent,
                clicked: row.clicked,
                bit_errors: row.bit_errors,
            };
        }
        table.validate()?;
        Ok(table)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        TallyTable::read_csv(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use IntensitySetting::*;

    fn sample() -> TallyTable {
        let mut t = TallyTable::new(4);
        *t.cell_mut(S, 0) = TallyCell {
            sent: 100,
            clicked: 10,
            bit_errors: 1,
        };
        *t.cell_mut(S, 1) = TallyCell {
            sent: 90,
            clicked: 9,
            bit_errors: 4,
        };
        *t.cell_mut(W, 1) = TallyCell {
            sent: 50,
            clicked: 2,
            bit_errors: 0,
        };
        *t.cell_mut(Vac, 0) = TallyCell {
            sent: 20,
            clicked: 0,
            bit_errors: 0,
        };
        t
    }

    #[test]
    fn aggregates_are_sums() {
        let t = sample();
        assert_eq!(t.sent(S), 190);
        assert_eq!(t.clicked(S), 19);
        assert_eq!(t.bit_errors(S), 5);
        assert_eq!(t.groups(), 2);
    }

    #[test]
    fn csv_round_trip_and_row_order() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let first: Vec<&str> = text.lines().map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(first, ["setting", "s", "s", "vac", "vac", "w", "w"]);
        assert_eq!(TallyTable::read_csv(&buf[..]).unwrap(), t);
    }

    #[test]
    fn rejects_bad_files() {
        let bad_header = "setting,j,sent,clicked,bit_errors\n";
        assert!(TallyTable::read_csv(bad_header.as_bytes()).is_err());
        let more_clicks =
            "setting,j_s,sent,clicked,bit_errors\ns,0,1,2,0\nw,0,1,0,0\nvac,0,1,0,0\n";
        assert!(TallyTable::read_csv(more_clicks.as_bytes()).is_err());
        let missing = "setting,j_s,sent,clicked,bit_errors\ns,0,1,1,0\nw,0,1,0,0\n";
        assert!(TallyTable::read_csv(missing.as_bytes()).is_err());
        let dup = "setting,j_s,sent,clicked,bit_errors\ns,0,1,1,0\ns,0,1,0,0\nvac,0,1,0,0\n";
        assert!(TallyTable::read_csv(dup.as_bytes()).is_err());
        let unknown = "setting,j_s,sent,clicked,bit_errors\nx,0,1,1,0\n";
        assert!(TallyTable::read_csv(unknown.as_bytes()).is_err());
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = sample();
        a.merge(&sample()).unwrap();
        assert_eq!(a.sent(S), 380);
        assert!(a.merge(&TallyTable::new(16)).is_err());
    }
}
