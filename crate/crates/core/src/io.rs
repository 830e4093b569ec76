//! File formats: JSON for configurations and fitted models, CSV for time
//! series.
//!
//! - PV history: `day,slot,power_kw`, one row per sample, every slot of
//!   every day present exactly once, days contiguous.
//! - Hourly profiles (price, demand): `step,value`, steps `0..N` in order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::IoError;

#[derive(Debug, Serialize, Deserialize)]
struct PvRow {
    day: usize,
    slot: usize,
    power_kw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    step: usize,
    value: f64,
}

fn format_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

/// Reads PV days of `slots` samples each, ordered by day index.
pub fn read_pv_csv<R: Read>(input: R, slots: usize) -> Result<Vec<Vec<f64>>, IoError> {
    if slots == 0 {
        return Err(format_err("slots per day must be positive"));
    }
    let mut reader = csv::Reader::from_reader(input);
    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut first_day = None;
    for row in reader.deserialize::<PvRow>() {
        let row = row?;
        if row.slot >= slots {
            return Err(format_err(format!(
                "day {}: slot {} out of range 0..{slots}",
                row.day, row.slot
            )));
        }
        if !row.power_kw.is_finite() {
            return Err(format_err(format!(
                "day {} slot {}: non-finite power",
                row.day, row.slot
            )));
        }
        let base = *first_day.get_or_insert(row.day);
        if row.day < base {
            return Err(format_err(format!(
                "day {} precedes the first day {base}",
                row.day
            )));
        }
        let index = (row.day - base) * slots + row.slot;
        if index >= cells.len() {
            cells.resize(index + 1, None);
        }
        if cells[index].replace(row.power_kw).is_some() {
            return Err(format_err(format!(
                "day {} slot {}: duplicate sample",
                row.day, row.slot
            )));
        }
    }
    let base = first_day.ok_or_else(|| format_err("no PV samples"))?;
    cells.resize(cells.len().div_ceil(slots) * slots, None);
    if let Some(missing) = cells.iter().position(Option::is_none) {
        return Err(format_err(format!(
            "day {} slot {}: missing sample",
            base + missing / slots,
            missing % slots
        )));
    }
    Ok(cells
        .chunks(slots)
        .map(|day| day.iter().map(|v| v.unwrap_or_default()).collect())
        .collect())
}

/// Writes PV days with day indices starting at `first_day`.
pub fn write_pv_csv<W: Write>(days: &[Vec<f64>], first_day: usize, out: W) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(out);
    for (d, day) in days.iter().enumerate() {
        for (slot, &power_kw) in day.iter().enumerate() {
            writer.serialize(PvRow {
                day: first_day + d,
                slot,
                power_kw,
            })?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Reads a per-step profile; steps must run `0..N` in order.
pub fn read_profile_csv<R: Read>(input: R) -> Result<Vec<f64>, IoError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut values = Vec::new();
    for row in reader.deserialize::<ProfileRow>() {
        let row = row?;
        if row.step != values.len() {
            return Err(format_err(format!(
                "expected step {}, found {}",
                values.len(),
                row.step
            )));
        }
        if !row.value.is_finite() {
            return Err(format_err(format!("step {}: non-finite value", row.step)));
        }
        values.push(row.value);
    }
    if values.is_empty() {
        return Err(format_err("empty profile"));
    }
    Ok(values)
}

pub fn write_profile_csv<W: Write>(values: &[f64], out: W) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(out);
    for (step, &value) in values.iter().enumerate() {
        writer.serialize(ProfileRow { step, value })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_pv_file(path: &Path, slots: usize) -> Result<Vec<Vec<f64>>, IoError> {
    read_pv_csv(BufReader::new(File::open(path)?), slots)
}

pub fn read_profile_file(path: &Path) -> Result<Vec<f64>, IoError> {
    read_profile_csv(BufReader::new(File::open(path)?))
}

/// Creates `path` for buffered writing.
pub fn create_file(path: &Path) -> Result<BufWriter<File>, IoError> {
    Ok(BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pv_round_trip() {
        let days = vec![vec![0.0, 1.5, 0.25], vec![0.1, 0.0, 3.0]];
        let mut buf = Vec::new();
        write_pv_csv(&days, 4, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("day,slot,power_kw\n4,0,0.0\n"));
        assert_eq!(read_pv_csv(buf.as_slice(), 3).unwrap(), days);
    }

    #[test]
    fn pv_rows_in_any_order() {
        let text = "day,slot,power_kw\n0,1,2\n1,0,3\n0,0,1\n1,1,4\n";
        assert_eq!(
            read_pv_csv(text.as_bytes(), 2).unwrap(),
            vec![vec![1.0, 2.0], vec![3.0, 4.0]]
        );
    }

    #[test]
    fn pv_rejects_gaps_and_duplicates() {
        let missing = "day,slot,power_kw\n0,0,1\n0,1,2\n1,1,4\n";
        assert!(
            matches!(read_pv_csv(missing.as_bytes(), 2), Err(IoError::Format(m)) if m.contains("day 1 slot 0"))
        );
        let duplicate = "day,slot,power_kw\n0,0,1\n0,0,2\n";
        assert!(matches!(
            read_pv_csv(duplicate.as_bytes(), 2),
            Err(IoError::Format(_))
        ));
        let range = "day,slot,power_kw\n0,2,1\n";
        assert!(matches!(
            read_pv_csv(range.as_bytes(), 2),
            Err(IoError::Format(_))
        ));
        assert!(read_pv_csv("day,slot,power_kw\n".as_bytes(), 2).is_err());
        assert!(read_pv_csv("day,slot\n0,0\n".as_bytes(), 2).is_err());
    }

    #[test]
    fn profile_round_trip() {
        let values = vec![0.12, 0.3, 0.3];
        let mut buf = Vec::new();
        write_profile_csv(&values, &mut buf).unwrap();
        assert_eq!(read_profile_csv(buf.as_slice()).unwrap(), values);
        assert!(read_profile_csv("step,value\n1,0.5\n".as_bytes()).is_err());
        assert!(read_profile_csv("step,value\n".as_bytes()).is_err());
    }
}
