//! Trial-record CSV: header `trial,emitted,sa,sb,oa,ob`, one row per trial in
//! trial order. `sa`/`sb` are 0 for the unprimed and 1 for the primed
//! setting; `oa`/`ob` are 1 for `+` and 0 for `0`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::model::{Choice, Outcome, OutcomePair, SettingPair, TrialRecord};

pub const CSV_HEADER: [&str; 6] = ["trial", "emitted", "sa", "sb", "oa", "ob"];

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_records<W: Write>(out: W, records: &[TrialRecord]) -> Result<(), RecordError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let index = r.index.to_string();
        w.write_record([
            index.as_str(),
            bit(r.emitted),
            bit(r.settings.alice == Choice::Primed),
            bit(r.settings.bob == Choice::Primed),
            bit(r.outcomes.alice.is_plus()),
            bit(r.outcomes.bob.is_plus()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_to_csv(records: &[TrialRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("writing to memory cannot fail");
    buf
}

fn parse_bit(line: u64, column: &str, raw: &str) -> Result<bool, RecordError> {
    match raw {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(RecordError::Row {
            line,
            message: format!("column `{column}` must be 0 or 1, got `{raw}`"),
        }),
    }
}

/// Reads and validates a trial-record CSV. Trial indices must increase
/// strictly (filtered files may have gaps) and non-emitted trials must be `00`.
pub fn read_records<R: Read>(input: R) -> Result<Vec<TrialRecord>, RecordError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut rows = rdr.records();
    match rows.next() {
        Some(header) => {
            let header = header?;
            if header.iter().ne(CSV_HEADER) {
                return Err(RecordError::Row {
                    line: 1,
                    message: format!("expected header `{}`", CSV_HEADER.join(",")),
                });
            }
        }
        None => {
            return Err(RecordError::Row {
                line: 1,
                message: "empty file, missing header".into(),
            })
        }
    }
    let mut out = Vec::new();
    let mut previous: Option<u64> = None;
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| RecordError::Row { line, message };
        if row.len() != CSV_HEADER.len() {
            return Err(bad(format!("expected 6 fields, got {}", row.len())));
        }
        let index: u64 = row[0]
            .parse()
            .map_err(|_| bad(format!("bad trial index `{}`", &row[0])))?;
        if previous.is_some_and(|p| index <= p) {
            return Err(bad(format!("trial index {index} is not increasing")));
        }
        previous = Some(index);
        let mut bits = [false; 5];
        for (i, slot) in bits.iter_mut().enumerate() {
            *slot = parse_bit(line, CSV_HEADER[i + 1], &row[i + 1])?;
        }
        let [emitted, sa, sb, oa, ob] = bits;
        let outcome = |plus: bool| if plus { Outcome::Plus } else { Outcome::Zero };
        let record = TrialRecord {
            index,
            emitted,
            settings: SettingPair::new(Choice::from_index(sa as usize), Choice::from_index(sb as usize)),
            outcomes: OutcomePair::new(outcome(oa), outcome(ob)),
        };
        if !record.is_consistent() {
            return Err(bad(format!(
                "trial {index} has no emission but outcome {}",
                record.outcomes
            )));
        }
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<TrialRecord> {
        vec![
            TrialRecord {
                index: 0,
                emitted: false,
                settings: SettingPair::A_PRIME_B,
                outcomes: OutcomePair::ZZ,
            },
            TrialRecord {
                index: 1,
                emitted: true,
                settings: SettingPair::AB_PRIME,
                outcomes: OutcomePair::PZ,
            },
        ]
    }

    #[test]
    fn exact_bytes() {
        let text = String::from_utf8(records_to_csv(&sample())).unwrap();
        assert_eq!(text, "trial,emitted,sa,sb,oa,ob\n0,0,1,0,0,0\n1,1,0,1,1,0\n");
        assert_eq!(read_records(text.as_bytes()).unwrap(), sample());
    }

    fn line_of(text: &str) -> u64 {
        match read_records(text.as_bytes()).unwrap_err() {
            RecordError::Row { line, .. } => line,
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_rows_name_line() {
        let h = "trial,emitted,sa,sb,oa,ob\n";
        assert_eq!(line_of(&format!("{h}0,0,0,0,0,0\n1,0,0,0,1,0\n")), 3);
        assert_eq!(line_of(&format!("{h}0,2,0,0,0,0\n")), 2);
        assert_eq!(line_of(&format!("{h}0,1,0,0,0\n")), 2);
        assert_eq!(line_of(&format!("{h}x,1,0,0,0,0\n")), 2);
        assert_eq!(line_of(&format!("{h}3,1,0,0,0,0\n3,1,0,0,0,0\n")), 3);
        assert_eq!(line_of("trial,emitted\n"), 1);
        assert_eq!(line_of(""), 1);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(read_records("trial,emitted,sa,sb,oa,ob\n".as_bytes())
            .unwrap()
            .is_empty());
    }
}
