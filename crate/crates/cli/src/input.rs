//! CSV ingestion of survival records.
//!
//! Comma-separated, header row required. Recognised columns (case
//! insensitive): `time`, `status`, and optionally `group` (`A`/`B`). Other
//! columns are ignored.

use std::path::Path;

use refcurve::survival::{Cohort, Group, SubjectRecord};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TimeUnit {
    Years,
    Months,
    Days,
}

impl TimeUnit {
    fn to_years(self, t: f64) -> f64 {
        match self {
            TimeUnit::Years => t,
            TimeUnit::Months => t / 12.0,
            TimeUnit::Days => t / 365.25,
        }
    }
}

/// How raw columns map onto records.
#[derive(Debug, Clone)]
pub struct Mapping {
    pub time_column: String,
    pub status_column: String,
    pub group_column: String,
    pub event_codes: Vec<i64>,
    pub censor_codes: Vec<i64>,
    pub unit: TimeUnit,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

/// Reads records; rows without a group column get `default_group`.
pub fn read_records(
    path: &Path,
    mapping: &Mapping,
    default_group: Option<Group>,
) -> Result<Vec<SubjectRecord>, Failure> {
    let name = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::input(format!("{name}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Failure::input(format!("{name}: {e}")))?
        .clone();
    let time = column(&headers, &mapping.time_column)
        .ok_or_else(|| Failure::input(format!("{name}: missing `{}` column", mapping.time_column)))?;
    let status = column(&headers, &mapping.status_column)
        .ok_or_else(|| Failure::input(format!("{name}: missing `{}` column", mapping.status_column)))?;
    let group = column(&headers, &mapping.group_column);
    if group.is_none() && default_group.is_none() {
        return Err(Failure::input(format!(
            "{name}: missing `{}` column",
            mapping.group_column
        )));
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Failure::input(format!("{name}: {e}")))?;
        let line = row.position().map_or(0, |p| p.line());
        let at = |msg: String| Failure::input(format!("{name}, line {line}: {msg}"));
        let field = |i: usize| row.get(i).unwrap_or("");

        let raw_time: f64 = field(time)
            .parse()
            .map_err(|_| at(format!("time `{}` is not a number", field(time))))?;
        let code: i64 = field(status)
            .parse()
            .map_err(|_| at(format!("status `{}` is not an integer", field(status))))?;
        let event = if mapping.event_codes.contains(&code) {
            true
        } else if mapping.censor_codes.contains(&code) {
            false
        } else {
            return Err(at(format!("status {code} is neither an event nor a censoring code")));
        };
        let group = match group {
            Some(i) => field(i).parse::<Group>().map_err(|e| at(e.to_string()))?,
            None => default_group.expect("checked above"),
        };
        let record =
            SubjectRecord::new(mapping.unit.to_years(raw_time), event, group).map_err(|e| at(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

/// Reads a single-arm file; a group column, if present, must agree with `group`.
pub fn read_cohort(path: &Path, mapping: &Mapping, group: Group) -> Result<Cohort, Failure> {
    let records = read_records(path, mapping, Some(group))?;
    if let Some(other) = records.iter().find(|r| r.group != group) {
        return Err(Failure::input(format!(
            "{}: expected only group {group}, found {}",
            path.display(),
            other.group
        )));
    }
    Cohort::new(records).map_err(Failure::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn mapping() -> Mapping {
        Mapping {
            time_column: "time".into(),
            status_column: "status".into(),
            group_column: "group".into(),
            event_codes: vec![1],
            censor_codes: vec![0],
            unit: TimeUnit::Years,
        }
    }

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_and_ignores_unknown_columns() {
        let f = file("id,Time,status,extra\n1,1.5,1,x\n2,2.0,0,y\n");
        let c = read_cohort(f.path(), &mapping(), Group::A).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.event_count(), 1);
    }

    #[test]
    fn reports_line_numbers() {
        let f = file("time,status\n1.0,1\nabc,0\n");
        let err = read_cohort(f.path(), &mapping(), Group::A).unwrap_err();
        assert!(err.message.contains("line 3"), "{}", err.message);
        let f = file("time,status\n1.0,7\n");
        let err = read_cohort(f.path(), &mapping(), Group::A).unwrap_err();
        assert!(err.message.contains("line 2"));
        let f = file("time,status\n-1.0,1\n");
        assert!(read_cohort(f.path(), &mapping(), Group::A).is_err());
    }

    #[test]
    fn recodes_and_converts_units() {
        let f = file("time,status\n365.25,2\n730.5,1\n");
        let m = Mapping {
            event_codes: vec![2],
            censor_codes: vec![0, 1],
            unit: TimeUnit::Days,
            ..mapping()
        };
        let c = read_cohort(f.path(), &m, Group::A).unwrap();
        assert_eq!(c.records()[0].time, 1.0);
        assert!(c.records()[0].event);
        assert!(!c.records()[1].event);
    }

    #[test]
    fn group_column_must_match() {
        let f = file("time,status,group\n1.0,1,B\n");
        assert!(read_cohort(f.path(), &mapping(), Group::A).is_err());
        let records = read_records(f.path(), &mapping(), None).unwrap();
        assert_eq!(records[0].group, Group::B);
    }
}
