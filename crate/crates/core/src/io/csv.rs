use std::cmp::Ordering;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::log::{Activity, EventLog, Lifecycle, Trace};

/// Column layout of a flat event table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub case_column: String,
    pub activity_column: String,
    /// Timestamp or integer index; events are sorted by it within a case.
    pub order_column: String,
    /// Optional `start`/`complete` column for high-level activities.
    pub lifecycle_column: Option<String>,
    pub delimiter: u8,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            case_column: "case".into(),
            activity_column: "activity".into(),
            order_column: "order".into(),
            lifecycle_column: None,
            delimiter: b',',
        }
    }
}

impl CsvSchema {
    pub fn validate(&self) -> Result<()> {
        let cols = [&self.case_column, &self.activity_column, &self.order_column];
        if cols.iter().any(|c| c.is_empty()) {
            return Err(Error::InvalidParameter("CSV column names must be non-empty".into()));
        }
        if cols[0] == cols[1] || cols[0] == cols[2] || cols[1] == cols[2] {
            return Err(Error::InvalidParameter("CSV column names must be distinct".into()));
        }
        Ok(())
    }
}

/// Parses a sort key: integer, float, RFC 3339 or `YYYY-MM-DD[ HH:MM:SS[.f]]`.
fn parse_order(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if let Ok(i) = s.parse::<i64>() {
        return Some(i as f64);
    }
    if let Ok(f) = s.parse::<f64>() {
        return f.is_finite().then_some(f);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_micros() as f64 / 1000.0);
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y/%m/%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp_micros() as f64 / 1000.0);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp_micros() as f64 / 1000.0);
    }
    None
}

/// Parses a flat event table into a log. Events are grouped by case (cases in
/// order of first appearance) and sorted by the order column; ties keep file
/// order.
pub fn parse_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<EventLog> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let case_idx = index_of(&schema.case_column)?;
    let act_idx = index_of(&schema.activity_column)?;
    let order_idx = index_of(&schema.order_column)?;
    let lc_idx = schema
        .lifecycle_column
        .as_deref()
        .map(index_of)
        .transpose()?;

    let mut cases: IndexMap<String, Vec<(f64, Activity)>> = IndexMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv {
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Csv {
                row,
                message: format!("missing field {i}"),
            })
        };
        let case = field(case_idx)?.to_string();
        let raw_order = field(order_idx)?;
        let key = parse_order(raw_order).ok_or_else(|| Error::Csv {
            row,
            message: format!("unparseable order value `{raw_order}`"),
        })?;
        let lifecycle = match lc_idx {
            Some(i) => Lifecycle::from_xes_value(field(i)?.trim()),
            None => Lifecycle::Atomic,
        };
        let activity = Activity::with_lifecycle(field(act_idx)?, lifecycle);
        activity.validate_event().map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        cases.entry(case).or_default().push((key, activity));
    }

    let mut log = EventLog::new();
    for (_, mut events) in cases {
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        log.add(events.into_iter().map(|(_, a)| a).collect::<Trace>(), 1);
    }
    Ok(log)
}

/// Writes one row per event with case ids `case_<n>` and the event position as
/// order value.
pub fn write_csv<W: Write>(log: &EventLog, schema: &CsvSchema, w: W) -> Result<()> {
    schema.validate()?;
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(schema.delimiter)
        .from_writer(w);
    let csv_err = |e: csv::Error| Error::Csv {
        row: 0,
        message: e.to_string(),
    };
    let mut header = vec![
        schema.case_column.as_str(),
        schema.activity_column.as_str(),
        schema.order_column.as_str(),
    ];
    if let Some(lc) = &schema.lifecycle_column {
        header.push(lc);
    }
    wtr.write_record(&header).map_err(csv_err)?;
    let mut case = 0usize;
    for (trace, m) in log.iter() {
        for _ in 0..m {
            case += 1;
            let case_id = format!("case_{case}");
            for (i, a) in trace.iter().enumerate() {
                let order = i.to_string();
                let mut row = vec![case_id.as_str(), a.name(), order.as_str()];
                match (&schema.lifecycle_column, a.lifecycle().xes_value()) {
                    (Some(_), lc) => row.push(lc.unwrap_or("")),
                    (None, Some(_)) => {
                        return Err(Error::InvalidParameter(
                            "log has lifecycle events but the schema has no lifecycle column"
                                .into(),
                        ))
                    }
                    (None, None) => {}
                }
                wtr.write_record(&row).map_err(csv_err)?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> CsvSchema {
        CsvSchema::default()
    }

    #[test]
    fn two_rows_one_case() {
        let data = "case,activity,order\n1,a,0\n1,b,1\n";
        let log = parse_csv(data.as_bytes(), &schema()).unwrap();
        assert_eq!(log, [Trace::from_names(&["a", "b"])].into_iter().collect());
    }

    #[test]
    fn sorts_by_timestamp() {
        let data = "case,activity,order\n\
                    1,b,2021-01-01T10:00:00Z\n\
                    2,x,2021-01-01 08:00:00\n\
                    1,a,2021-01-01T09:00:00Z\n";
        let log = parse_csv(data.as_bytes(), &schema()).unwrap();
        let traces: Vec<_> = log.iter().map(|(t, _)| t.clone()).collect();
        assert_eq!(traces, vec![Trace::from_names(&["a", "b"]), Trace::from_names(&["x"])]);
    }

    #[test]
    fn ties_keep_file_order() {
        let data = "case,activity,order\n1,b,5\n1,a,5\n1,c,1\n";
        let log = parse_csv(data.as_bytes(), &schema()).unwrap();
        assert_eq!(log.multiplicity(&Trace::from_names(&["c", "b", "a"])), 1);
    }

    #[test]
    fn missing_column_named() {
        let data = "case,act,order\n1,a,0\n";
        match parse_csv(data.as_bytes(), &schema()).unwrap_err() {
            Error::MissingColumn(c) => assert_eq!(c, "activity"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_order_reports_row() {
        let data = "case,activity,order\n1,a,0\n1,b,yesterday\n";
        match parse_csv(data.as_bytes(), &schema()).unwrap_err() {
            Error::Csv { row, .. } => assert_eq!(row, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn custom_delimiter_and_quoting() {
        let s = CsvSchema {
            case_column: "id".into(),
            activity_column: "task".into(),
            order_column: "ts".into(),
            lifecycle_column: None,
            delimiter: b';',
        };
        let data = "id;task;ts\n7;\"x;y\";1\n7;z;2\n";
        let log = parse_csv(data.as_bytes(), &s).unwrap();
        assert_eq!(log.multiplicity(&Trace::from_names(&["x;y", "z"])), 1);
    }

    #[test]
    fn schema_columns_must_be_distinct() {
        let mut s = schema();
        s.order_column = "case".into();
        assert!(s.validate().is_err());
    }

    #[test]
    fn lifecycle_column_round_trip() {
        let mut s = schema();
        s.lifecycle_column = Some("lifecycle".into());
        let trace = Trace::new(vec![
            Activity::with_lifecycle("A", Lifecycle::Start),
            Activity::new("d"),
            Activity::with_lifecycle("A", Lifecycle::Complete),
        ]);
        let log: EventLog = [(trace, 2)].into_iter().collect();
        let mut out = Vec::new();
        write_csv(&log, &s, &mut out).unwrap();
        assert_eq!(parse_csv(out.as_slice(), &s).unwrap(), log);
        assert!(write_csv(&log, &schema(), Vec::new()).is_err());
    }
}
