//! Long-format CSV: `cluster_id,gap_index,gap_time,status`, one row per gap,
//! status 1 for an observed event and 0 for a censored last gap.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{Cluster, GapDataset};
use crate::dvine::Status;
use crate::error::{Error, Result};

const HEADER: [&str; 4] = ["cluster_id", "gap_index", "gap_time", "status"];

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { line: line as usize, msg: msg.into() }
}

pub fn read_long_csv_path(path: impl AsRef<Path>) -> Result<GapDataset> {
    read_long_csv(File::open(path)?)
}

pub fn read_long_csv<R: Read>(input: R) -> Result<GapDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_err(1, format!("expected header '{}'", HEADER.join(","))));
    }
    struct Partial {
        first_line: u64,
        rows: Vec<(usize, f64, bool, u64)>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Partial> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(parse_err(line, "empty cluster_id"));
        }
        let index: usize = rec[1]
            .parse()
            .ok()
            .filter(|&i| i >= 1)
            .ok_or_else(|| parse_err(line, format!("gap_index '{}' is not a positive integer", &rec[1])))?;
        let time: f64 =
            rec[2].parse().map_err(|_| parse_err(line, format!("gap_time '{}' is not a number", &rec[2])))?;
        if !(time > 0.0 && time.is_finite()) {
            return Err(parse_err(line, format!("gap_time {time} must be positive")));
        }
        let event = match &rec[3] {
            "1" => true,
            "0" => false,
            s => return Err(parse_err(line, format!("status '{s}' must be 1 (event) or 0 (censored)"))),
        };
        let entry = by_id.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Partial { first_line: line, rows: Vec::new() }
        });
        if let Some(&(_, _, _, prev)) = entry.rows.iter().find(|r| r.0 == index) {
            return Err(parse_err(
                line,
                format!("duplicate gap_index {index} for cluster '{id}' (first on line {prev})"),
            ));
        }
        entry.rows.push((index, time, event, line));
    }
    let mut clusters = Vec::with_capacity(order.len());
    for id in order {
        let mut p = by_id.remove(&id).expect("recorded id");
        p.rows.sort_by_key(|r| r.0);
        let size = p.rows.len();
        for (expect, row) in (1..).zip(&p.rows) {
            if row.0 != expect {
                return Err(parse_err(
                    row.3,
                    format!("cluster '{id}' gap indices are not contiguous from 1 (missing {expect})"),
                ));
            }
            if !row.2 && row.0 != size {
                return Err(parse_err(
                    row.3,
                    format!("cluster '{id}' is censored at gap {} but has later gaps", row.0),
                ));
            }
        }
        let gaps = p.rows.iter().map(|r| r.1).collect();
        let status = Status::from_indicator(p.rows[size - 1].2);
        clusters.push(Cluster::new(id, gaps, status).map_err(|e| parse_err(p.first_line, e.to_string()))?);
    }
    if clusters.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    GapDataset::new(clusters)
}

pub fn write_long_csv<W: Write>(data: &GapDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for c in data.clusters() {
        for (j, g) in c.gaps.iter().enumerate() {
            let status = if j + 1 == c.size() && c.is_censored() { "0" } else { "1" };
            w.write_record([c.id.as_str(), &(j + 1).to_string(), &format!("{g}"), status])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_long_csv_path(data: &GapDataset, path: impl AsRef<Path>) -> Result<()> {
    write_long_csv(data, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<GapDataset> {
        read_long_csv(s.as_bytes())
    }

    #[test]
    fn orders_by_size() {
        let d = parse(
            "cluster_id,gap_index,gap_time,status\n\
             a,1,0.5,1\na,2,1.5,0\nb,1,1,1\nb,2,2,1\nb,3,0.25,1\n",
        )
        .unwrap();
        assert_eq!(d.clusters()[0].id, "b");
        assert_eq!(d.clusters()[1].status, Status::Censored);
        assert_eq!(d.size_counts(), vec![0, 1, 1]);
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        let h = "cluster_id,gap_index,gap_time,status\n";
        let cases = [
            (format!("{h}a,1,1.0,0\na,2,1.0,1\n"), 2, "censored at gap 1"),
            (format!("{h}a,1,1.0,1\na,3,1.0,1\n"), 3, "not contiguous"),
            (format!("{h}a,1,1.0,1\na,1,2.0,1\n"), 3, "duplicate"),
            (format!("{h}a,1,-1.0,1\n"), 2, "positive"),
            (format!("{h}a,1,1.0,2\n"), 2, "status"),
            (format!("{h}a,x,1.0,1\n"), 2, "gap_index"),
        ];
        for (text, line, needle) in cases {
            match parse(&text) {
                Err(Error::Parse { line: l, msg }) => {
                    assert_eq!(l, line, "{msg}");
                    assert!(msg.contains(needle), "{msg}");
                }
                other => panic!("expected parse error, got {other:?}"),
            }
        }
        assert!(parse("id,idx,t,s\na,1,1,1\n").is_err());
        assert!(parse("cluster_id,gap_index,gap_time,status\n").is_err());
    }

    #[test]
    fn round_trip() {
        let text = "cluster_id,gap_index,gap_time,status\n\
                    b,1,1.0000000000000002,1\nb,2,0.1,1\nb,3,3.5e-7,0\na,1,2.25,0\n";
        let d = parse(text).unwrap();
        let mut buf = Vec::new();
        write_long_csv(&d, &mut buf).unwrap();
        let again = read_long_csv(buf.as_slice()).unwrap();
        assert_eq!(d, again);
    }
}
