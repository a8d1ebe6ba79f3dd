//! Data files read and written by the `posterior` and `simulate` commands.
//!
//! All are CSV with optional `# key=value` metadata lines before the header.
//!
//! * counts: header `from,to,count`, sparse rows keyed by state label.
//! * prior: header `from,<label>...`, one dense row of concentrations per
//!   origin state.
//! * paths: header `replication,individual,states`; `states` holds the
//!   zero-based state index at each cycle separated by spaces. Metadata
//!   `states=` lists the labels and `schedule_matrices=` the schedule
//!   length of the generating model.

use std::collections::BTreeMap;

use cohort::bayes::{DirichletRows, PathSet, TransitionCounts};
use cohort::microsim::IndividualPath;

use crate::error::CliError;
use crate::output::CsvDoc;

pub const PATHS_SCHEMA: &str = "cohort-paths/1";

/// `# key=value` lines anywhere before the data.
pub fn metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect()
}

pub fn meta_states(text: &str) -> Option<Vec<String>> {
    metadata(text).get("states").map(|v| {
        v.split(',')
            .map(|s| s.trim().to_owned())
            .filter(|s| !s.is_empty())
            .collect()
    })
}

type Records = (Vec<String>, Vec<(usize, csv::StringRecord)>);

fn records(text: &str, what: &str) -> Result<Records, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = match reader.headers() {
        Ok(h) => h.iter().map(str::to_owned).collect(),
        Err(e) => return Err(CliError::Parse(format!("{what}: {e}"))),
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Parse(format!("{what}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec));
    }
    Ok((header, rows))
}

fn field<'r>(
    rec: &'r csv::StringRecord,
    i: usize,
    line: usize,
    what: &str,
) -> Result<&'r str, CliError> {
    rec.get(i)
        .ok_or_else(|| CliError::Parse(format!("{what} line {line}: missing column {}", i + 1)))
}

fn label_index(states: &[String], label: &str, line: usize, what: &str) -> Result<usize, CliError> {
    states
        .iter()
        .position(|s| s == label)
        .ok_or_else(|| CliError::Validation(format!("{what} line {line}: unknown state `{label}`")))
}

/// Sparse transition counts. An empty file yields all zeros.
pub fn read_counts(text: &str, states: &[String]) -> Result<TransitionCounts, CliError> {
    const WHAT: &str = "counts file";
    let mut counts = TransitionCounts::zeros(states.len());
    if text
        .lines()
        .all(|l| l.trim().is_empty() || l.trim().starts_with('#'))
    {
        return Ok(counts);
    }
    let (header, rows) = records(text, WHAT)?;
    if header != ["from", "to", "count"] {
        return Err(CliError::Parse(format!(
            "{WHAT}: expected header `from,to,count`, found `{}`",
            header.join(",")
        )));
    }
    for (line, rec) in rows {
        let from = label_index(states, field(&rec, 0, line, WHAT)?, line, WHAT)?;
        let to = label_index(states, field(&rec, 1, line, WHAT)?, line, WHAT)?;
        let raw = field(&rec, 2, line, WHAT)?;
        let n: u64 = raw.parse().map_err(|_| {
            CliError::Parse(format!(
                "{WHAT} line {line}: count `{raw}` is not a whole number"
            ))
        })?;
        counts.add(from, to, n);
    }
    Ok(counts)
}

/// Dense prior: returns the state labels from the header and the rows.
pub fn read_prior(text: &str) -> Result<(Vec<String>, DirichletRows), CliError> {
    const WHAT: &str = "prior file";
    let (header, rows) = records(text, WHAT)?;
    if header.first().map(String::as_str) != Some("from") || header.len() < 2 {
        return Err(CliError::Parse(format!(
            "{WHAT}: header must be `from,<state>,...`"
        )));
    }
    let states: Vec<String> = header[1..].to_vec();
    let s = states.len();
    let mut dense = vec![None; s];
    for (line, rec) in rows {
        let from = label_index(&states, field(&rec, 0, line, WHAT)?, line, WHAT)?;
        if rec.len() != s + 1 {
            return Err(CliError::DimensionMismatch(format!(
                "{WHAT} line {line}: {} concentrations for {s} states",
                rec.len().saturating_sub(1)
            )));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    CliError::Parse(format!("{WHAT} line {line}: `{v}` is not a number"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        dense[from] = Some(row);
    }
    let rows = dense
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            r.ok_or_else(|| {
                CliError::Validation(format!("{WHAT}: no row for state `{}`", states[k]))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let prior =
        DirichletRows::new(&rows).map_err(|e| CliError::Validation(format!("{WHAT}: {e}")))?;
    Ok((states, prior))
}

pub fn write_paths(
    states: &[String],
    schedule_len: usize,
    runs: &[Vec<IndividualPath>],
) -> Vec<u8> {
    let meta = [
        ("states", states.join(",")),
        ("schedule_matrices", schedule_len.to_string()),
    ];
    let mut doc = CsvDoc::new(
        PATHS_SCHEMA,
        &meta,
        &["replication", "individual", "states"],
    );
    for (rep, paths) in runs.iter().enumerate() {
        for (id, path) in paths.iter().enumerate() {
            let seq: Vec<String> = path.states.iter().map(u32::to_string).collect();
            doc.row([rep.to_string(), id.to_string(), seq.join(" ")]);
        }
    }
    doc.finish()
}

/// Reads a paths file; its `states=` metadata is required.
pub fn read_paths(text: &str) -> Result<(Vec<String>, PathSet), CliError> {
    const WHAT: &str = "paths file";
    let meta = metadata(text);
    let states = meta_states(text)
        .ok_or_else(|| CliError::Parse(format!("{WHAT}: missing `# states=` metadata")))?;
    let schedule_len = match meta.get("schedule_matrices") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Parse(format!("{WHAT}: bad schedule_matrices `{v}`")))?,
        None => 1,
    };
    let (header, rows) = records(text, WHAT)?;
    if header != ["replication", "individual", "states"] {
        return Err(CliError::Parse(format!(
            "{WHAT}: expected header `replication,individual,states`"
        )));
    }
    let mut paths = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let seq = field(&rec, 2, line, WHAT)?;
        let states = seq
            .split_whitespace()
            .map(|t| {
                t.parse::<u32>().map_err(|_| {
                    CliError::Parse(format!("{WHAT} line {line}: `{t}` is not a state index"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        paths.push(IndividualPath { states });
    }
    let set = PathSet {
        num_states: states.len(),
        schedule_len,
        paths,
    };
    Ok((states, set))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<String> {
        ["S1", "S2", "S3", "S4"].map(String::from).to_vec()
    }

    #[test]
    fn counts_parse() {
        let text = "# states=S1,S2,S3,S4\nfrom,to,count\nS1,S1,7\nS1,S2,1\nS1,S4,2\n";
        let c = read_counts(text, &labels()).unwrap();
        assert_eq!(c.row(0), &[7, 1, 0, 2]);
        assert_eq!(meta_states(text).unwrap(), labels());
        assert_eq!(read_counts("", &labels()).unwrap().total(), 0);
        assert!(matches!(
            read_counts("from,to,count\nS1,S9,1\n", &labels()),
            Err(CliError::Validation(_))
        ));
        assert!(matches!(
            read_counts("from,to,count\nS1,S2,x\n", &labels()),
            Err(CliError::Parse(_))
        ));
    }

    #[test]
    fn prior_parse() {
        let text = "from,A,B\nA,1,2\nB,0.5,0.5\n";
        let (states, prior) = read_prior(text).unwrap();
        assert_eq!(states, ["A", "B"]);
        assert_eq!(prior.row(0), &[1.0, 2.0]);
        assert!(matches!(
            read_prior("from,A,B\nA,1,2\n"),
            Err(CliError::Validation(_))
        ));
        assert!(matches!(
            read_prior("from,A,B\nA,1,2,3\nB,1,1\n"),
            Err(CliError::DimensionMismatch(_))
        ));
        assert!(matches!(
            read_prior("from,A,B\nA,1,0\nB,1,1\n"),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn paths_round_trip() {
        let runs = vec![vec![
            IndividualPath {
                states: vec![0, 0, 1, 3],
            },
            IndividualPath {
                states: vec![0, 2, 3, 3],
            },
        ]];
        let bytes = write_paths(&labels(), 1, &runs);
        let (states, set) = read_paths(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(states, labels());
        assert_eq!(set.paths, runs[0]);
        assert_eq!(set.schedule_len, 1);
    }
}
