//! Declarative text format for cohort models.
//!
//! ```text
//! # four-state progressive model
//! states: S1 S2 S3 S4
//! initial: S1=10000
//! horizon: 50
//! cycle_length: 1
//! seed: 20240601
//!
//! S1 -> S2: 0.1
//! S1 -> S3: 0.05
//! Pr[S1 -> S4] = 0.14
//! ```
//!
//! Only off-diagonal probabilities need to be listed; each diagonal is the
//! row residual. A self-transition record (`S1 -> S1: 0.7`) makes that row
//! explicit instead. Time-varying models list one dense block per cycle,
//! in order, with `*` marking an implied diagonal:
//!
//! ```text
//! matrix
//!   *  0.2
//!   0  *
//! end
//! ```
//!
//! Keys: `states` (required), `initial` (required; `label=count` pairs,
//! unlisted states start empty), `n0` (optional check on the initial total),
//! `horizon` (required), `cycle_length` (default 1), `seed` (optional),
//! `hold_last` (default true; reuse the last matrix past the end of the
//! schedule). `#` starts a comment.

use std::fmt::Write as _;

use thiserror::Error;

use crate::cohort::CohortSpec;
use crate::schedule::{validate_schedule_with, RawEntry, RowRepair, ScheduleOptions};
use crate::state::StateSpace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelFileError {
    /// Text that does not follow the grammar.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    /// Well-formed text describing an invalid model.
    #[error("{0}")]
    Validation(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> ModelFileError {
    ModelFileError::Parse {
        line,
        message: message.into(),
    }
}

/// One `from -> to: probability` record.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub line: usize,
    pub from: String,
    pub to: String,
    pub probability: f64,
}

/// A model file as written, before validation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelFile {
    pub states: Vec<String>,
    pub transitions: Vec<TransitionRecord>,
    pub matrices: Vec<Vec<Vec<RawEntry>>>,
    /// `(label, count, line)`.
    pub initial: Vec<(String, u64, usize)>,
    pub n0: Option<u64>,
    pub horizon: Option<usize>,
    pub cycle_length: Option<f64>,
    pub seed: Option<u64>,
    pub hold_last: Option<bool>,
}

/// A validated model plus the run defaults stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: CohortSpec,
    pub seed: Option<u64>,
}

/// Overrides applied while turning a [`ModelFile`] into a [`Model`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub renormalize_rows: bool,
    pub hold_last: Option<bool>,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, ModelFileError> {
        let mut file = ModelFile::default();
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, strip_comment(l)));
        while let Some((line, content)) = lines.next() {
            if content.is_empty() {
                continue;
            }
            if content == "matrix" {
                file.matrices.push(parse_block(line, &mut lines)?);
            } else if content.contains("->") {
                file.transitions.push(parse_transition(line, content)?);
            } else {
                file.parse_key(line, content)?;
            }
        }
        if file.states.is_empty() {
            return Err(parse_err(0, "missing `states`"));
        }
        Ok(file)
    }

    fn parse_key(&mut self, line: usize, content: &str) -> Result<(), ModelFileError> {
        let (key, value) = split_key(content)
            .ok_or_else(|| parse_err(line, format!("expected `key: value`, found `{content}`")))?;
        match key {
            "states" => {
                if !self.states.is_empty() {
                    return Err(parse_err(line, "`states` given twice"));
                }
                self.states = tokens(value).map(str::to_owned).collect();
                if self.states.is_empty() {
                    return Err(parse_err(line, "`states` lists no labels"));
                }
            }
            "initial" => {
                for item in tokens(value) {
                    let (label, count) = item.split_once('=').ok_or_else(|| {
                        parse_err(line, format!("initial entry `{item}` is not `label=count`"))
                    })?;
                    let count = count.trim().parse::<u64>().map_err(|_| {
                        parse_err(
                            line,
                            format!("initial count `{count}` is not a whole number"),
                        )
                    })?;
                    self.initial.push((label.trim().to_owned(), count, line));
                }
            }
            "n0" => self.n0 = Some(parse_number(line, key, value)?),
            "horizon" => self.horizon = Some(parse_number(line, key, value)?),
            "seed" => self.seed = Some(parse_number(line, key, value)?),
            "cycle_length" => {
                let v: f64 = parse_number(line, key, value)?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(parse_err(line, "cycle_length must be positive"));
                }
                self.cycle_length = Some(v);
            }
            "hold_last" => {
                self.hold_last = Some(match value {
                    "true" | "yes" => true,
                    "false" | "no" => false,
                    other => {
                        return Err(parse_err(
                            line,
                            format!("hold_last `{other}` is not a boolean"),
                        ))
                    }
                })
            }
            other => return Err(parse_err(line, format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Validates the file into a runnable model.
    pub fn into_model(self, opts: LoadOptions) -> Result<(Model, Vec<RowRepair>), ModelFileError> {
        let invalid = |m: String| ModelFileError::Validation(m);
        let space = StateSpace::new(self.states.clone()).map_err(|e| invalid(e.to_string()))?;
        let s = space.len();
        let index = |label: &str, what: &str, line: usize| {
            space
                .index_of(label)
                .ok_or_else(|| parse_err(line, format!("{what} refers to unknown state `{label}`")))
        };

        let mut counts = vec![0u64; s];
        let mut seen = vec![false; s];
        for (label, count, line) in &self.initial {
            let k = index(label, "initial", *line)?;
            if seen[k] {
                return Err(invalid(format!("initial count for `{label}` given twice")));
            }
            seen[k] = true;
            counts[k] = *count;
        }
        let n0: u64 = counts.iter().sum();
        if n0 == 0 {
            return Err(invalid("initial counts are missing or all zero".into()));
        }
        if let Some(declared) = self.n0 {
            if declared != n0 {
                return Err(invalid(format!(
                    "n0 = {declared} but initial counts sum to {n0}"
                )));
            }
        }
        let horizon = self
            .horizon
            .ok_or_else(|| invalid("missing `horizon`".into()))?;

        let raw = match (self.transitions.is_empty(), self.matrices.is_empty()) {
            (false, false) => {
                return Err(invalid(
                    "use either transition records or matrix blocks, not both".into(),
                ))
            }
            (true, false) => self.matrices.clone(),
            (_, true) => vec![self.sparse_matrix(&space)?],
        };
        let hold_last = opts.hold_last.or(self.hold_last).unwrap_or(true);
        let schedule_opts = ScheduleOptions {
            hold_last,
            renormalize_rows: opts.renormalize_rows,
        };
        let (schedule, repairs) = validate_schedule_with(&raw, s, schedule_opts).map_err(|e| {
            invalid(match &e {
                crate::ModelError::NegativeResidual { row, .. }
                | crate::ModelError::NotStochastic { row, .. } => {
                    format!("state `{}`: {e}", space.labels()[*row])
                }
                _ => e.to_string(),
            })
        })?;
        let cycle_length = self.cycle_length.unwrap_or(1.0);
        let spec = CohortSpec::new(space, schedule, counts, horizon, cycle_length)
            .map_err(|e| invalid(e.to_string()))?;
        Ok((
            Model {
                spec,
                seed: self.seed,
            },
            repairs,
        ))
    }

    fn sparse_matrix(&self, space: &StateSpace) -> Result<Vec<Vec<RawEntry>>, ModelFileError> {
        let s = space.len();
        let mut raw = vec![vec![RawEntry::Given(0.0); s]; s];
        for (i, row) in raw.iter_mut().enumerate() {
            row[i] = RawEntry::Implied;
        }
        let mut given = vec![vec![false; s]; s];
        for rec in &self.transitions {
            let describe = || format!("line {}: transition {} -> {}", rec.line, rec.from, rec.to);
            let from = space
                .index_of(&rec.from)
                .ok_or_else(|| parse_err(rec.line, format!("unknown state `{}`", rec.from)))?;
            let to = space
                .index_of(&rec.to)
                .ok_or_else(|| parse_err(rec.line, format!("unknown state `{}`", rec.to)))?;
            if !(0.0..=1.0).contains(&rec.probability) {
                return Err(ModelFileError::Validation(format!(
                    "{}: probability {} is outside [0, 1]",
                    describe(),
                    rec.probability
                )));
            }
            if given[from][to] {
                return Err(ModelFileError::Validation(format!(
                    "{}: duplicate record",
                    describe()
                )));
            }
            given[from][to] = true;
            raw[from][to] = RawEntry::Given(rec.probability);
        }
        Ok(raw)
    }
}

impl Model {
    pub fn parse(text: &str, opts: LoadOptions) -> Result<(Self, Vec<RowRepair>), ModelFileError> {
        ModelFile::parse(text)?.into_model(opts)
    }

    /// Renders the model so that [`Model::parse`] rebuilds it exactly.
    pub fn to_text(&self) -> String {
        let spec = &self.spec;
        let labels = spec.state_space().labels();
        let mut out = String::new();
        writeln!(out, "states: {}", labels.join(" ")).unwrap();
        let initial: Vec<String> = spec
            .initial_counts()
            .iter()
            .zip(labels)
            .filter(|(&c, _)| c > 0)
            .map(|(c, l)| format!("{l}={c}"))
            .collect();
        writeln!(out, "initial: {}", initial.join(" ")).unwrap();
        writeln!(out, "n0: {}", spec.n0()).unwrap();
        writeln!(out, "horizon: {}", spec.horizon()).unwrap();
        writeln!(out, "cycle_length: {}", spec.cycle_length()).unwrap();
        if let Some(seed) = self.seed {
            writeln!(out, "seed: {seed}").unwrap();
        }
        writeln!(out, "hold_last: {}", spec.schedule().hold_last()).unwrap();
        out.push('\n');

        let matrices = spec.schedule().matrices();
        if let [matrix] = matrices {
            for (k, row) in matrix.rows().enumerate() {
                let off: f64 = row
                    .iter()
                    .enumerate()
                    .filter(|&(l, _)| l != k)
                    .map(|(_, &p)| p)
                    .sum();
                // Same arithmetic as diagonal completion on re-parse.
                let residual_matches = (1.0 - off).max(0.0) == row[k];
                for (l, &p) in row.iter().enumerate() {
                    if (l == k && !residual_matches) || (l != k && p != 0.0) {
                        writeln!(out, "{} -> {}: {p}", labels[k], labels[l]).unwrap();
                    }
                }
            }
        } else {
            for matrix in matrices {
                out.push_str("matrix\n");
                for row in matrix.rows() {
                    let cells: Vec<String> = row.iter().map(|p| p.to_string()).collect();
                    writeln!(out, "  {}", cells.join(" ")).unwrap();
                }
                out.push_str("end\n");
            }
        }
        out
    }
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn tokens(value: &str) -> impl Iterator<Item = &str> {
    value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
}

fn split_key(content: &str) -> Option<(&str, &str)> {
    let pos = content.find([':', '='])?;
    Some((content[..pos].trim(), content[pos + 1..].trim()))
}

fn parse_number<T: std::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<T, ModelFileError> {
    value.parse().map_err(|_| {
        parse_err(
            line,
            format!("`{key}` value `{value}` is not a valid number"),
        )
    })
}

fn parse_probability(line: usize, text: &str) -> Result<f64, ModelFileError> {
    let v: f64 = text
        .parse()
        .map_err(|_| parse_err(line, format!("`{text}` is not a decimal number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("`{text}` is not a finite number")));
    }
    Ok(v)
}

fn parse_transition(line: usize, content: &str) -> Result<TransitionRecord, ModelFileError> {
    // `A -> B: p`, `A -> B = p` or `Pr[A -> B] = p`.
    let pos = content
        .rfind([':', '='])
        .ok_or_else(|| parse_err(line, "transition record has no probability"))?;
    let (lhs, rhs) = (content[..pos].trim(), content[pos + 1..].trim());
    let lhs = lhs
        .strip_prefix("Pr[")
        .and_then(|l| l.strip_suffix(']'))
        .unwrap_or(lhs);
    let (from, to) = lhs
        .split_once("->")
        .ok_or_else(|| parse_err(line, "transition record needs `from -> to`"))?;
    let (from, to) = (from.trim(), to.trim());
    if from.is_empty() || to.is_empty() {
        return Err(parse_err(line, "transition record has an empty state name"));
    }
    Ok(TransitionRecord {
        line,
        from: from.to_owned(),
        to: to.to_owned(),
        probability: parse_probability(line, rhs)?,
    })
}

fn parse_block<'a>(
    start: usize,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<Vec<RawEntry>>, ModelFileError> {
    let mut rows = Vec::new();
    for (line, content) in lines.by_ref() {
        if content.is_empty() {
            continue;
        }
        if content == "end" {
            if rows.is_empty() {
                return Err(parse_err(start, "empty matrix block"));
            }
            return Ok(rows);
        }
        let row = tokens(content)
            .map(|t| match t {
                "*" => Ok(RawEntry::Implied),
                _ => parse_probability(line, t).map(RawEntry::Given),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Err(parse_err(start, "matrix block is missing `end`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROGRESSIVE: &str = "\
# four states, S4 absorbing
states: S1 S2 S3 S4
initial: S1=10000
n0: 10000
horizon: 50
cycle_length: 1
seed: 7

S1 -> S2: 0.1
S1 -> S3: 0.05
S1 -> S4: 0.14
S2 -> S3: 0.07
Pr[S2 -> S4] = 0.17
S3 -> S4: 0.11
";

    fn load(text: &str) -> Result<Model, ModelFileError> {
        Model::parse(text, LoadOptions::default()).map(|(m, _)| m)
    }

    #[test]
    fn parses_progressive_model() {
        let model = load(PROGRESSIVE).unwrap();
        assert_eq!(model.spec, crate::reference::progressive_cohort(10_000, 50));
        assert_eq!(model.seed, Some(7));
    }

    #[test]
    fn round_trips() {
        let model = load(PROGRESSIVE).unwrap();
        assert_eq!(load(&model.to_text()).unwrap(), model);
    }

    #[test]
    fn out_of_range_probability_names_record() {
        let text = PROGRESSIVE.replace("S1 -> S3: 0.05", "S1 -> S3: 1.2");
        match load(&text) {
            Err(ModelFileError::Validation(msg)) => {
                assert!(msg.contains("line 10") && msg.contains("S1 -> S3"), "{msg}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors() {
        let text = PROGRESSIVE.replace("0.05", "0.o5");
        assert!(matches!(
            load(&text),
            Err(ModelFileError::Parse { line: 10, .. })
        ));
        let text = PROGRESSIVE.replace("S1 -> S3", "S1 -> S9");
        assert!(matches!(
            load(&text),
            Err(ModelFileError::Parse { line: 10, .. })
        ));
        assert!(matches!(
            load("horizon: 3\n"),
            Err(ModelFileError::Parse { .. })
        ));
        assert!(matches!(
            load("states: A B\nmatrix\n* 0\n"),
            Err(ModelFileError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            load("states: A B\nflavour: 3\n"),
            Err(ModelFileError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn validation_errors() {
        let text = PROGRESSIVE.replace("n0: 10000", "n0: 9999");
        assert!(matches!(load(&text), Err(ModelFileError::Validation(_))));
        let text = PROGRESSIVE.replace("S1 -> S4: 0.14", "S1 -> S4: 0.9");
        match load(&text) {
            Err(ModelFileError::Validation(msg)) => assert!(msg.contains("S1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let text = format!("{PROGRESSIVE}S1 -> S2: 0.1\n");
        assert!(matches!(load(&text), Err(ModelFileError::Validation(_))));
    }

    #[test]
    fn time_varying_blocks() {
        let text = "\
states: A B
initial: A=10 B=5
horizon: 2
hold_last: false
matrix
  *   0.2
  0.1 *
end
matrix
  1 0
  0 1
end
";
        let model = load(text).unwrap();
        let schedule = model.spec.schedule();
        assert_eq!(schedule.len(), 2);
        assert!(!schedule.hold_last());
        assert_eq!(schedule.matrices()[0].row(0), &[0.8, 0.2]);
        assert_eq!(load(&model.to_text()).unwrap(), model);

        let too_long = text.replace("horizon: 2", "horizon: 3");
        assert!(matches!(
            load(&too_long),
            Err(ModelFileError::Validation(_))
        ));
        let opts = LoadOptions {
            hold_last: Some(true),
            ..Default::default()
        };
        assert!(Model::parse(&too_long, opts).is_ok());
    }

    #[test]
    fn renormalize_option() {
        let text = "states: A B\ninitial: A=1\nhorizon: 1\nmatrix\n0.5 0.4\n0 1\nend\n";
        assert!(load(text).is_err());
        let opts = LoadOptions {
            renormalize_rows: true,
            ..Default::default()
        };
        let (_, repairs) = Model::parse(text, opts).unwrap();
        assert_eq!(repairs.len(), 1);
    }
}
