use std::io::{Read, Write};

use thiserror::Error;

use super::{SurveyPanel, WorkerRecord};

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("column `{name}` declared as `{found}`, expected `{expected}`")]
    ColumnType {
        name: String,
        found: String,
        expected: &'static str,
    },
    #[error("row {row}, column `{column}`: {reason}")]
    Field {
        row: usize,
        column: &'static str,
        reason: String,
    },
    #[error("row {row}: {reason}")]
    Record { row: usize, reason: String },
}

/// Column names and declared types, in file order.
pub const COLUMNS: [(&str, &str); 19] = [
    ("worker_id", "u64"),
    ("country_id", "u32"),
    ("household_id", "u64"),
    ("survey_wave", "u8"),
    ("event_month", "i32"),
    ("household_weight", "f64"),
    ("employed", "u8"),
    ("formal", "u8"),
    ("informal", "u8"),
    ("ltc_conditional", "u8?"),
    ("tenure_months", "u8"),
    ("nonemp_spell_years", "f64"),
    ("monthly_wage", "f64"),
    ("urban", "u8"),
    ("age", "u8"),
    ("female", "u8"),
    ("education", "u8"),
    ("household_size", "u8"),
    ("married", "u8"),
];

pub fn header() -> Vec<String> {
    COLUMNS.iter().map(|(n, t)| format!("{n}:{t}")).collect()
}

fn fields(r: &WorkerRecord) -> [String; 19] {
    [
        r.worker_id.to_string(),
        r.country_id.to_string(),
        r.household_id.to_string(),
        r.survey_wave.to_string(),
        r.event_month.to_string(),
        r.household_weight.to_string(),
        r.employed.to_string(),
        r.formal.to_string(),
        r.informal.to_string(),
        r.ltc_conditional.map(|v| v.to_string()).unwrap_or_default(),
        r.tenure_months.to_string(),
        r.nonemp_spell_years.to_string(),
        r.monthly_wage.to_string(),
        r.urban.to_string(),
        r.age.to_string(),
        r.female.to_string(),
        r.education.to_string(),
        r.household_size.to_string(),
        r.married.to_string(),
    ]
}

/// Writes the panel as comma-separated text with a typed header row.
pub fn write_panel<W: Write>(panel: &SurveyPanel, out: W) -> Result<(), PanelError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header())?;
    for r in &panel.records {
        w.write_record(fields(r))?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(raw: &str, row: usize, column: &'static str) -> Result<T, PanelError>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse::<T>().map_err(|e| PanelError::Field {
        row,
        column,
        reason: format!("{e} (value {raw:?})"),
    })
}

/// Reads a panel written by [`write_panel`]. Columns are located by name, so
/// their order may differ; every column must be present with its declared type.
pub fn read_panel<R: Read>(input: R) -> Result<Vec<WorkerRecord>, PanelError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let hdr = rdr.headers()?.clone();
    let mut pos = [0usize; 19];
    for (k, (name, ty)) in COLUMNS.iter().enumerate() {
        let found = hdr.iter().enumerate().find_map(|(i, h)| {
            let (n, t) = h.split_once(':').unwrap_or((h, ""));
            (n.trim() == *name).then(|| (i, t.trim().to_string()))
        });
        match found {
            None => return Err(PanelError::MissingColumn(name.to_string())),
            Some((i, t)) => {
                if !t.is_empty() && t != *ty {
                    return Err(PanelError::ColumnType {
                        name: name.to_string(),
                        found: t,
                        expected: ty,
                    });
                }
                pos[k] = i;
            }
        }
    }
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // 1-based data rows, header is row 0
        let row = idx + 1;
        let get = |k: usize| rec.get(pos[k]).unwrap_or("");
        let ltc_raw = get(9);
        let r = WorkerRecord {
            worker_id: parse(get(0), row, COLUMNS[0].0)?,
            country_id: parse(get(1), row, COLUMNS[1].0)?,
            household_id: parse(get(2), row, COLUMNS[2].0)?,
            survey_wave: parse(get(3), row, COLUMNS[3].0)?,
            event_month: parse(get(4), row, COLUMNS[4].0)?,
            household_weight: parse(get(5), row, COLUMNS[5].0)?,
            employed: parse(get(6), row, COLUMNS[6].0)?,
            formal: parse(get(7), row, COLUMNS[7].0)?,
            informal: parse(get(8), row, COLUMNS[8].0)?,
            ltc_conditional: if ltc_raw.trim().is_empty() {
                None
            } else {
                Some(parse(ltc_raw, row, COLUMNS[9].0)?)
            },
            tenure_months: parse(get(10), row, COLUMNS[10].0)?,
            nonemp_spell_years: parse(get(11), row, COLUMNS[11].0)?,
            monthly_wage: parse(get(12), row, COLUMNS[12].0)?,
            urban: parse(get(13), row, COLUMNS[13].0)?,
            age: parse(get(14), row, COLUMNS[14].0)?,
            female: parse(get(15), row, COLUMNS[15].0)?,
            education: parse(get(16), row, COLUMNS[16].0)?,
            household_size: parse(get(17), row, COLUMNS[17].0)?,
            married: parse(get(18), row, COLUMNS[18].0)?,
        };
        r.check().map_err(|reason| PanelError::Record { row, reason })?;
        out.push(r);
    }
    Ok(out)
}
