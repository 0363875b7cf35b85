//! CSV and JSON emitters and the loaders that read them back.
//!
//! CSV output is locale independent: dot decimal separator, `\n` line ends,
//! shortest round-trip float formatting.

use std::io::{Read, Write};
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result, SchemaError};
use crate::fleet::DemandBreakdown;
use crate::gap::{GapReport, SweepResult};
use crate::series::{fmt_f64, AnnualSeries, Unit};
use crate::supply::{Sector, SupplyProjection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::param("format", format!("unknown format `{other}`"))),
        }
    }
}

/// Column-oriented table of years and named numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub key: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl Table {
    fn by_year(columns: &[&str], series: &[&AnnualSeries]) -> Table {
        let first = series[0];
        let rows = first
            .years()
            .map(|y| {
                let vals = series.iter().map(|s| s.at(y).unwrap_or(f64::NAN)).collect();
                (y.to_string(), vals)
            })
            .collect();
        Table {
            key: "year".into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec![self.key.clone()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (k, vals) in &self.rows {
            let mut rec = vec![k.clone()];
            rec.extend(vals.iter().map(|&v| fmt_f64(v)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("UTF-8")
    }

    /// Array of row objects keyed by column name.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|(k, vals)| {
                    let mut m = serde_json::Map::new();
                    let key = k.parse::<i64>().map(Value::from).unwrap_or_else(|_| Value::from(k.clone()));
                    m.insert(self.key.clone(), key);
                    for (c, v) in self.columns.iter().zip(vals) {
                        m.insert(c.clone(), json!(v));
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv_string(),
            Format::Json => format!("{}\n", serde_json::to_string_pretty(&self.to_json()).expect("JSON")),
        }
    }
}

pub const DEMAND_COLUMNS: [&str; 6] = [
    "m_cap",
    "m_eol",
    "m_recycling",
    "m_total",
    "surplus_recycled",
    "operating_capacity_gw",
];

pub fn demand_table(d: &DemandBreakdown) -> Table {
    Table::by_year(
        &DEMAND_COLUMNS,
        &[
            &d.m_cap,
            &d.m_eol,
            &d.m_recycling,
            &d.m_total,
            &d.surplus_recycled,
            &d.operating_capacity,
        ],
    )
}

pub const SUPPLY_COLUMNS: [&str; 7] = [
    "primary_t",
    "electrical_t",
    "electrochemical_t",
    "chemical_t",
    "other_t",
    "available_pemel_t",
    "price_forecast",
];

pub fn supply_table(p: &SupplyProjection) -> Table {
    let f = |s: Sector| &p.sector_forecasts[&s];
    Table::by_year(
        &SUPPLY_COLUMNS,
        &[
            &p.primary,
            f(Sector::Electrical),
            f(Sector::Electrochemical),
            f(Sector::Chemical),
            f(Sector::Other),
            &p.available_for_pemel,
            &p.price_forecast,
        ],
    )
}

pub fn stockpile_table(r: &GapReport) -> Table {
    Table::by_year(&["gap_t", "stockpile_t"], &[&r.gap, &r.stockpile])
}

/// Demand, supply, gap and stockpile side by side.
pub fn gap_panel_table(demand: &AnnualSeries, supply: &AnnualSeries, r: &GapReport) -> Table {
    let d = demand.slice(r.gap.start_year(), r.gap.end_year()).expect("gap range within demand");
    let s = supply.slice(r.gap.start_year(), r.gap.end_year()).expect("gap range within supply");
    Table::by_year(&["demand_t", "supply_t", "gap_t", "stockpile_t"], &[&d, &s, &r.gap, &r.stockpile])
}

pub fn gap_report_json(r: &GapReport) -> Value {
    json!({
        "segments": r.segments,
        "total_shortfall_t": r.total_shortfall,
        "total_surplus_t": r.total_surplus,
        "net_shortfall_t": r.net_shortfall(),
        "initial_stock_t": r.initial_stock,
        "final_stockpile_t": r.stockpile.last(),
        "min_stockpile_t": r.min_stockpile(),
        "feasible": r.feasible,
        "shortfall_years": r.shortfall_years,
        "required_supply_increase_pct": r.required_supply_increase_pct,
        "required_supply_increase_gross_pct": r.required_supply_increase_gross_pct,
    })
}

/// One row per swept value: cumulative demand and minimizer flag.
pub fn sweep_summary_table(r: &SweepResult) -> Table {
    let rows = r
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            (
                l.clone(),
                vec![r.values[i], r.cumulative_demand[i], if i == r.minimizer { 1.0 } else { 0.0 }],
            )
        })
        .collect();
    Table {
        key: "label".into(),
        columns: vec!["value".into(), "cumulative_demand_t".into(), "is_minimizer".into()],
        rows,
    }
}

/// Annual demand of every sweep run, one column per label.
pub fn sweep_series_table(r: &SweepResult) -> Table {
    let cols: Vec<String> = r.labels.iter().map(|l| format!("m_total_{l}")).collect();
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let series: Vec<&AnnualSeries> = r.demand.iter().collect();
    Table::by_year(&col_refs, &series)
}

/// Reads one numeric column of a CSV with a `year` column as a series. The
/// first of `columns` present in the header is used.
pub fn read_series_column<R: Read>(reader: R, columns: &[&str], unit: Unit) -> Result<AnnualSeries> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = r.headers()?.clone();
    let schema = |line: usize, column: Option<&str>, message: String| {
        Error::Schema(vec![SchemaError {
            line,
            column: column.map(str::to_string),
            message,
        }])
    };
    let year_idx = headers
        .iter()
        .position(|h| h == "year")
        .ok_or_else(|| schema(1, None, "missing `year` column".into()))?;
    let (col, idx) = columns
        .iter()
        .find_map(|c| headers.iter().position(|h| h == *c).map(|i| (*c, i)))
        .ok_or_else(|| schema(1, None, format!("none of the columns `{}` present", columns.join("`, `"))))?;
    let mut start = None;
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let year: i32 = rec
            .get(year_idx)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| schema(line, Some("year"), "not an integer year".into()))?;
        let v: f64 = rec
            .get(idx)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| schema(line, Some(col), "not a number".into()))?;
        let s = *start.get_or_insert(year);
        if year != s + values.len() as i32 {
            return Err(schema(line, Some("year"), format!("expected year {}", s + values.len() as i32)));
        }
        values.push(v);
    }
    AnnualSeries::new(start.unwrap_or(0), values, unit)
}

pub fn read_series_file(path: &Path, columns: &[&str], unit: Unit) -> Result<AnnualSeries> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series_column(f, columns, unit)
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}
