//! Loading and validation of the historical sector dataset
//! (`year,sector,demand_t,price_eur_per_kg`).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result, SchemaError};
use crate::series::{AnnualSeries, Unit};
use crate::supply::{History, Sector, MIN_HISTORY};

pub const HISTORY_COLUMNS: [&str; 4] = ["year", "sector", "demand_t", "price_eur_per_kg"];

/// Reads and validates a history file, reporting every violation found.
pub fn validate_history(path: impl AsRef<Path>) -> Result<History> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_history(file)
}

pub fn parse_history<R: Read>(reader: R) -> Result<History> {
    let mut errors = Vec::new();
    let mut err = |line: usize, column: Option<&str>, message: String| {
        errors.push(SchemaError {
            line,
            column: column.map(str::to_string),
            message,
        })
    };
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if headers != HISTORY_COLUMNS {
        err(
            1,
            None,
            format!("expected columns `{}`, found `{}`", HISTORY_COLUMNS.join(","), headers.join(",")),
        );
        return Err(Error::Schema(errors));
    }
    let mut demand: BTreeMap<Sector, BTreeMap<i32, f64>> = BTreeMap::new();
    let mut price: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != 4 {
            err(line, None, format!("expected 4 fields, found {}", rec.len()));
            continue;
        }
        let year = match rec[0].parse::<i32>() {
            Ok(y) => Some(y),
            Err(_) => {
                err(line, Some("year"), format!("not an integer year: `{}`", &rec[0]));
                None
            }
        };
        let sector = match rec[1].parse::<Sector>() {
            Ok(s) => Some(s),
            Err(_) => {
                err(line, Some("sector"), format!("unknown sector `{}`", &rec[1]));
                None
            }
        };
        let d = match rec[2].parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
            Ok(v) if v < 0.0 => {
                err(line, Some("demand_t"), format!("negative demand {v}"));
                None
            }
            _ => {
                err(line, Some("demand_t"), format!("not a finite number: `{}`", &rec[2]));
                None
            }
        };
        let p = match rec[3].parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Some(v),
            _ => {
                err(line, Some("price_eur_per_kg"), format!("not a positive number: `{}`", &rec[3]));
                None
            }
        };
        let (Some(year), Some(sector)) = (year, sector) else {
            continue;
        };
        if let Some(d) = d {
            if demand.entry(sector).or_default().insert(year, d).is_some() {
                err(line, Some("year"), format!("duplicate row for `{sector}` in {year}"));
            }
        }
        if let Some(p) = p {
            match price.get(&year) {
                Some(&(q, first_line)) if q != p => err(
                    line,
                    Some("price_eur_per_kg"),
                    format!("price {p} for {year} differs from {q} on line {first_line}"),
                ),
                Some(_) => {}
                None => {
                    price.insert(year, (p, line));
                }
            }
        }
    }
    let missing: Vec<&str> = Sector::ALL
        .iter()
        .filter(|s| !demand.contains_key(s))
        .map(|s| s.as_str())
        .collect();
    if !missing.is_empty() {
        err(0, Some("sector"), format!("sector coverage incomplete: missing {}", missing.join(", ")));
    }
    let all_years: BTreeSet<i32> = demand.values().flat_map(|m| m.keys().copied()).collect();
    if let (Some(&lo), Some(&hi)) = (all_years.first(), all_years.last()) {
        for (s, m) in &demand {
            let gaps: Vec<String> = (lo..=hi).filter(|y| !m.contains_key(y)).map(|y| y.to_string()).collect();
            if !gaps.is_empty() {
                err(0, Some("year"), format!("sector `{s}` is missing years {}", gaps.join(", ")));
            }
        }
        if ((hi - lo + 1) as usize) < MIN_HISTORY {
            err(0, Some("year"), format!("history spans {} years, need at least {MIN_HISTORY}", hi - lo + 1));
        }
    } else {
        err(0, None, "no data rows".into());
    }
    if !errors.is_empty() {
        return Err(Error::Schema(errors));
    }
    let lo = *all_years.first().expect("checked above");
    let sectors = demand
        .into_iter()
        .map(|(s, m)| Ok((s, AnnualSeries::new(lo, m.into_values().collect(), Unit::TonnePerYear)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let price = AnnualSeries::new(lo, price.into_values().map(|(p, _)| p).collect(), Unit::EuroPerKg)?;
    History::new(sectors, price)
}
