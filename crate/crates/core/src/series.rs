//! Year-indexed annual series with unit tags.
//!
//! [`AnnualSeries`] is the value type every other module trades in: capacity
//! pathways, power densities, recycling ramps, demand and supply flows. Index
//! `i` maps to calendar year `start_year + i`; values are always finite.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical unit attached to a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "GW")]
    Gigawatt,
    #[serde(rename = "GW/yr")]
    GigawattPerYear,
    /// Metric tons of iridium.
    #[serde(rename = "t")]
    Tonne,
    #[serde(rename = "t/yr")]
    TonnePerYear,
    #[serde(rename = "kg/GW")]
    KgPerGigawatt,
    #[serde(rename = "EUR/kg")]
    EuroPerKg,
    #[serde(rename = "1")]
    Fraction,
    #[serde(rename = "mg/cm2/h")]
    MgPerCm2Hour,
    #[serde(rename = "t PGM")]
    TonnePgm,
}

impl Unit {
    pub const ALL: [Unit; 9] = [
        Unit::Gigawatt,
        Unit::GigawattPerYear,
        Unit::Tonne,
        Unit::TonnePerYear,
        Unit::KgPerGigawatt,
        Unit::EuroPerKg,
        Unit::Fraction,
        Unit::MgPerCm2Hour,
        Unit::TonnePgm,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Gigawatt => "GW",
            Unit::GigawattPerYear => "GW/yr",
            Unit::Tonne => "t",
            Unit::TonnePerYear => "t/yr",
            Unit::KgPerGigawatt => "kg/GW",
            Unit::EuroPerKg => "EUR/kg",
            Unit::Fraction => "1",
            Unit::MgPerCm2Hour => "mg/cm2/h",
            Unit::TonnePgm => "t PGM",
        }
    }

    /// Unit of the running sum of a series in this unit. Flows become stocks,
    /// everything else is unchanged.
    pub fn accumulated(self) -> Unit {
        match self {
            Unit::TonnePerYear => Unit::Tonne,
            Unit::GigawattPerYear => Unit::Gigawatt,
            other => other,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Unit::ALL
            .into_iter()
            .find(|u| u.symbol() == s.trim())
            .ok_or_else(|| Error::param("unit", format!("unknown unit tag `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineOp {
    Add,
    Sub,
}

/// Immutable year-indexed sequence of finite values with a unit tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualSeries {
    start_year: i32,
    values: Vec<f64>,
    unit: Unit,
}

impl AnnualSeries {
    pub fn new(start_year: i32, values: Vec<f64>, unit: Unit) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                year: start_year + i as i32,
                value: v,
            });
        }
        Ok(Self {
            start_year,
            values,
            unit,
        })
    }

    /// Constant series over `[first, last]` inclusive.
    pub fn constant(first: i32, last: i32, value: f64, unit: Unit) -> Result<Self> {
        if last < first {
            return Err(Error::EmptySeries);
        }
        Self::new(first, vec![value; (last - first + 1) as usize], unit)
    }

    /// Builds a series by evaluating `f` at every year of `[first, last]`.
    pub fn from_fn(first: i32, last: i32, unit: Unit, f: impl FnMut(i32) -> f64) -> Result<Self> {
        if last < first {
            return Err(Error::EmptySeries);
        }
        Self::new(first, (first..=last).map(f).collect(), unit)
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.values.len() as i32 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.values.len()).map(move |i| self.start_year + i as i32)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.years().zip(self.values.iter().copied())
    }

    pub fn contains_year(&self, year: i32) -> bool {
        year >= self.start_year && year <= self.end_year()
    }

    pub fn at(&self, year: i32) -> Result<f64> {
        if !self.contains_year(year) {
            return Err(Error::YearOutOfRange {
                year,
                start: self.start_year,
                end: self.end_year(),
            });
        }
        Ok(self.values[(year - self.start_year) as usize])
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a + v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Element-wise add/sub on the intersection of the two year ranges.
    pub fn combine(&self, other: &AnnualSeries, op: CombineOp) -> Result<AnnualSeries> {
        if self.unit != other.unit {
            return Err(Error::UnitMismatch {
                left: self.unit,
                right: other.unit,
            });
        }
        let first = self.start_year.max(other.start_year);
        let last = self.end_year().min(other.end_year());
        if last < first {
            return Err(Error::EmptyIntersection);
        }
        let a = &self.values[(first - self.start_year) as usize..];
        let b = &other.values[(first - other.start_year) as usize..];
        let n = (last - first + 1) as usize;
        let values = a[..n]
            .iter()
            .zip(&b[..n])
            .map(|(x, y)| match op {
                CombineOp::Add => x + y,
                CombineOp::Sub => x - y,
            })
            .collect();
        AnnualSeries::new(first, values, self.unit)
    }

    pub fn add(&self, other: &AnnualSeries) -> Result<AnnualSeries> {
        self.combine(other, CombineOp::Add)
    }

    pub fn sub(&self, other: &AnnualSeries) -> Result<AnnualSeries> {
        self.combine(other, CombineOp::Sub)
    }

    pub fn negate(&self) -> AnnualSeries {
        self.map(|v| -v)
    }

    /// Multiplies by a scalar, keeping the unit.
    pub fn scale(&self, factor: f64) -> Result<AnnualSeries> {
        AnnualSeries::new(
            self.start_year,
            self.values.iter().map(|v| v * factor).collect(),
            self.unit,
        )
    }

    /// Element-wise product with a dimensionless series (intersection of ranges).
    pub fn scale_by(&self, factor: &AnnualSeries) -> Result<AnnualSeries> {
        if factor.unit != Unit::Fraction {
            return Err(Error::UnitMismatch {
                left: self.unit,
                right: factor.unit,
            });
        }
        let first = self.start_year.max(factor.start_year);
        let last = self.end_year().min(factor.end_year());
        if last < first {
            return Err(Error::EmptyIntersection);
        }
        AnnualSeries::from_fn(first, last, self.unit, |y| {
            self.values[(y - self.start_year) as usize]
                * factor.values[(y - factor.start_year) as usize]
        })
    }

    /// Running sum; the unit becomes the stock unit (t/yr → t).
    pub fn cumulative(&self) -> AnnualSeries {
        let mut acc = 0.0;
        let values = self
            .values
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        AnnualSeries {
            start_year: self.start_year,
            values,
            unit: self.unit.accumulated(),
        }
    }

    /// Sub-range `[first, last]` inclusive.
    pub fn slice(&self, first: i32, last: i32) -> Result<AnnualSeries> {
        for y in [first, last] {
            self.at(y)?;
        }
        if last < first {
            return Err(Error::EmptySeries);
        }
        let lo = (first - self.start_year) as usize;
        let hi = (last - self.start_year) as usize;
        AnnualSeries::new(first, self.values[lo..=hi].to_vec(), self.unit)
    }

    /// Applies `f` to every value. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> AnnualSeries {
        AnnualSeries::new(
            self.start_year,
            self.values.iter().map(|&v| f(v)).collect(),
            self.unit,
        )
        .expect("mapped series must stay finite")
    }

    /// Same values re-tagged with another unit.
    pub fn with_unit(&self, unit: Unit) -> AnnualSeries {
        AnnualSeries {
            start_year: self.start_year,
            values: self.values.clone(),
            unit,
        }
    }

    /// Writes `year,value,unit` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["year", "value", "unit"])?;
        for (year, value) in self.iter() {
            w.write_record([year.to_string(), fmt_f64(value), self.unit.symbol().to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    /// Reads `year,value,unit` CSV. Years must be contiguous and share one unit.
    pub fn read_csv<R: Read>(reader: R) -> Result<AnnualSeries> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["year", "value", "unit"] {
            return Err(Error::Schema(vec![crate::error::SchemaError {
                line: 1,
                column: None,
                message: format!("expected header `year,value,unit`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            }]));
        }
        let mut start = None;
        let mut unit = None;
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |column: &str, message: String| {
                Error::Schema(vec![crate::error::SchemaError {
                    line,
                    column: Some(column.to_string()),
                    message,
                }])
            };
            let year: i32 = rec[0]
                .parse()
                .map_err(|_| bad("year", format!("not an integer: `{}`", &rec[0])))?;
            let value: f64 = rec[1]
                .parse()
                .map_err(|_| bad("value", format!("not a number: `{}`", &rec[1])))?;
            let u: Unit = rec[2].parse().map_err(|_| bad("unit", format!("unknown unit `{}`", &rec[2])))?;
            let s = *start.get_or_insert(year);
            if year != s + values.len() as i32 {
                return Err(bad("year", format!("expected year {}, found {year}", s + values.len() as i32)));
            }
            if *unit.get_or_insert(u) != u {
                return Err(bad("unit", "unit changes within series".to_string()));
            }
            values.push(value);
        }
        AnnualSeries::new(start.unwrap_or(0), values, unit.unwrap_or(Unit::Fraction))
    }

    /// JSON array of `{year, value}` objects.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.iter()
                .map(|(year, value)| serde_json::json!({ "year": year, "value": value }))
                .collect(),
        )
    }

    pub fn from_json(json: &serde_json::Value, unit: Unit) -> Result<AnnualSeries> {
        #[derive(Deserialize)]
        struct Point {
            year: i32,
            value: f64,
        }
        let points: Vec<Point> = serde_json::from_value(json.clone())?;
        let start = points.first().map(|p| p.year).ok_or(Error::EmptySeries)?;
        for (i, p) in points.iter().enumerate() {
            if p.year != start + i as i32 {
                return Err(Error::param("json", format!("non-contiguous year {}", p.year)));
            }
        }
        AnnualSeries::new(start, points.into_iter().map(|p| p.value).collect(), unit)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    // Rust's Display for f64 is round-trip exact and locale independent.
    let s = format!("{v}");
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

/// Piecewise-linear interpolation through `anchors` evaluated at every year of
/// `range`. Outside the anchor span the nearest segment's slope is extended.
/// Anchor years are reproduced exactly.
pub fn interpolate_linear(anchors: &[(i32, f64)], range: (i32, i32), unit: Unit) -> Result<AnnualSeries> {
    if anchors.len() < 2 {
        return Err(Error::InvalidAnchors(format!(
            "need at least 2 anchors, got {}",
            anchors.len()
        )));
    }
    for w in anchors.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::InvalidAnchors(format!(
                "anchor years must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
    }
    if let Some(&(y, v)) = anchors.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { year: y, value: v });
    }
    AnnualSeries::from_fn(range.0, range.1, unit, |year| interpolate_at(anchors, year))
}

fn interpolate_at(anchors: &[(i32, f64)], year: i32) -> f64 {
    if let Some(&(_, v)) = anchors.iter().find(|(y, _)| *y == year) {
        return v;
    }
    let seg = match anchors.iter().position(|(y, _)| *y > year) {
        Some(0) => 0,
        Some(j) => j - 1,
        None => anchors.len() - 2,
    };
    let (y0, v0) = anchors[seg];
    let (y1, v1) = anchors[seg + 1];
    v0 + (v1 - v0) * f64::from(year - y0) / f64::from(y1 - y0)
}
