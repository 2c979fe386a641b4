//! Observations `(x, u, y)` and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{InputSchema, MixedPoint};

/// Name of the response column in CSV files.
pub const RESPONSE_COLUMN: &str = "y";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: InputSchema,
    points: Vec<MixedPoint>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(schema: InputSchema, points: Vec<MixedPoint>, y: Vec<f64>) -> Result<Self> {
        if points.len() != y.len() {
            return domain(format!("{} points but {} responses", points.len(), y.len()));
        }
        for (i, p) in points.iter().enumerate() {
            schema
                .check_point(p)
                .map_err(|e| Error::Domain(format!("observation {}: {e}", i + 1)))?;
            if p.x.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return domain(format!("observation {}: continuous inputs must lie in [0,1]", i + 1));
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return domain(format!("observation {}: response is not finite", i + 1));
        }
        Ok(Self { schema, points, y })
    }

    pub fn schema(&self) -> &InputSchema {
        &self.schema
    }

    pub fn points(&self) -> &[MixedPoint] {
        &self.points
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn from_csv_path(path: impl AsRef<Path>, schema: &InputSchema) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref()).map_err(|e| {
            Error::Parse(format!("cannot open {}: {e}", path.as_ref().display()))
        })?;
        Self::from_csv(f, schema)
    }

    /// Reads a CSV with a header naming every schema input and a `y` column.
    pub fn from_csv(reader: impl Read, schema: &InputSchema) -> Result<Self> {
        let (points, y) = read_points_csv(reader, schema, true)?;
        Self::new(schema.clone(), points, y.expect("response required"))
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        write_points_csv(writer, &self.schema, &self.points, Some(&self.y))
    }
}

/// Reads points (and the response when `require_y`) from a CSV with a header row.
///
/// Columns are matched by name; their order is free. Unknown columns are rejected.
pub fn read_points_csv(
    reader: impl Read,
    schema: &InputSchema,
    require_y: bool,
) -> Result<(Vec<MixedPoint>, Option<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let mut cont_idx = Vec::new();
    for name in &schema.continuous {
        cont_idx.push(find(name).ok_or_else(|| {
            Error::Parse(format!("line 1: missing continuous column '{name}'"))
        })?);
    }
    let mut cat_idx = Vec::new();
    for c in &schema.categorical {
        cat_idx.push(find(&c.name).ok_or_else(|| {
            Error::Parse(format!("line 1: missing categorical column '{}'", c.name))
        })?);
    }
    let y_idx = find(RESPONSE_COLUMN);
    if require_y && y_idx.is_none() {
        return Err(Error::Parse(format!("line 1: missing response column '{RESPONSE_COLUMN}'")));
    }
    for (i, h) in header.iter().enumerate() {
        if !cont_idx.contains(&i) && !cat_idx.contains(&i) && Some(i) != y_idx {
            return Err(Error::Parse(format!("line 1: unknown column '{h}'")));
        }
    }

    let mut points = Vec::new();
    let mut ys = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let parse_f = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                Error::Parse(format!("line {line}, column '{}': '{}' is not a number", &header[i], field(i)))
            })
        };
        let x = cont_idx.iter().map(|&i| parse_f(i)).collect::<Result<Vec<_>>>()?;
        let u = cat_idx
            .iter()
            .map(|&i| {
                field(i).parse::<usize>().map_err(|_| {
                    Error::Parse(format!(
                        "line {line}, column '{}': '{}' is not a level (positive integer)",
                        &header[i],
                        field(i)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = MixedPoint::new(x, u);
        schema.check_point(&p).map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        points.push(p);
        if let Some(i) = y_idx {
            ys.push(parse_f(i)?);
        }
    }
    Ok((points, y_idx.map(|_| ys)))
}

/// Writes points with continuous columns, then categorical columns, then `y` if given.
pub fn write_points_csv(
    writer: impl Write,
    schema: &InputSchema,
    points: &[MixedPoint],
    y: Option<&[f64]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = schema.continuous.clone();
    header.extend(schema.categorical.iter().map(|c| c.name.clone()));
    if y.is_some() {
        header.push(RESPONSE_COLUMN.into());
    }
    w.write_record(&header)?;
    for (i, p) in points.iter().enumerate() {
        let mut row: Vec<String> = p.x.iter().map(|v| format!("{v:?}")).collect();
        row.extend(p.u.iter().map(|v| v.to_string()));
        if let Some(y) = y {
            row.push(format!("{:?}", y[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
