//! Catalog CSV with a configurable column mapping.

use std::collections::HashMap;
use std::path::Path;

use searchrec_core::catalog::{feature_names, NormalizedVehicle, VehicleCatalog, VehicleRecord};
use serde::{Deserialize, Serialize};

use super::{read_text, write_bytes};
use crate::error::{Error, Result};

/// Header names of each catalog field. `year` is optional.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub vehicle_id: String,
    pub body_style: String,
    pub transmission: String,
    pub drivetrain: String,
    pub num_accidents: String,
    pub num_owners: String,
    pub price: String,
    pub mileage: String,
    pub market_value: String,
    pub year: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            vehicle_id: "vehicle_id".into(),
            body_style: "body_style".into(),
            transmission: "transmission".into(),
            drivetrain: "drivetrain".into(),
            num_accidents: "num_accidents".into(),
            num_owners: "num_owners".into(),
            price: "price".into(),
            mileage: "mileage".into(),
            market_value: "market_value".into(),
            year: Some("year".into()),
        }
    }
}

fn cell<T: std::str::FromStr>(row: &csv::StringRecord, col: usize, name: &str, line: usize) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    let raw = row.get(col).unwrap_or("").trim();
    raw.parse().map_err(|e| format!("row {line}: column {name}: cannot parse {raw:?}: {e}"))
}

/// Reads a catalog CSV. Rows are numbered from 1 (first data row) in errors.
/// Extra columns are ignored.
pub fn load_catalog(path: &Path, mapping: &ColumnMapping) -> Result<VehicleCatalog> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::input(path, e))?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let col = |name: &str| index.get(name).copied().ok_or_else(|| Error::input(path, format!("missing column {name:?}")));
    let c_id = col(&mapping.vehicle_id)?;
    let c_body = col(&mapping.body_style)?;
    let c_trans = col(&mapping.transmission)?;
    let c_drive = col(&mapping.drivetrain)?;
    let c_acc = col(&mapping.num_accidents)?;
    let c_own = col(&mapping.num_owners)?;
    let c_price = col(&mapping.price)?;
    let c_mile = col(&mapping.mileage)?;
    let c_value = col(&mapping.market_value)?;
    let c_year = mapping.year.as_deref().and_then(|y| index.get(y).copied());

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| Error::input(path, format!("row {line}: {e}")))?;
        let parse = || -> std::result::Result<VehicleRecord, String> {
            let level = |c: usize| row.get(c).unwrap_or("").to_string();
            Ok(VehicleRecord {
                vehicle_id: level(c_id),
                body_style: level(c_body).parse().map_err(|e| format!("row {line}: {e}"))?,
                transmission: level(c_trans).parse().map_err(|e| format!("row {line}: {e}"))?,
                drivetrain: level(c_drive).parse().map_err(|e| format!("row {line}: {e}"))?,
                num_accidents: cell(&row, c_acc, &mapping.num_accidents, line)?,
                num_owners: cell(&row, c_own, &mapping.num_owners, line)?,
                price: cell(&row, c_price, &mapping.price, line)?,
                mileage: cell(&row, c_mile, &mapping.mileage, line)?,
                market_value: cell(&row, c_value, &mapping.market_value, line)?,
                year: match c_year.and_then(|c| row.get(c)).map(str::trim) {
                    None | Some("") => None,
                    Some(y) => Some(y.parse().map_err(|e| format!("row {line}: column year: {e}"))?),
                },
            })
        };
        records.push(parse().map_err(|m| Error::input(path, m))?);
    }
    VehicleCatalog::new(records).map_err(|e| match e {
        searchrec_core::catalog::CatalogError::InvalidRow { row, reason } => Error::input(path, format!("row {}: {reason}", row + 1)),
        other => Error::input(path, other),
    })
}

/// Writes a catalog with the default column names.
pub fn write_catalog(path: &Path, catalog: &VehicleCatalog) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "vehicle_id",
        "body_style",
        "transmission",
        "drivetrain",
        "num_accidents",
        "num_owners",
        "price",
        "mileage",
        "market_value",
        "year",
    ])
    .expect("in-memory write");
    for r in catalog.records() {
        w.write_record([
            r.vehicle_id.clone(),
            r.body_style.label().to_string(),
            r.transmission.label().to_string(),
            r.drivetrain.label().to_string(),
            r.num_accidents.to_string(),
            r.num_owners.to_string(),
            format!("{:.2}", r.price),
            format!("{:.1}", r.mileage),
            format!("{:.2}", r.market_value),
            r.year.map(|y| y.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    write_bytes(path, &w.into_inner().expect("in-memory flush"))
}

/// Audit dump of the normalised feature matrix.
pub fn write_normalized(path: &Path, vehicles: &[NormalizedVehicle]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["vehicle_id".to_string()];
    header.extend(feature_names());
    header.push("margin".into());
    w.write_record(&header).expect("in-memory write");
    for v in vehicles {
        let mut row = vec![v.vehicle_id.clone()];
        row.extend(v.feature_vector.iter().map(|x| format!("{x:.12}")));
        row.push(format!("{:.6}", v.margin));
        w.write_record(&row).expect("in-memory write");
    }
    write_bytes(path, &w.into_inner().expect("in-memory flush"))
}
