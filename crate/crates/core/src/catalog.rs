//! Vehicle catalog: validation, feature normalisation and margins.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, tag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("catalog is empty")]
    Empty,
    #[error("unknown {field} level {value:?}")]
    UnknownLevel { field: &'static str, value: String },
    #[error("non-positive value {value} in {field}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("invalid margin settings: {0}")]
    InvalidMarginSpec(&'static str),
}

macro_rules! levels {
    ($(#[$meta:meta])* $name:ident, $field:literal, [$($variant:ident => $label:literal $(| $alias:literal)*),+ $(,)?]) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|&l| l == self).unwrap()
            }
        }

        impl FromStr for $name {
            type Err = CatalogError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let t = s.trim();
                $(
                    if t.eq_ignore_ascii_case($label) $(|| t.eq_ignore_ascii_case($alias))* {
                        return Ok($name::$variant);
                    }
                )+
                Err(CatalogError::UnknownLevel { field: $field, value: t.to_string() })
            }
        }
    };
}

levels!(
    /// Body style (8 levels).
    BodyStyle, "body_style", [
    Convertible => "convertible",
    Coupe => "coupe",
    Hatchback => "hatchback",
    Suv => "suv",
    Sedan => "sedan",
    Truck => "truck" | "pickup",
    Van => "van" | "minivan",
    Wagon => "wagon",
]);

levels!(
    /// Transmission (3 levels).
    Transmission, "transmission", [
    Automatic => "automatic" | "auto",
    Cvt => "cvt",
    Manual => "manual",
]);

levels!(
    /// Drivetrain (5 levels, including not available).
    Drivetrain, "drivetrain", [
    RearWheel => "rwd" | "rear wd" | "rear",
    AllWheel => "awd",
    FourWheel => "4wd" | "4x4",
    FrontWheel => "fwd" | "front wd" | "front",
    Unknown => "na" | "n/a" | "unknown",
]);

/// One vehicle row. Only the clustering-relevant columns are required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub vehicle_id: String,
    pub body_style: BodyStyle,
    pub transmission: Transmission,
    pub drivetrain: Drivetrain,
    pub num_accidents: u32,
    pub num_owners: u32,
    pub price: f64,
    pub mileage: f64,
    pub market_value: f64,
    /// Ingested for reference; not a clustering feature.
    pub year: Option<u32>,
}

impl VehicleRecord {
    fn check(&self) -> Result<(), &'static str> {
        if self.vehicle_id.is_empty() {
            return Err("empty vehicle_id");
        }
        if !(self.price > 0.0 && self.price.is_finite()) {
            return Err("price must be positive");
        }
        if !(self.mileage > 0.0 && self.mileage.is_finite()) {
            return Err("mileage must be positive");
        }
        if !(self.market_value > 0.0 && self.market_value.is_finite()) {
            return Err("market_value must be positive");
        }
        Ok(())
    }
}

/// Validated, nonempty set of vehicles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleCatalog {
    records: Vec<VehicleRecord>,
}

impl VehicleCatalog {
    /// Validates every row; the first offending row is reported by index
    /// (zero-based, data rows only).
    pub fn new(records: Vec<VehicleRecord>) -> Result<Self, CatalogError> {
        if records.is_empty() {
            return Err(CatalogError::Empty);
        }
        for (row, r) in records.iter().enumerate() {
            r.check().map_err(|reason| CatalogError::InvalidRow { row, reason: reason.to_string() })?;
        }
        Ok(VehicleCatalog { records })
    }

    pub fn records(&self) -> &[VehicleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.vehicle_id.as_str())
    }
}

/// How one-hot categorical blocks are scaled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalWeighting {
    /// Block weight `1 / levels`.
    #[default]
    InverseLevels,
    /// Block weight `levels`.
    Levels,
    /// Block weight 1.
    Unit,
}

impl CategoricalWeighting {
    pub fn weight(self, levels: usize) -> f64 {
        match self {
            CategoricalWeighting::InverseLevels => 1.0 / levels as f64,
            CategoricalWeighting::Levels => levels as f64,
            CategoricalWeighting::Unit => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub weighting: CategoricalWeighting,
    /// Value assigned when a continuous feature is constant across the catalog.
    pub degenerate_value: f64,
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        NormalizationSpec { weighting: CategoricalWeighting::InverseLevels, degenerate_value: 0.5 }
    }
}

/// Owner-count levels: new, 1, 2, 3 or more.
pub const OWNER_LEVELS: usize = 4;
/// Accident levels: none, at least one.
pub const ACCIDENT_LEVELS: usize = 2;

fn owner_level(n: u32) -> usize {
    (n as usize).min(OWNER_LEVELS - 1)
}

/// Column names of the normalised feature vector.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::new();
    for b in BodyStyle::ALL {
        names.push(alloc::format!("body_{}", b.label()));
    }
    for t in Transmission::ALL {
        names.push(alloc::format!("trans_{}", t.label()));
    }
    for d in Drivetrain::ALL {
        names.push(alloc::format!("drive_{}", d.label().replace(' ', "_")));
    }
    names.push("accidents_none".into());
    names.push("accidents_any".into());
    for o in ["owners_0", "owners_1", "owners_2", "owners_3plus"] {
        names.push(o.into());
    }
    names.push("log_price".into());
    names.push("log_mileage".into());
    names.push("log_market_value".into());
    names
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedVehicle {
    pub vehicle_id: String,
    pub feature_vector: Vec<f64>,
    pub margin: f64,
}

/// Min-max normalisation of log-transformed positive values. A constant
/// feature maps to `degenerate` for every row.
pub fn log_minmax(field: &'static str, values: &[f64], degenerate: f64) -> Result<Vec<f64>, CatalogError> {
    let mut logs = Vec::with_capacity(values.len());
    for &v in values {
        if !(v > 0.0) {
            return Err(CatalogError::NonPositive { field, value: v });
        }
        logs.push(Float::ln(v));
    }
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![degenerate; values.len()]);
    }
    Ok(logs.iter().map(|&x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)).collect())
}

/// Weighted one-hot blocks followed by normalised log price, mileage and
/// market value. The margin field is `margin_rate * market_value`; use
/// [`compute_margins`] for trimming.
pub fn normalize(catalog: &VehicleCatalog, spec: &NormalizationSpec, margin_rate: f64) -> Result<Vec<NormalizedVehicle>, CatalogError> {
    let recs = catalog.records();
    let price = log_minmax("price", &recs.iter().map(|r| r.price).collect::<Vec<_>>(), spec.degenerate_value)?;
    let mileage = log_minmax("mileage", &recs.iter().map(|r| r.mileage).collect::<Vec<_>>(), spec.degenerate_value)?;
    let value = log_minmax("market_value", &recs.iter().map(|r| r.market_value).collect::<Vec<_>>(), spec.degenerate_value)?;
    let w = |levels: usize| spec.weighting.weight(levels);
    Ok(recs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut f = Vec::with_capacity(feature_names().len());
            let mut block = |levels: usize, active: usize| {
                let weight = w(levels);
                f.extend((0..levels).map(|l| if l == active { weight } else { 0.0 }));
            };
            block(BodyStyle::ALL.len(), r.body_style.index());
            block(Transmission::ALL.len(), r.transmission.index());
            block(Drivetrain::ALL.len(), r.drivetrain.index());
            block(ACCIDENT_LEVELS, usize::from(r.num_accidents > 0));
            block(OWNER_LEVELS, owner_level(r.num_owners));
            f.push(price[i]);
            f.push(mileage[i]);
            f.push(value[i]);
            NormalizedVehicle { vehicle_id: r.vehicle_id.clone(), feature_vector: f, margin: margin_rate * r.market_value }
        })
        .collect())
}

/// Per-vehicle margins with percentile-trim flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub margins: Vec<f64>,
    /// Vehicles outside the market-value percentile band. They stay in the
    /// catalog; only margin statistics skip them.
    pub excluded: Vec<bool>,
}

impl MarginReport {
    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|&&e| e).count()
    }

    /// Mean margin of the non-excluded members of each cluster. Clusters whose
    /// members are all excluded fall back to the mean over all members; empty
    /// clusters get 0.
    pub fn cluster_margins(&self, assignments: &[usize], k: usize) -> Vec<f64> {
        let mut sum = vec![0.0; k];
        let mut n = vec![0usize; k];
        let mut sum_all = vec![0.0; k];
        let mut n_all = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            sum_all[c] += self.margins[i];
            n_all[c] += 1;
            if !self.excluded[i] {
                sum[c] += self.margins[i];
                n[c] += 1;
            }
        }
        (0..k)
            .map(|c| match (n[c], n_all[c]) {
                (0, 0) => 0.0,
                (0, m) => sum_all[c] / m as f64,
                (m, _) => sum[c] / m as f64,
            })
            .collect()
    }
}

/// `margin = rate * market_value`; vehicles whose market value falls outside the
/// `[low, high]` percentile band are flagged.
pub fn compute_margins(catalog: &VehicleCatalog, rate: f64, trim: (f64, f64)) -> Result<MarginReport, CatalogError> {
    let (low, high) = trim;
    if !(rate > 0.0 && rate < 1.0) {
        return Err(CatalogError::InvalidMarginSpec("rate must lie in (0, 1)"));
    }
    if !(0.0 <= low && low < high && high <= 100.0) {
        return Err(CatalogError::InvalidMarginSpec("need 0 <= low < high <= 100"));
    }
    let values: Vec<f64> = catalog.records().iter().map(|r| r.market_value).collect();
    let n = values.len();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let n_low = Float::floor(n as f64 * low / 100.0) as usize;
    let n_high = Float::floor(n as f64 * (100.0 - high) / 100.0) as usize;
    let lo_val = sorted[n_low.min(n - 1)];
    let hi_val = sorted[(n - 1).saturating_sub(n_high)];
    Ok(MarginReport {
        margins: values.iter().map(|v| rate * v).collect(),
        excluded: values.iter().map(|&v| v < lo_val || v > hi_val).collect(),
    })
}

/// Composition of one synthetic vehicle segment: level shares and the means of
/// the min-max normalised log features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentProfile {
    pub body_style: [f64; 8],
    pub transmission: [f64; 3],
    pub drivetrain: [f64; 5],
    pub accident_share: f64,
    pub owners: [f64; 4],
    pub log_price: f64,
    pub log_mileage: f64,
    pub log_margin: f64,
    pub count: usize,
}

/// Eight segment profiles with the composition of the reference used-car
/// inventory (4,140 vehicles).
pub fn reference_profiles() -> Vec<SegmentProfile> {
    let body: [[f64; 8]; 8] = [
        [15., 18., 1., 6., 52., 7., 0., 0.],
        [3., 4., 20., 17., 51., 0., 4., 2.],
        [10., 28., 26., 7., 25., 2., 0., 2.],
        [8., 12., 14., 13., 51., 0., 1., 2.],
        [1., 4., 34., 16., 41., 0., 0., 4.],
        [2., 7., 3., 59., 24., 0., 1., 4.],
        [1., 0., 1., 78., 0., 19., 0., 1.],
        [6., 10., 15., 23., 40., 1., 2., 2.],
    ];
    let trans: [[f64; 3]; 8] = [
        [100., 0., 0.],
        [100., 0., 0.],
        [0., 0., 100.],
        [100., 0., 0.],
        [0., 100., 0.],
        [100., 0., 0.],
        [100., 0., 0.],
        [79., 11., 11.],
    ];
    // rear, awd, 4wd, front, na
    let drive: [[f64; 5]; 8] = [
        [100., 0., 0., 0., 0.],
        [0., 0., 0., 100., 0.],
        [31., 11., 4., 35., 18.],
        [0., 0., 0., 0., 100.],
        [0., 19., 1., 64., 16.],
        [0., 100., 0., 0., 0.],
        [0., 0., 100., 0., 0.],
        [18., 17., 8., 41., 17.],
    ];
    let accidents = [0., 0., 0., 0., 0., 0., 0., 100.];
    let owners: [[f64; 4]; 8] = [
        [18., 28., 38., 15.],
        [17., 48., 28., 8.],
        [19., 42., 27., 12.],
        [18., 37., 34., 11.],
        [14., 60., 22., 4.],
        [16., 38., 35., 12.],
        [21., 47., 26., 6.],
        [0., 45., 42., 13.],
    ];
    let price = [0.48, 0.38, 0.44, 0.40, 0.41, 0.51, 0.54, 0.40];
    let mileage = [0.86, 0.85, 0.83, 0.85, 0.83, 0.86, 0.85, 0.88];
    let margin = [0.42, 0.34, 0.39, 0.38, 0.36, 0.45, 0.47, 0.36];
    let counts = [725, 1270, 445, 380, 427, 445, 161, 287];
    let norm = |xs: &[f64]| -> Vec<f64> {
        let s: f64 = xs.iter().sum();
        xs.iter().map(|x| x / s).collect()
    };
    (0..8)
        .map(|c| SegmentProfile {
            body_style: norm(&body[c]).try_into().unwrap(),
            transmission: norm(&trans[c]).try_into().unwrap(),
            drivetrain: norm(&drive[c]).try_into().unwrap(),
            accident_share: accidents[c] / 100.0,
            owners: norm(&owners[c]).try_into().unwrap(),
            log_price: price[c],
            log_mileage: mileage[c],
            log_margin: margin[c],
            count: counts[c],
        })
        .collect()
}

/// Range of the raw (un-normalised) continuous features used by the generator.
const PRICE_RANGE: (f64, f64) = (4_000.0, 90_000.0);
const MILEAGE_RANGE: (f64, f64) = (50.0, 220_000.0);
const VALUE_RANGE: (f64, f64) = (3_500.0, 85_000.0);

/// Synthetic catalog drawn from segment profiles. Returns the catalog and the
/// generating segment of each vehicle. Normalised log features are drawn around
/// the profile means with standard deviation `spread`; the first two vehicles pin
/// the extremes so the min-max range is the configured one.
pub fn synthetic_catalog(profiles: &[SegmentProfile], spread: f64, seed: u64) -> (VehicleCatalog, Vec<usize>) {
    let mut rng = rng::stream(seed, tag::CATALOG, 0);
    let mut records = Vec::new();
    let mut labels = Vec::new();
    let raw = |u: f64, (lo, hi): (f64, f64)| Float::exp(Float::ln(lo) + u * (Float::ln(hi) - Float::ln(lo)));
    for (seg, p) in profiles.iter().enumerate() {
        for _ in 0..p.count {
            let id = records.len();
            let mut draw = |mean: f64| (mean + spread * rng::standard_normal(&mut rng)).clamp(0.0, 1.0);
            let (mut up, mut um, mut uv) = (draw(p.log_price), draw(p.log_mileage), draw(p.log_margin));
            if id < 2 {
                let e = id as f64;
                up = e;
                um = e;
                uv = e;
            }
            let body = BodyStyle::ALL[rng::sample_index(&mut rng, &p.body_style)];
            let trans = Transmission::ALL[rng::sample_index(&mut rng, &p.transmission)];
            let drive = Drivetrain::ALL[rng::sample_index(&mut rng, &p.drivetrain)];
            let acc = rng::sample_index(&mut rng, &[1.0 - p.accident_share, p.accident_share]) as u32;
            let owners = rng::sample_index(&mut rng, &p.owners) as u32;
            records.push(VehicleRecord {
                vehicle_id: alloc::format!("v{:05}", id + 1),
                body_style: body,
                transmission: trans,
                drivetrain: drive,
                num_accidents: acc,
                num_owners: owners,
                price: raw(up, PRICE_RANGE),
                mileage: raw(um, MILEAGE_RANGE),
                market_value: raw(uv, VALUE_RANGE),
                year: Some(2008 + (id % 9) as u32),
            });
            labels.push(seg);
        }
    }
    (VehicleCatalog::new(records).expect("generated rows are valid"), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, price: f64) -> VehicleRecord {
        VehicleRecord {
            vehicle_id: id.into(),
            body_style: BodyStyle::Sedan,
            transmission: Transmission::Automatic,
            drivetrain: Drivetrain::FrontWheel,
            num_accidents: 0,
            num_owners: 1,
            price,
            mileage: 10_000.0,
            market_value: 100.0,
            year: None,
        }
    }

    #[test]
    fn rejects_non_positive_price_with_row() {
        let err = VehicleCatalog::new(vec![rec("a", 1.0), rec("b", 0.0)]).unwrap_err();
        assert_eq!(err, CatalogError::InvalidRow { row: 1, reason: "price must be positive".into() });
    }

    #[test]
    fn log_minmax_endpoints_and_degenerate() {
        let e = core::f64::consts::E;
        assert_eq!(log_minmax("x", &[e, e * e], 0.5).unwrap(), vec![0.0, 1.0]);
        assert_eq!(log_minmax("x", &[5.0, 5.0, 5.0], 0.5).unwrap(), vec![0.5; 3]);
        assert!(log_minmax("x", &[1.0, -1.0], 0.5).is_err());
    }

    #[test]
    fn one_hot_blocks_sum_to_weight() {
        let cat = VehicleCatalog::new(vec![rec("a", 10.0), rec("b", 20.0)]).unwrap();
        let out = normalize(&cat, &NormalizationSpec::default(), 0.3).unwrap();
        let f = &out[0].feature_vector;
        assert_eq!(f.len(), feature_names().len());
        let blocks = [8usize, 3, 5, 2, 4];
        let mut off = 0;
        for b in blocks {
            let s: f64 = f[off..off + b].iter().sum();
            assert_eq!(s, 1.0 / b as f64);
            off += b;
        }
        assert!((out[1].margin - 30.0).abs() < 1e-12);
    }

    #[test]
    fn level_parsing() {
        assert_eq!("SUV".parse::<BodyStyle>().unwrap(), BodyStyle::Suv);
        assert_eq!(" Rear WD ".parse::<Drivetrain>().unwrap(), Drivetrain::RearWheel);
        assert!(matches!("hover".parse::<BodyStyle>(), Err(CatalogError::UnknownLevel { .. })));
    }

    #[test]
    fn margin_arithmetic_and_trim() {
        let recs: Vec<_> = (0..100)
            .map(|i| {
                let mut r = rec(&alloc::format!("v{i}"), 1.0);
                r.market_value = 100.0 + i as f64;
                r
            })
            .collect();
        let cat = VehicleCatalog::new(recs).unwrap();
        let m = compute_margins(&cat, 0.3, (5.0, 95.0)).unwrap();
        assert!((m.margins[0] - 30.0).abs() < 1e-12);
        assert_eq!(m.excluded_count(), 10);
        assert!(m.excluded[0] && m.excluded[4] && !m.excluded[5]);
        assert!(m.excluded[99] && m.excluded[95] && !m.excluded[94]);
        assert!(compute_margins(&cat, 1.5, (5.0, 95.0)).is_err());
        assert!(compute_margins(&cat, 0.3, (50.0, 10.0)).is_err());
    }

    #[test]
    fn reference_profiles_total() {
        let p = reference_profiles();
        assert_eq!(p.iter().map(|s| s.count).sum::<usize>(), 4140);
    }
}
