//! Catalogue ingestion and result serialization.
//!
//! Input CSV files need a header row. Angles are in degrees and use a
//! decimal point regardless of locale.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Method, TestName, TestOutcome};
use crate::error::{Error, Result};
use crate::sphere::{DirectionalSample, UnitVector};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogueFormat {
    LonLatDeg,
    LatLonDeg,
    Cartesian,
}

impl CatalogueFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lonlat_deg" => Some(Self::LonLatDeg),
            "latlon_deg" => Some(Self::LatLonDeg),
            "cartesian" => Some(Self::Cartesian),
            _ => None,
        }
    }
}

/// Longitude range found in the input before normalization to [0, 360).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LonConvention {
    /// [0, 360)
    East360,
    /// (−180, 180]
    Signed180,
}

/// Explicit column names; unset entries are detected from the header.
#[derive(Debug, Clone, Default)]
pub struct ColumnMapping {
    pub lat: Option<String>,
    pub lon: Option<String>,
    pub name: Option<String>,
    pub diameter: Option<String>,
    pub cartesian: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct CatalogueOptions {
    pub format: CatalogueFormat,
    pub columns: ColumnMapping,
    pub skip_bad: bool,
}

impl CatalogueOptions {
    pub fn new(format: CatalogueFormat) -> Self {
        Self {
            format,
            columns: ColumnMapping::default(),
            skip_bad: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraterRecord {
    pub name: String,
    pub lat_deg: f64,
    /// Normalized to [0, 360).
    pub lon_deg: f64,
    pub diameter_km: Option<f64>,
    /// 1-based line in the source file.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CraterCatalogue {
    pub records: Vec<CraterRecord>,
    pub lon_convention: LonConvention,
}

impl CraterCatalogue {
    pub fn to_sample(&self) -> Result<DirectionalSample> {
        let points = self
            .records
            .iter()
            .map(|r| UnitVector::normalize(lat_lon_to_vector(r.lat_deg, r.lon_deg).to_vec()))
            .collect::<Result<_>>()?;
        DirectionalSample::from_points(points)
    }
}

/// Result of [`parse_catalogue`].
#[derive(Debug, Clone)]
pub struct ParsedCatalogue {
    pub sample: DirectionalSample,
    /// Present for lat/lon input.
    pub catalogue: Option<CraterCatalogue>,
    /// Rows dropped under `skip_bad`, with line numbers.
    pub skipped: Vec<(usize, String)>,
}

/// (cos lat cos lon, cos lat sin lon, sin lat), angles in degrees.
pub fn lat_lon_to_vector(lat_deg: f64, lon_deg: f64) -> [f64; 3] {
    let (lat, lon) = (lat_deg.to_radians(), lon_deg.to_radians());
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

/// Inverse of [`lat_lon_to_vector`]; longitude in [0, 360).
pub fn vector_to_lat_lon(v: &[f64; 3]) -> (f64, f64) {
    let lat = v[2].clamp(-1.0, 1.0).asin().to_degrees();
    let lon = v[1].atan2(v[0]).to_degrees().rem_euclid(360.0);
    (lat, if lon >= 360.0 { 0.0 } else { lon })
}

const LAT_NAMES: [&str; 3] = ["lat", "latitude", "lat_deg"];
const LON_NAMES: [&str; 5] = ["lon", "long", "longitude", "lon_deg", "lng"];
const NAME_NAMES: [&str; 3] = ["name", "crater", "crater_name"];
const DIAMETER_NAMES: [&str; 4] = ["diameter", "diameter_km", "diam", "d_km"];

fn find_column(headers: &[String], explicit: &Option<String>, aliases: &[&str]) -> Result<Option<usize>> {
    if let Some(name) = explicit {
        return headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .map(Some)
            .ok_or_else(|| Error::domain(format!("column '{name}' not found in header")));
    }
    Ok(headers
        .iter()
        .position(|h| aliases.iter().any(|a| h.eq_ignore_ascii_case(a))))
}

fn parse_number(field: Option<&str>, what: &str) -> std::result::Result<f64, String> {
    let raw = field.ok_or_else(|| format!("missing {what}"))?;
    let v: f64 = raw.trim().parse().map_err(|_| format!("{what} '{raw}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} '{raw}' is not finite"))
    }
}

enum Row {
    Angles { name: String, lat: f64, lon: f64, diameter: Option<f64> },
    Cartesian(Vec<f64>),
}

/// Reads a catalogue. Any invalid row fails the whole parse, listing all
/// offending lines, unless `skip_bad` is set.
pub fn parse_catalogue(path: &Path, opts: &CatalogueOptions) -> Result<ParsedCatalogue> {
    let parse_err = |problems: Vec<(usize, String)>| Error::Parse {
        path: path.to_path_buf(),
        problems,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(vec![(1, e.to_string())]))?
        .iter()
        .map(str::to_string)
        .collect();
    let cols = &opts.columns;
    let (angle_cols, xyz_cols) = match opts.format {
        CatalogueFormat::Cartesian => {
            let idx: Vec<usize> = match &cols.cartesian {
                Some(names) => names
                    .iter()
                    .map(|n| find_column(&headers, &Some(n.clone()), &[]).map(Option::unwrap))
                    .collect::<Result<_>>()?,
                None => {
                    let named: Vec<usize> = ["x", "y", "z"]
                        .iter()
                        .filter_map(|n| headers.iter().position(|h| h.eq_ignore_ascii_case(n)))
                        .collect();
                    if named.len() == 3 {
                        named
                    } else {
                        (0..headers.len()).collect()
                    }
                }
            };
            if idx.len() < 2 {
                return Err(parse_err(vec![(1, "cartesian input needs at least 2 columns".into())]));
            }
            (None, idx)
        }
        fmt => {
            let lat = find_column(&headers, &cols.lat, &LAT_NAMES)?;
            let lon = find_column(&headers, &cols.lon, &LON_NAMES)?;
            let (lat, lon) = match (lat, lon) {
                (Some(a), Some(b)) => (a, b),
                _ if headers.len() >= 2 && cols.lat.is_none() && cols.lon.is_none() => {
                    // No recognizable names: take the first two columns in format order.
                    if fmt == CatalogueFormat::LonLatDeg {
                        (1, 0)
                    } else {
                        (0, 1)
                    }
                }
                _ => {
                    return Err(parse_err(vec![(1, "missing latitude/longitude columns".into())]));
                }
            };
            let name = find_column(&headers, &cols.name, &NAME_NAMES)?;
            let diameter = find_column(&headers, &cols.diameter, &DIAMETER_NAMES)?;
            (Some((lat, lon, name, diameter)), Vec::new())
        }
    };

    let mut good: Vec<(usize, Row)> = Vec::new();
    let mut problems: Vec<(usize, String)> = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                problems.push((line, e.to_string()));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = match angle_cols {
            Some((lat_i, lon_i, name_i, diam_i)) => (|| {
                let lat = parse_number(record.get(lat_i), "latitude")?;
                let lon = parse_number(record.get(lon_i), "longitude")?;
                if !(-90.0..=90.0).contains(&lat) {
                    return Err(format!("latitude {lat} outside [-90, 90]"));
                }
                if !(-180.0..360.0).contains(&lon) {
                    return Err(format!("longitude {lon} outside [-180, 360)"));
                }
                let diameter = match diam_i.and_then(|i| record.get(i)).filter(|s| !s.is_empty()) {
                    Some(raw) => {
                        let d = parse_number(Some(raw), "diameter")?;
                        if d <= 0.0 {
                            return Err(format!("diameter {d} is not positive"));
                        }
                        Some(d)
                    }
                    None => None,
                };
                let name = name_i.and_then(|i| record.get(i)).unwrap_or("").to_string();
                Ok(Row::Angles { name, lat, lon, diameter })
            })(),
            None => xyz_cols
                .iter()
                .map(|&i| parse_number(record.get(i), "coordinate"))
                .collect::<std::result::Result<Vec<f64>, String>>()
                .and_then(|c| {
                    UnitVector::from_unit(c.clone())
                        .map(|_| Row::Cartesian(c))
                        .map_err(|e| e.to_string())
                }),
        };
        match row {
            Ok(r) => good.push((line, r)),
            Err(msg) => problems.push((line, msg)),
        }
    }

    let lons: Vec<f64> = good
        .iter()
        .filter_map(|(_, r)| match r {
            Row::Angles { lon, .. } => Some(*lon),
            Row::Cartesian(_) => None,
        })
        .collect();
    let has_negative = lons.iter().any(|l| *l < 0.0);
    let has_above_180 = lons.iter().any(|l| *l > 180.0);
    if has_negative && has_above_180 {
        problems.push((0, "longitudes mix the [0,360) and (-180,180] conventions".into()));
        return Err(parse_err(problems));
    }
    if !problems.is_empty() && !opts.skip_bad {
        problems.sort_by_key(|p| p.0);
        return Err(parse_err(problems));
    }
    if good.is_empty() {
        return Err(parse_err(vec![(0, "no valid rows".into())]));
    }
    let convention = if has_negative {
        LonConvention::Signed180
    } else {
        LonConvention::East360
    };

    if angle_cols.is_some() {
        let records: Vec<CraterRecord> = good
            .into_iter()
            .map(|(line, r)| match r {
                Row::Angles { name, lat, lon, diameter } => CraterRecord {
                    name,
                    lat_deg: lat,
                    lon_deg: lon.rem_euclid(360.0),
                    diameter_km: diameter,
                    line,
                },
                Row::Cartesian(_) => unreachable!("mixed row kinds"),
            })
            .collect();
        let catalogue = CraterCatalogue {
            records,
            lon_convention: convention,
        };
        Ok(ParsedCatalogue {
            sample: catalogue.to_sample()?,
            catalogue: Some(catalogue),
            skipped: problems,
        })
    } else {
        let rows: Vec<Vec<f64>> = good
            .into_iter()
            .map(|(_, r)| match r {
                Row::Cartesian(c) => c,
                Row::Angles { .. } => unreachable!("mixed row kinds"),
            })
            .collect();
        let points = rows
            .into_iter()
            .map(UnitVector::from_unit)
            .collect::<Result<Vec<_>>>()?;
        Ok(ParsedCatalogue {
            sample: DirectionalSample::from_points(points)?,
            catalogue: None,
            skipped: problems,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Serialize, Deserialize)]
struct ResultsDocument {
    version: u32,
    outcomes: Vec<TestOutcome>,
}

const RESULTS_HEADER: [&str; 9] = ["test", "statistic", "p_value", "method", "replicates", "K", "seed", "q", "n"];

/// Serializes outcomes; JSON is {version, outcomes}. CSV omits directions.
pub fn render_results(outcomes: &[TestOutcome], format: OutputFormat) -> Result<Vec<u8>> {
    match format {
        OutputFormat::Json => {
            let doc = ResultsDocument {
                version: RESULTS_SCHEMA_VERSION,
                outcomes: outcomes.to_vec(),
            };
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            Ok(s.into_bytes())
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(RESULTS_HEADER)?;
            let opt = |v: Option<String>| v.unwrap_or_default();
            for o in outcomes {
                w.write_record([
                    o.test.as_str().to_string(),
                    o.statistic.to_string(),
                    o.p_value.to_string(),
                    o.method.as_str().to_string(),
                    opt(o.replicates.map(|v| v.to_string())),
                    opt(o.k.map(|v| v.to_string())),
                    opt(o.seed.map(|v| v.to_string())),
                    o.q.to_string(),
                    o.n.to_string(),
                ])?;
            }
            w.into_inner().map_err(|e| Error::Serde(e.to_string()))
        }
    }
}

/// Atomically writes outcomes to `path`.
pub fn write_results(outcomes: &[TestOutcome], path: &Path, format: OutputFormat) -> Result<()> {
    atomic_write(path, &render_results(outcomes, format)?)
}

pub fn read_results_json(path: &Path) -> Result<Vec<TestOutcome>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ResultsDocument = serde_json::from_str(&text)?;
    if doc.version != RESULTS_SCHEMA_VERSION {
        return Err(Error::Serde(format!("results schema version {} is not supported", doc.version)));
    }
    Ok(doc.outcomes)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<TestOutcome>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(RESULTS_HEADER) {
        return Err(Error::Serde(format!("{}: unexpected results header", path.display())));
    }
    let bad = |what: &str, v: &str| Error::Serde(format!("{}: bad {what} '{v}'", path.display()));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize, what: &str| f(i).parse::<f64>().map_err(|_| bad(what, f(i)));
        let opt_u64 = |i: usize, what: &str| -> Result<Option<u64>> {
            match f(i) {
                "" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(what, v)),
            }
        };
        out.push(TestOutcome {
            test: TestName::parse(f(0)).ok_or_else(|| bad("test", f(0)))?,
            statistic: num(1, "statistic")?,
            p_value: num(2, "p_value")?,
            method: Method::parse(f(3)).ok_or_else(|| bad("method", f(3)))?,
            replicates: opt_u64(4, "replicates")?.map(|v| v as usize),
            k: opt_u64(5, "K")?.map(|v| v as usize),
            seed: opt_u64(6, "seed")?,
            q: f(7).parse().map_err(|_| bad("q", f(7)))?,
            n: f(8).parse().map_err(|_| bad("n", f(8)))?,
            directions: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn anchors() {
        assert_eq!(lat_lon_to_vector(0.0, 0.0), [1.0, 0.0, 0.0]);
        let pole = lat_lon_to_vector(90.0, 123.0);
        assert!(pole[0].abs() < 1e-15 && pole[1].abs() < 1e-15 && pole[2] == 1.0);
        let (lat, lon) = vector_to_lat_lon(&lat_lon_to_vector(-33.5, 271.25));
        assert!((lat + 33.5).abs() < 1e-12 && (lon - 271.25).abs() < 1e-12);
    }

    #[test]
    fn parses_named_columns_and_signed_longitudes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.csv", "name,diameter_km,lat,lon\nA,10.5,0,0\nB,,90,-45\nC,3,10,-180\n");
        let parsed = parse_catalogue(&p, &CatalogueOptions::new(CatalogueFormat::LonLatDeg)).unwrap();
        let cat = parsed.catalogue.unwrap();
        assert_eq!(cat.lon_convention, LonConvention::Signed180);
        assert_eq!(cat.records[1].lon_deg, 315.0);
        assert_eq!(cat.records[2].lon_deg, 180.0);
        assert_eq!(cat.records[1].diameter_km, None);
        assert_eq!(cat.records[0].line, 2);
        assert_eq!(parsed.sample.n(), 3);
        assert_eq!(parsed.sample.point(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn unnamed_columns_follow_the_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.csv", "a,b\n90,0\n");
        let ll = parse_catalogue(&p, &CatalogueOptions::new(CatalogueFormat::LatLonDeg)).unwrap();
        assert_eq!(ll.sample.point(0)[2], 1.0);
        let p = write(&dir, "d.csv", "a,b\n0,90\n");
        let lo = parse_catalogue(&p, &CatalogueOptions::new(CatalogueFormat::LonLatDeg)).unwrap();
        assert_eq!(lo.sample.point(0)[2], 1.0);
    }

    #[test]
    fn bad_rows_are_listed_or_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.csv", "lat,lon\n0,0\n95,10\nabc,3\n1,2\n");
        let err = parse_catalogue(&p, &CatalogueOptions::new(CatalogueFormat::LatLonDeg)).unwrap_err();
        match err {
            Error::Parse { problems, .. } => {
                assert_eq!(problems.iter().map(|p| p.0).collect::<Vec<_>>(), vec![3, 4]);
            }
            e => panic!("{e:?}"),
        }
        let mut opts = CatalogueOptions::new(CatalogueFormat::LatLonDeg);
        opts.skip_bad = true;
        let ok = parse_catalogue(&p, &opts).unwrap();
        assert_eq!(ok.sample.n(), 2);
        assert_eq!(ok.skipped.len(), 2);
        let p = write(&dir, "m.csv", "lat,lon\n0,-10\n0,200\n");
        assert!(parse_catalogue(&p, &opts).is_err());
        let p = write(&dir, "n.csv", "lat\n0\n");
        assert!(parse_catalogue(&p, &opts).is_err());
    }

    #[test]
    fn cartesian_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "x.csv", "id,x,y,z\n1,0,0,1\n2,0.6,0.8,0\n");
        let s = parse_catalogue(&p, &CatalogueOptions::new(CatalogueFormat::Cartesian)).unwrap();
        assert_eq!(s.sample.n(), 2);
        assert!(s.catalogue.is_none());
        let p = write(&dir, "y.csv", "x,y,z\n0,0,2\n");
        assert!(parse_catalogue(&p, &CatalogueOptions::new(CatalogueFormat::Cartesian)).is_err());
    }

    fn outcome() -> TestOutcome {
        TestOutcome {
            test: TestName::Cvm,
            statistic: 0.123_456_789_012_345_67,
            p_value: 1.0 / 3.0,
            method: Method::MonteCarlo,
            replicates: Some(999),
            k: None,
            seed: Some(u64::MAX),
            q: 2,
            n: 50,
            directions: None,
        }
    }

    #[test]
    fn results_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let mut b = outcome();
        b.test = TestName::GineFn;
        b.method = Method::Asymptotic;
        b.k = Some(10_000);
        b.seed = None;
        b.replicates = None;
        let all = vec![outcome(), b];
        write_results(&all, &p, OutputFormat::Csv).unwrap();
        assert_eq!(read_results_csv(&p).unwrap(), all);
        let j = dir.path().join("r.json");
        write_results(&all, &j, OutputFormat::Json).unwrap();
        assert_eq!(read_results_json(&j).unwrap(), all);
        let text = std::fs::read_to_string(&j).unwrap();
        for key in ["\"version\": 1", "statistic", "p_value", "monte-carlo", "seed"] {
            assert!(text.contains(key), "{key}");
        }
        write_results(&[], &j, OutputFormat::Json).unwrap();
        assert!(read_results_json(&j).unwrap().is_empty());
        write_results(&[], &p, OutputFormat::Csv).unwrap();
        assert!(read_results_csv(&p).unwrap().is_empty());
    }
}
