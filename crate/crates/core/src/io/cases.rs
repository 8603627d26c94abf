//! Case-data ingestion: the ECDC daily-case CSV schema, a normalising
//! fetcher, and the bundled South Korea series.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use crate::error::{EvidenceError, Result};

pub const BUNDLED_SOUTH_KOREA: &str = include_str!("../../data/south_korea_cases.csv");
pub const SERIES_START: &str = "2019-12-31";
pub const SERIES_END: &str = "2020-07-18";
pub const ECDC_URL: &str = "https://opendata.ecdc.europa.eu/covid19/casedistribution/csv";

#[derive(Debug, Clone)]
pub struct CaseSeries {
    pub dates: Vec<NaiveDate>,
    pub cases: Vec<f64>,
}

impl CaseSeries {
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// First `days` days (the desk profile truncation).
    pub fn truncated(&self, days: usize) -> CaseSeries {
        let n = days.min(self.len());
        CaseSeries {
            dates: self.dates[..n].to_vec(),
            cases: self.cases[..n].to_vec(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,cases\n");
        for (d, c) in self.dates.iter().zip(&self.cases) {
            out.push_str(&format!("{d},{c}\n"));
        }
        out
    }
}

pub fn sha256_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    hex_of(&h.finalize())
}

fn hex_of(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_iso(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| EvidenceError::Data(format!("bad date '{s}': {e}")))
}

/// Parse a normalised `date,cases` CSV (sorted or not; duplicates rejected).
pub fn parse_normalized(text: &str) -> Result<CaseSeries> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| EvidenceError::Data(e.to_string()))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["date", "cases"] {
        return Err(EvidenceError::Data(format!(
            "normalised case csv needs header date,cases; got {cols:?}"
        )));
    }
    let mut map: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EvidenceError::Data(e.to_string()))?;
        let date = parse_iso(rec.get(0).unwrap_or(""))?;
        let cases: f64 = rec
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| EvidenceError::Data(format!("bad case count: {e}")))?;
        if map.insert(date, cases).is_some() {
            return Err(EvidenceError::Data(format!("duplicate date {date}")));
        }
    }
    if map.is_empty() {
        return Err(EvidenceError::Data("empty case series".into()));
    }
    // fill any gaps with zeros
    let (first, last) = (*map.keys().next().unwrap(), *map.keys().last().unwrap());
    let mut dates = Vec::new();
    let mut cases = Vec::new();
    let mut d = first;
    while d <= last {
        dates.push(d);
        cases.push(*map.get(&d).unwrap_or(&0.0));
        d = d.succ_opt().expect("date range");
    }
    Ok(CaseSeries { dates, cases })
}

/// Normalise an ECDC-schema CSV: filter one country, truncate to the study
/// range, sort ascending, fill missing dates with zeros. Duplicate dates for
/// the country are an error (ambiguous), not a silent merge.
pub fn normalize_ecdc(text: &str, country: &str) -> Result<CaseSeries> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| EvidenceError::Data(e.to_string()))?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| EvidenceError::Data(format!("ECDC schema drift: missing column '{name}'")))
    };
    let date_col = find("dateRep")?;
    let cases_col = find("cases")?;
    let country_col = find("countriesAndTerritories")?;

    let start = parse_iso(SERIES_START)?;
    let end = parse_iso(SERIES_END)?;
    let mut map: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EvidenceError::Data(e.to_string()))?;
        if rec.get(country_col).map(str::trim) != Some(country) {
            continue;
        }
        let raw_date = rec.get(date_col).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, "%d/%m/%Y")
            .or_else(|_| NaiveDate::parse_from_str(raw_date, "%Y-%m-%d"))
            .map_err(|e| EvidenceError::Data(format!("bad ECDC date '{raw_date}': {e}")))?;
        if date < start || date > end {
            continue;
        }
        let cases: f64 = rec
            .get(cases_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| EvidenceError::Data(format!("bad ECDC case count: {e}")))?;
        if map.insert(date, cases.max(0.0)).is_some() {
            return Err(EvidenceError::Data(format!(
                "duplicate ECDC rows for {country} on {date}"
            )));
        }
    }
    if map.is_empty() {
        return Err(EvidenceError::Data(format!(
            "no rows for country '{country}' in the study range"
        )));
    }
    let mut dates = Vec::new();
    let mut cases = Vec::new();
    let mut d = *map.keys().next().unwrap();
    let last = *map.keys().last().unwrap();
    while d <= last {
        dates.push(d);
        cases.push(*map.get(&d).unwrap_or(&0.0));
        d = d.succ_opt().expect("date range");
    }
    Ok(CaseSeries { dates, cases })
}

/// Fetch the raw CSV from a URL (used by `fetch-cases` when online).
pub fn fetch_url(url: &str) -> Result<String> {
    let resp = ureq::get(url)
        .timeout(std::time::Duration::from_secs(120))
        .call()
        .map_err(|e| EvidenceError::Fetch(format!("GET {url}: {e}")))?;
    resp.into_string()
        .map_err(|e| EvidenceError::Fetch(format!("reading body: {e}")))
}

/// The bundled South Korea series (normalised form).
pub fn bundled_south_korea() -> CaseSeries {
    parse_normalized(BUNDLED_SOUTH_KOREA).expect("bundled series parses")
}

/// Load a series: an explicit normalised CSV path wins, else the bundle.
pub fn load_series(path: Option<&Path>) -> Result<(CaseSeries, String)> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok((parse_normalized(&text)?, sha256_hex(&text)))
        }
        None => Ok((bundled_south_korea(), sha256_hex(BUNDLED_SOUTH_KOREA))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_series_loads() {
        let s = bundled_south_korea();
        assert_eq!(s.len(), 201);
        assert_eq!(s.dates[0].to_string(), "2019-12-31");
        assert_eq!(s.dates.last().unwrap().to_string(), "2020-07-18");
    }

    #[test]
    fn ecdc_rows_filtered_sorted_and_gap_filled() {
        let csv = "dateRep,cases,countriesAndTerritories\n\
                   03/03/2020,5,South_Korea\n\
                   01/03/2020,2,South_Korea\n\
                   01/03/2020,9,Germany\n";
        let s = normalize_ecdc(csv, "South_Korea").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.cases, vec![2.0, 0.0, 5.0]);
    }

    #[test]
    fn duplicate_dates_are_an_error() {
        let csv = "dateRep,cases,countriesAndTerritories\n\
                   01/03/2020,2,South_Korea\n\
                   01/03/2020,3,South_Korea\n";
        assert!(normalize_ecdc(csv, "South_Korea").is_err());
    }

    #[test]
    fn schema_drift_names_missing_column() {
        let csv = "day,cases,countriesAndTerritories\n01/03/2020,2,South_Korea\n";
        let err = normalize_ecdc(csv, "South_Korea").unwrap_err();
        assert!(err.to_string().contains("dateRep"));
    }

    #[test]
    fn out_of_range_rows_truncated() {
        let csv = "dateRep,cases,countriesAndTerritories\n\
                   30/12/2019,7,South_Korea\n\
                   31/12/2019,1,South_Korea\n\
                   19/07/2020,9,South_Korea\n\
                   02/01/2020,3,South_Korea\n";
        let s = normalize_ecdc(csv, "South_Korea").unwrap();
        assert_eq!(s.dates[0].to_string(), "2019-12-31");
        assert_eq!(s.cases, vec![1.0, 0.0, 3.0]);
    }
}
