use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use super::{check_header, open, parse_f64, reader};
use crate::error::{OdError, Result};
use crate::matrix::format_sig12;

pub(crate) const HEADER: [&str; 5] = ["id", "name", "lat", "lon", "has_barrier"];

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub has_barrier: bool,
}

impl Station {
    pub fn new(id: impl Into<String>, name: impl Into<String>, lat: f64, lon: f64, has_barrier: bool) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(OdError::param("station.id", "must be nonempty"));
        }
        if !(lat.is_finite() && lat.abs() <= 90.0) {
            return Err(OdError::param("station.lat", format!("{id}: |lat| must be at most 90, got {lat}")));
        }
        if !(lon.is_finite() && lon.abs() <= 180.0) {
            return Err(OdError::param("station.lon", format!("{id}: |lon| must be at most 180, got {lon}")));
        }
        Ok(Self {
            id,
            name: name.into(),
            lat,
            lon,
            has_barrier,
        })
    }
}

fn parse_bool(path: &str, line: usize, s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(OdError::schema(path, format!("line {line}: has_barrier must be true|false|1|0, got '{s}'"))),
    }
}

pub fn read_stations<R: Read>(r: R, path: &str) -> Result<Vec<Station>> {
    let mut rdr = reader(r);
    check_header(path, rdr.headers()?, &HEADER)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != HEADER.len() {
            return Err(OdError::schema(path, format!("line {line}: expected 5 fields, got {}", rec.len())));
        }
        let lat = parse_f64(path, line, "lat", &rec[2])?;
        let lon = parse_f64(path, line, "lon", &rec[3])?;
        let station = Station::new(&rec[0], &rec[1], lat, lon, parse_bool(path, line, &rec[4])?)
            .map_err(|e| OdError::schema(path, format!("line {line}: {e}")))?;
        if !seen.insert(station.id.clone()) {
            return Err(OdError::schema(path, format!("line {line}: duplicate station id '{}'", station.id)));
        }
        out.push(station);
    }
    if out.is_empty() {
        return Err(OdError::EmptyNetwork);
    }
    Ok(out)
}

/// `id,name,lat,lon,has_barrier`, in file order.
pub fn load_stations(path: &Path) -> Result<Vec<Station>> {
    read_stations(open(path)?, &path.display().to_string())
}

pub fn write_stations<W: Write>(w: W, stations: &[Station]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(HEADER)?;
    for s in stations {
        w.write_record([
            s.id.clone(),
            s.name.clone(),
            format_sig12(s.lat),
            format_sig12(s.lon),
            s.has_barrier.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const WHARFS: &str = "id,name,lat,lon,has_barrier
W1,Circular Quay,-33.8610,151.2108,true
W2,Garden Island,-33.8610,151.2290,false
W3,Darling Point,-33.8690,151.2380,false
W4,Double Bay,-33.8740,151.2420,false
W5,Rose Bay,-33.8700,151.2630,true
W6,Watsons Bay,-33.8440,151.2810,true
";

    #[test]
    fn loads_six_wharfs() {
        let s = read_stations(WHARFS.as_bytes(), "w.csv").unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s[4].name, "Rose Bay");
        assert!(s[0].has_barrier && !s[1].has_barrier);
    }

    #[test]
    fn empty_file_is_empty_network() {
        assert!(matches!(read_stations("id,name,lat,lon,has_barrier\n".as_bytes(), "e"), Err(OdError::EmptyNetwork)));
    }

    #[test]
    fn rejects_bad_rows() {
        let bad_lat = "id,name,lat,lon,has_barrier\nA,a,91,0,true\n";
        assert!(matches!(read_stations(bad_lat.as_bytes(), "x"), Err(OdError::Schema { .. })));
        let dup = "id,name,lat,lon,has_barrier\nA,a,1,0,true\nA,b,2,0,false\n";
        let err = read_stations(dup.as_bytes(), "x").unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
        let header = "id,name,lon,lat,has_barrier\nA,a,1,0,true\n";
        assert!(read_stations(header.as_bytes(), "x").is_err());
    }

    #[test]
    fn write_read_round_trip() {
        let s = read_stations(WHARFS.as_bytes(), "w.csv").unwrap();
        let mut buf = Vec::new();
        write_stations(&mut buf, &s).unwrap();
        assert_eq!(read_stations(buf.as_slice(), "b").unwrap(), s);
    }
}
