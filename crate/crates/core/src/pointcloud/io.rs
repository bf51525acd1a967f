use std::path::Path;

use thiserror::Error;

use super::{Point3, PointCloud};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unsupported PCD: {0}")]
    UnsupportedPcd(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    Pcd,
}

impl CloudFormat {
    /// Guesses the format from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pcd") => CloudFormat::Pcd,
            _ => CloudFormat::Csv,
        }
    }
}

/// Outcome of parsing a cloud file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub cloud: PointCloud,
    /// Rows whose coordinates were not all finite.
    pub dropped_non_finite: usize,
}

pub fn read_cloud(path: &Path, format: Option<CloudFormat>) -> Result<IngestReport, ParseError> {
    let text = std::fs::read_to_string(path)?;
    match format.unwrap_or_else(|| CloudFormat::from_path(path)) {
        CloudFormat::Csv => parse_csv(&text),
        CloudFormat::Pcd => parse_pcd(&text),
    }
}

fn malformed(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        message: message.into(),
    }
}

/// Parses `x,y,z[,intensity]` rows. A non-numeric first row is taken as a header.
/// Blank lines and `#` comments are skipped. Intensity is discarded.
pub fn parse_csv(text: &str) -> Result<IngestReport, ParseError> {
    let mut raw = Vec::new();
    let mut seen_row = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let first_row = !seen_row;
        seen_row = true;
        if first_row && fields[0].parse::<f64>().is_err() {
            continue;
        }
        if !(3..=4).contains(&fields.len()) {
            return Err(malformed(
                lineno,
                format!("expected 3 or 4 comma-separated fields, found {}", fields.len()),
            ));
        }
        let mut xyz = [0.0; 4];
        for (k, f) in fields.iter().enumerate() {
            xyz[k] = f
                .parse::<f64>()
                .map_err(|_| malformed(lineno, format!("field {} is not a number: {f:?}", k + 1)))?;
        }
        raw.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }
    let (cloud, dropped_non_finite) = PointCloud::from_points_lossy(raw);
    Ok(IngestReport {
        cloud,
        dropped_non_finite,
    })
}

/// Parses the ASCII subset of PCD v0.7: a header whose FIELDS include x, y and z,
/// followed by `DATA ascii` rows. Other fields are ignored.
pub fn parse_pcd(text: &str) -> Result<IngestReport, ParseError> {
    let mut lines = text.lines().enumerate();
    let mut columns: Option<[usize; 3]> = None;
    let mut n_fields = 0;
    let mut data_started = false;
    for (i, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default().to_ascii_uppercase();
        match key.as_str() {
            "FIELDS" => {
                let names: Vec<&str> = parts.collect();
                n_fields = names.len();
                let find = |n: &str| names.iter().position(|f| f.eq_ignore_ascii_case(n));
                columns = match (find("x"), find("y"), find("z")) {
                    (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                    _ => {
                        return Err(ParseError::UnsupportedPcd(
                            "FIELDS must contain x, y and z".into(),
                        ))
                    }
                };
            }
            "DATA" => {
                let kind = parts.next().unwrap_or_default();
                if !kind.eq_ignore_ascii_case("ascii") {
                    return Err(ParseError::UnsupportedPcd(format!(
                        "line {}: only DATA ascii is supported, found {kind:?}",
                        i + 1
                    )));
                }
                data_started = true;
                break;
            }
            _ => {}
        }
    }
    let Some(columns) = columns else {
        return Err(ParseError::UnsupportedPcd("missing FIELDS line".into()));
    };
    if !data_started {
        return Err(ParseError::UnsupportedPcd("missing DATA line".into()));
    }

    let mut raw = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != n_fields {
            return Err(malformed(
                i + 1,
                format!("expected {n_fields} values, found {}", values.len()),
            ));
        }
        let get = |c: usize| {
            values[c]
                .parse::<f64>()
                .map_err(|_| malformed(i + 1, format!("value {:?} is not a number", values[c])))
        };
        raw.push(Point3::new(get(columns[0])?, get(columns[1])?, get(columns[2])?));
    }
    let (cloud, dropped_non_finite) = PointCloud::from_points_lossy(raw);
    Ok(IngestReport {
        cloud,
        dropped_non_finite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_header_and_intensity() {
        let rep = parse_csv("x,y,z,intensity\n1,2,3,10\n4,5,6,11\n").unwrap();
        assert_eq!(rep.cloud.len(), 2);
        assert_eq!(rep.cloud.points[1], Point3::new(4.0, 5.0, 6.0));
    }

    #[test]
    fn csv_without_header() {
        let rep = parse_csv("1, 2, 3\n\n# comment\n4,5,6\n").unwrap();
        assert_eq!(rep.cloud.len(), 2);
    }

    #[test]
    fn csv_drops_nan_rows() {
        let rep = parse_csv("1,2,3\nnan,0,0\n0,inf,0\n").unwrap();
        assert_eq!(rep.cloud.len(), 1);
        assert_eq!(rep.dropped_non_finite, 2);
    }

    #[test]
    fn csv_error_names_the_row() {
        let err = parse_csv("1,2,3\n4,five,6\n").unwrap_err();
        match err {
            ParseError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_csv("1,2,3\n1,2\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2:"));
    }

    #[test]
    fn empty_csv_is_an_empty_cloud() {
        assert!(parse_csv("").unwrap().cloud.is_empty());
    }

    #[test]
    fn ascii_pcd() {
        let text = "# .PCD v0.7\nVERSION 0.7\nFIELDS intensity x y z\nSIZE 4 4 4 4\n\
                    TYPE F F F F\nCOUNT 1 1 1 1\nWIDTH 2\nHEIGHT 1\nPOINTS 2\nDATA ascii\n\
                    5 1 2 3\n6 4 5 6\n";
        let rep = parse_pcd(text).unwrap();
        assert_eq!(rep.cloud.points, vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn binary_pcd_is_rejected() {
        let text = "FIELDS x y z\nDATA binary\n";
        assert!(matches!(parse_pcd(text), Err(ParseError::UnsupportedPcd(_))));
    }
}
