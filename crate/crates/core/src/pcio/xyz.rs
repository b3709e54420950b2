//! Plain text `x y z` format, one point per line, `#` comments.

use super::RawPointCloud;
use crate::{Error, Result};

pub fn read_xyz(bytes: &[u8]) -> Result<RawPointCloud> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse_byte(e.valid_up_to() as u64, "XYZ file is not valid UTF-8"))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut p = [0.0f64; 3];
        let mut tokens = line.split_whitespace();
        for v in p.iter_mut() {
            let tok = tokens
                .next()
                .ok_or_else(|| Error::parse_line(line_no, "expected three coordinates"))?;
            *v = tok
                .parse()
                .map_err(|_| Error::parse_line(line_no, format!("'{tok}' is not a number")))?;
        }
        if tokens.next().is_some() {
            return Err(Error::parse_line(
                line_no,
                "expected exactly three coordinates",
            ));
        }
        points.push(p);
    }
    Ok(RawPointCloud::new(points))
}

pub fn write_xyz(cloud: &RawPointCloud) -> Vec<u8> {
    use std::fmt::Write;
    let mut s = String::with_capacity(cloud.len() * 24);
    for p in &cloud.points {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    s.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Location;

    #[test]
    fn two_lines() {
        let pc = read_xyz(b"0 0 0\n1 2 3").unwrap();
        assert_eq!(pc.points, vec![[0.0; 3], [1.0, 2.0, 3.0]]);
    }

    #[test]
    fn comments_and_blank_lines() {
        let pc = read_xyz(b"# header\n\n  1.5\t2 -3  \n").unwrap();
        assert_eq!(pc.points, vec![[1.5, 2.0, -3.0]]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = read_xyz(b"0 0 0\n1 2\n").unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                location: Location::Line(2),
                ..
            }
        ));
        let err = read_xyz(b"0 0 zero\n").unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                location: Location::Line(1),
                ..
            }
        ));
    }

    #[test]
    fn round_trip_is_exact() {
        let cloud = RawPointCloud::new(vec![[0.1, 1e-300, -7.25], [123456.789, 0.0, 3.0]]);
        assert_eq!(read_xyz(&write_xyz(&cloud)).unwrap(), cloud);
    }
}
