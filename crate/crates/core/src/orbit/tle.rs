//! Two-line element set parsing.
//!
//! Columns below are 1-based, as in the format description. Every error
//! carries the line (1 or 2) and column where decoding failed.

use super::{OrbitError, OrbitalElements};
use crate::time;

const LINE_LENGTH: usize = 69;

/// Mod-10 checksum over the first 68 columns: digits count their value,
/// minus signs count one, everything else zero.
pub fn checksum(line: &str) -> u8 {
    let sum: u32 = line
        .bytes()
        .take(LINE_LENGTH - 1)
        .map(|b| match b {
            b'0'..=b'9' => u32::from(b - b'0'),
            b'-' => 1,
            _ => 0,
        })
        .sum();
    (sum % 10) as u8
}

struct Line<'a> {
    number: u8,
    text: &'a str,
}

impl<'a> Line<'a> {
    fn new(number: u8, raw: &'a str) -> Result<Self, OrbitError> {
        let text = raw.trim_end_matches(['\r', '\n']);
        let text = if text.len() > LINE_LENGTH {
            text.trim_end()
        } else {
            text
        };
        if text.len() != LINE_LENGTH || !text.is_ascii() {
            return Err(OrbitError::LineLength {
                line: number,
                length: text.chars().count(),
            });
        }
        let expected = checksum(text);
        let last = text.as_bytes()[LINE_LENGTH - 1];
        if !last.is_ascii_digit() {
            return Err(OrbitError::FieldSyntax {
                line: number,
                column: LINE_LENGTH,
                field: "checksum",
                text: (last as char).to_string(),
            });
        }
        let found = last - b'0';
        if found != expected {
            return Err(OrbitError::ChecksumMismatch {
                line: number,
                column: LINE_LENGTH,
                expected,
                found,
            });
        }
        Ok(Self { number, text })
    }

    /// Columns `first..=last` (1-based, inclusive).
    fn field(&self, first: usize, last: usize) -> &'a str {
        &self.text[first - 1..last]
    }

    fn err(&self, column: usize, field: &'static str, text: &str) -> OrbitError {
        OrbitError::FieldSyntax {
            line: self.number,
            column,
            field,
            text: text.to_string(),
        }
    }

    fn float(&self, first: usize, last: usize, name: &'static str) -> Result<f64, OrbitError> {
        let raw = self.field(first, last);
        raw.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(first, name, raw))
    }

    fn integer(&self, first: usize, last: usize, name: &'static str, blank_ok: bool) -> Result<u32, OrbitError> {
        let raw = self.field(first, last);
        let trimmed = raw.trim();
        if trimmed.is_empty() && blank_ok {
            return Ok(0);
        }
        trimmed.parse::<u32>().map_err(|_| self.err(first, name, raw))
    }

    /// Fixed-point fraction with the leading "0." implied, e.g. `1859667`.
    fn implied_fraction(&self, first: usize, last: usize, name: &'static str) -> Result<f64, OrbitError> {
        let raw = self.field(first, last);
        let digits = raw.trim();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.err(first, name, raw));
        }
        format!("0.{digits}")
            .parse::<f64>()
            .map_err(|_| self.err(first, name, raw))
    }

    /// Implied-decimal exponential notation, e.g. ` 28098-4` = 0.28098e-4.
    fn implied_exponent(&self, first: usize, last: usize, name: &'static str) -> Result<f64, OrbitError> {
        let raw = self.field(first, last);
        let bytes = raw.as_bytes();
        let (mantissa, exponent) = raw.split_at(raw.len() - 2);
        let sign = match bytes[0] {
            b'-' => -1.0,
            b'+' | b' ' | b'0'..=b'9' => 1.0,
            _ => return Err(self.err(first, name, raw)),
        };
        let digits = mantissa.trim_start_matches(['-', '+', ' ']);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.err(first, name, raw));
        }
        let m: f64 = format!("0.{digits}")
            .parse()
            .map_err(|_| self.err(first, name, raw))?;
        let e: i32 = exponent
            .trim()
            .parse()
            .map_err(|_| self.err(last - 1, name, raw))?;
        Ok(sign * m * 10f64.powi(e))
    }

    /// Catalog number; accepts the Alpha-5 extension (`A0000` = 100000).
    fn catalog(&self) -> Result<u32, OrbitError> {
        let raw = self.field(3, 7);
        let trimmed = raw.trim();
        let first = trimmed.chars().next().ok_or_else(|| self.err(3, "catalog_number", raw))?;
        if first.is_ascii_alphabetic() {
            let letter = first.to_ascii_uppercase();
            if letter == 'I' || letter == 'O' {
                return Err(self.err(3, "catalog_number", raw));
            }
            let mut value = u32::from(letter as u8 - b'A') + 10;
            if letter > 'I' {
                value -= 1;
            }
            if letter > 'O' {
                value -= 1;
            }
            let rest: u32 = trimmed[1..]
                .parse()
                .map_err(|_| self.err(4, "catalog_number", raw))?;
            Ok(value * 10_000 + rest)
        } else {
            trimmed.parse().map_err(|_| self.err(3, "catalog_number", raw))
        }
    }
}

fn normalize_degrees(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Parses one element set from its two data lines.
pub fn parse_tle(line1: &str, line2: &str) -> Result<OrbitalElements, OrbitError> {
    parse_named(None, line1, line2)
}

fn parse_named(name: Option<String>, line1: &str, line2: &str) -> Result<OrbitalElements, OrbitError> {
    let l1 = Line::new(1, line1)?;
    let l2 = Line::new(2, line2)?;
    if l1.field(1, 1) != "1" {
        return Err(l1.err(1, "line_number", l1.field(1, 1)));
    }
    if l2.field(1, 1) != "2" {
        return Err(l2.err(1, "line_number", l2.field(1, 1)));
    }
    let catalog_number = l1.catalog()?;
    if l2.catalog()? != catalog_number {
        return Err(l2.err(3, "catalog_number", l2.field(3, 7)));
    }
    let classification = l1.field(8, 8).chars().next().unwrap_or('U');

    let year = l1.integer(19, 20, "epoch_year", false)? as i32;
    let year = if year < 57 { 2000 + year } else { 1900 + year };
    let day = l1.float(21, 32, "epoch_day")?;
    if !(1.0..367.0).contains(&day) {
        return Err(l1.err(21, "epoch_day", l1.field(21, 32)));
    }
    let epoch = time::from_tle_epoch(year, day).ok_or_else(|| l1.err(21, "epoch_day", l1.field(21, 32)))?;

    let eccentricity = l2.implied_fraction(27, 33, "eccentricity")?;
    let mean_motion = l2.float(53, 63, "mean_motion")?;
    if mean_motion <= 0.0 {
        return Err(l2.err(53, "mean_motion", l2.field(53, 63)));
    }
    let inclination = l2.float(9, 16, "inclination")?;
    if !(0.0..=180.0).contains(&inclination) {
        return Err(l2.err(9, "inclination", l2.field(9, 16)));
    }

    Ok(OrbitalElements {
        name,
        catalog_number,
        classification,
        international_designator: l1.field(10, 17).trim().to_string(),
        epoch,
        mean_motion_dot: l1.float(34, 43, "mean_motion_dot")?,
        mean_motion_ddot: l1.implied_exponent(45, 52, "mean_motion_ddot")?,
        bstar: l1.implied_exponent(54, 61, "bstar")?,
        ephemeris_type: l1.integer(63, 63, "ephemeris_type", true)? as u8,
        element_set_number: l1.integer(65, 68, "element_set_number", true)?,
        inclination,
        raan: normalize_degrees(l2.float(18, 25, "raan")?),
        eccentricity,
        arg_perigee: normalize_degrees(l2.float(35, 42, "arg_perigee")?),
        mean_anomaly: normalize_degrees(l2.float(44, 51, "mean_anomaly")?),
        mean_motion,
        revolution_number: l2.integer(64, 68, "revolution_number", true)?,
        element_set_checksum_ok: true,
    })
}

/// Parses a file of element sets, each optionally preceded by a name line
/// (`0 NAME` or bare text). Blank lines are ignored.
pub fn parse_tle_file(text: &str) -> Result<Vec<OrbitalElements>, OrbitError> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let mut name = None;
        if !lines[i].starts_with("1 ") {
            let raw = lines[i].trim();
            name = Some(raw.strip_prefix("0 ").unwrap_or(raw).trim().to_string());
            i += 1;
        }
        let (Some(l1), Some(l2)) = (lines.get(i), lines.get(i + 1)) else {
            return Err(OrbitError::MissingLine);
        };
        out.push(parse_named(name, l1, l2)?);
        i += 2;
    }
    if out.is_empty() {
        return Err(OrbitError::MissingLine);
    }
    Ok(out)
}
