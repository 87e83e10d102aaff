//! Fixed-column two-line element sets.

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};

use super::OrbitError;

pub const LINE_LEN: usize = 69;

/// One parsed element set. Mean elements are kept in TLE units (degrees,
/// revolutions per day).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLineElements {
    pub name: Option<String>,
    pub catalog_number: u32,
    pub classification: char,
    /// Columns 10-17 of line 1, trimmed.
    pub international_designator: String,
    pub epoch: DateTime<Utc>,
    /// First derivative of mean motion divided by two (rev/day²).
    pub mean_motion_dot: f64,
    /// Second derivative of mean motion divided by six (rev/day³).
    pub mean_motion_ddot: f64,
    /// Drag term (1/earth radii).
    pub bstar: f64,
    pub ephemeris_type: u8,
    pub element_set_number: u32,
    pub inclination: f64,
    pub raan: f64,
    pub eccentricity: f64,
    pub arg_perigee: f64,
    pub mean_anomaly: f64,
    /// Revolutions per day.
    pub mean_motion: f64,
    pub revolution_number: u32,
}

/// Modulo-10 checksum over the first 68 characters: digits count their
/// value, '-' counts one, everything else zero.
pub fn checksum(line: &str) -> u8 {
    let sum: u32 = line
        .chars()
        .take(LINE_LEN - 1)
        .map(|c| match c {
            '0'..='9' => c as u32 - '0' as u32,
            '-' => 1,
            _ => 0,
        })
        .sum();
    (sum % 10) as u8
}

fn field<'a>(line: &'a str, line_no: u8, range: std::ops::Range<usize>, name: &'static str) -> Result<&'a str, OrbitError> {
    line.get(range).ok_or(OrbitError::BadFieldFormat { line: line_no, field: name })
}

fn parse_num<T: std::str::FromStr>(s: &str, line_no: u8, name: &'static str) -> Result<T, OrbitError> {
    s.trim().parse::<T>().map_err(|_| OrbitError::BadFieldFormat { line: line_no, field: name })
}

/// Packed exponent notation, e.g. `-11606-4` → −0.11606e-4.
fn parse_packed_exp(s: &str, line_no: u8, name: &'static str) -> Result<f64, OrbitError> {
    let bad = || OrbitError::BadFieldFormat { line: line_no, field: name };
    let t = s.trim();
    if t.is_empty() {
        return Ok(0.0);
    }
    let (sign, rest) = match t.as_bytes()[0] {
        b'-' => (-1.0, &t[1..]),
        b'+' => (1.0, &t[1..]),
        _ => (1.0, t),
    };
    if rest.len() < 3 {
        return Err(bad());
    }
    let (mantissa, exp) = rest.split_at(rest.len() - 2);
    if !mantissa.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let m: f64 = format!("0.{mantissa}").parse().map_err(|_| bad())?;
    let e: i32 = exp.parse().map_err(|_| bad())?;
    Ok(sign * m * 10f64.powi(e))
}

fn format_packed_exp(v: f64) -> String {
    if v == 0.0 {
        return " 00000-0".to_string();
    }
    let sign = if v < 0.0 { '-' } else { ' ' };
    let a = v.abs();
    let mut exp = a.log10().floor() as i32 + 1;
    let mut digits = (a / 10f64.powi(exp) * 1e5).round() as u64;
    if digits >= 100_000 {
        digits /= 10;
        exp += 1;
    }
    let esign = if exp < 0 { '-' } else { '+' };
    format!("{sign}{digits:05}{esign}{}", exp.unsigned_abs().min(9))
}

/// `.00002182` style field with a sign column, 10 characters wide.
fn format_ndot(v: f64) -> String {
    let sign = if v < 0.0 { '-' } else { ' ' };
    let body = format!("{:.8}", v.abs().min(0.99999999));
    format!("{sign}{}", body.trim_start_matches('0'))
}

fn epoch_from_tle(year2: u32, day: f64) -> Option<DateTime<Utc>> {
    let year = if year2 < 57 { 2000 + year2 as i32 } else { 1900 + year2 as i32 };
    if !(1.0..367.0).contains(&day) {
        return None;
    }
    let start = Utc.with_ymd_and_hms(year, 1, 1, 0, 0, 0).single()?;
    let nanos = ((day - 1.0) * 86_400e9).round() as i64;
    Some(start + Duration::nanoseconds(nanos))
}

fn epoch_to_tle(epoch: &DateTime<Utc>) -> (u32, f64) {
    let year = epoch.year();
    let start = Utc.with_ymd_and_hms(year, 1, 1, 0, 0, 0).unwrap();
    let secs = (*epoch - start).num_nanoseconds().unwrap_or(0) as f64 * 1e-9;
    ((year.rem_euclid(100)) as u32, 1.0 + secs / 86_400.0)
}

fn check_line(line: &str, line_no: u8) -> Result<(), OrbitError> {
    if !line.is_ascii() || line.len() != LINE_LEN {
        return Err(OrbitError::LineLength { line: line_no, len: line.chars().count() });
    }
    let expected = checksum(line);
    let found = line.as_bytes()[LINE_LEN - 1];
    if !found.is_ascii_digit() || found - b'0' != expected {
        return Err(OrbitError::ChecksumMismatch { line: line_no, expected, found: found as char });
    }
    if line.as_bytes()[0] != b'0' + line_no {
        return Err(OrbitError::BadFieldFormat { line: line_no, field: "line number" });
    }
    Ok(())
}

/// Parses one element set. Both lines must be exactly 69 characters and
/// pass the checksum.
pub fn parse_tle(line1: &str, line2: &str) -> Result<TwoLineElements, OrbitError> {
    check_line(line1, 1)?;
    check_line(line2, 2)?;

    let catalog_number: u32 = parse_num(field(line1, 1, 2..7, "catalog number")?, 1, "catalog number")?;
    let catalog2: u32 = parse_num(field(line2, 2, 2..7, "catalog number")?, 2, "catalog number")?;
    if catalog_number != catalog2 {
        return Err(OrbitError::BadFieldFormat { line: 2, field: "catalog number mismatch" });
    }
    let classification = line1.as_bytes()[7] as char;
    let international_designator = field(line1, 1, 9..17, "international designator")?.trim().to_string();
    let year2: u32 = parse_num(field(line1, 1, 18..20, "epoch year")?, 1, "epoch year")?;
    let day: f64 = parse_num(field(line1, 1, 20..32, "epoch day")?, 1, "epoch day")?;
    let epoch = epoch_from_tle(year2, day).ok_or(OrbitError::BadFieldFormat { line: 1, field: "epoch day" })?;
    let mean_motion_dot: f64 = parse_num(field(line1, 1, 33..43, "mean motion dot")?, 1, "mean motion dot")?;
    let mean_motion_ddot = parse_packed_exp(field(line1, 1, 44..52, "mean motion ddot")?, 1, "mean motion ddot")?;
    let bstar = parse_packed_exp(field(line1, 1, 53..61, "bstar")?, 1, "bstar")?;
    let eph = field(line1, 1, 62..63, "ephemeris type")?.trim();
    let ephemeris_type: u8 = if eph.is_empty() { 0 } else { parse_num(eph, 1, "ephemeris type")? };
    let element_set_number: u32 = parse_num(field(line1, 1, 64..68, "element set number")?, 1, "element set number")?;

    let inclination: f64 = parse_num(field(line2, 2, 8..16, "inclination")?, 2, "inclination")?;
    let raan: f64 = parse_num(field(line2, 2, 17..25, "raan")?, 2, "raan")?;
    let ecc_digits = field(line2, 2, 26..33, "eccentricity")?;
    if !ecc_digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(OrbitError::BadFieldFormat { line: 2, field: "eccentricity" });
    }
    let eccentricity: f64 = parse_num(&format!("0.{ecc_digits}"), 2, "eccentricity")?;
    let arg_perigee: f64 = parse_num(field(line2, 2, 34..42, "argument of perigee")?, 2, "argument of perigee")?;
    let mean_anomaly: f64 = parse_num(field(line2, 2, 43..51, "mean anomaly")?, 2, "mean anomaly")?;
    let mean_motion: f64 = parse_num(field(line2, 2, 52..63, "mean motion")?, 2, "mean motion")?;
    let rev = field(line2, 2, 63..68, "revolution number")?.trim();
    let revolution_number: u32 = if rev.is_empty() { 0 } else { parse_num(rev, 2, "revolution number")? };

    if !(0.0..=180.0).contains(&inclination) {
        return Err(OrbitError::BadFieldFormat { line: 2, field: "inclination" });
    }
    if !(mean_motion > 0.0) {
        return Err(OrbitError::BadFieldFormat { line: 2, field: "mean motion" });
    }

    Ok(TwoLineElements {
        name: None,
        catalog_number,
        classification,
        international_designator,
        epoch,
        mean_motion_dot,
        mean_motion_ddot,
        bstar,
        ephemeris_type,
        element_set_number,
        inclination,
        raan,
        eccentricity,
        arg_perigee,
        mean_anomaly,
        mean_motion,
        revolution_number,
    })
}

fn with_checksum(mut body: String) -> String {
    debug_assert_eq!(body.len(), LINE_LEN - 1);
    let c = checksum(&body);
    body.push((b'0' + c) as char);
    body
}

/// Renders the element set back into the standard column layout, with
/// fresh checksums. Values are rounded to each field's resolution.
pub fn render_tle(tle: &TwoLineElements) -> (String, String) {
    let (year2, day) = epoch_to_tle(&tle.epoch);
    let line1 = format!(
        "1 {:05}{} {:<8} {:02}{:012.8} {} {} {} {} {:>4}",
        tle.catalog_number % 100_000,
        tle.classification,
        tle.international_designator,
        year2,
        day,
        format_ndot(tle.mean_motion_dot),
        format_packed_exp(tle.mean_motion_ddot),
        format_packed_exp(tle.bstar),
        tle.ephemeris_type % 10,
        tle.element_set_number % 10_000,
    );
    let ecc = ((tle.eccentricity * 1e7).round() as u64).min(9_999_999);
    let line2 = format!(
        "2 {:05} {:>8.4} {:>8.4} {:07} {:>8.4} {:>8.4} {:>11.8}{:>5}",
        tle.catalog_number % 100_000,
        tle.inclination,
        tle.raan,
        ecc,
        tle.arg_perigee,
        tle.mean_anomaly,
        tle.mean_motion,
        tle.revolution_number % 100_000,
    );
    (with_checksum(line1), with_checksum(line2))
}

/// Reads every element set from a text file. Title lines (a bare name or
/// `0 NAME`) before line 1 are kept as the set's name.
pub fn parse_tle_file(text: &str) -> Result<Vec<TwoLineElements>, OrbitError> {
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end()).filter(|l| !l.is_empty()).collect();
    let mut out = Vec::new();
    let mut name: Option<String> = None;
    let mut i = 0;
    while i < lines.len() {
        let l = lines[i];
        if l.starts_with("1 ") && i + 1 < lines.len() && lines[i + 1].starts_with("2 ") {
            let mut tle = parse_tle(l, lines[i + 1])?;
            tle.name = name.take();
            out.push(tle);
            i += 2;
        } else if l.starts_with("1 ") || l.starts_with("2 ") {
            return Err(OrbitError::BadFieldFormat { line: if l.starts_with('1') { 2 } else { 1 }, field: "missing companion line" });
        } else {
            name = Some(l.strip_prefix("0 ").unwrap_or(l).trim().to_string());
            i += 1;
        }
    }
    Ok(out)
}
