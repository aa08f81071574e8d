//! UTC instants, leap seconds and sidereal time.
//!
//! All instants are `chrono::DateTime<Utc>`. chrono itself has no notion of
//! leap seconds, so elapsed time between two instants is corrected with the
//! compiled-in [`LEAP_SECONDS`] table. To update it, append the new
//! `(effective date, TAI-UTC)` row published in IERS Bulletin C.

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc};

/// `(year, month, day, TAI-UTC seconds)` effective at 00:00 UTC of the date.
pub const LEAP_SECONDS: &[(i32, u32, u32, i32)] = &[
    (1972, 1, 1, 10),
    (1972, 7, 1, 11),
    (1973, 1, 1, 12),
    (1974, 1, 1, 13),
    (1975, 1, 1, 14),
    (1976, 1, 1, 15),
    (1977, 1, 1, 16),
    (1978, 1, 1, 17),
    (1979, 1, 1, 18),
    (1980, 1, 1, 19),
    (1981, 7, 1, 20),
    (1982, 7, 1, 21),
    (1983, 7, 1, 22),
    (1985, 7, 1, 23),
    (1988, 1, 1, 24),
    (1990, 1, 1, 25),
    (1991, 1, 1, 26),
    (1992, 7, 1, 27),
    (1993, 7, 1, 28),
    (1994, 7, 1, 29),
    (1996, 1, 1, 30),
    (1997, 7, 1, 31),
    (1999, 1, 1, 32),
    (2006, 1, 1, 33),
    (2009, 1, 1, 34),
    (2012, 7, 1, 35),
    (2015, 7, 1, 36),
    (2017, 1, 1, 37),
];

/// TAI-UTC in seconds at `t` (0 before 1972).
pub fn tai_minus_utc(t: &DateTime<Utc>) -> i32 {
    let date = t.date_naive();
    LEAP_SECONDS
        .iter()
        .rev()
        .find(|&&(y, m, d, _)| date >= NaiveDate::from_ymd_opt(y, m, d).expect("valid table date"))
        .map_or(0, |row| row.3)
}

/// SI seconds elapsed from `from` to `to`, counting leap seconds.
pub fn elapsed_seconds(from: &DateTime<Utc>, to: &DateTime<Utc>) -> f64 {
    let naive = (*to - *from)
        .num_nanoseconds()
        .map(|ns| ns as f64 * 1e-9)
        .unwrap_or_else(|| (*to - *from).num_milliseconds() as f64 * 1e-3);
    naive + f64::from(tai_minus_utc(to) - tai_minus_utc(from))
}

/// The instant `seconds` SI seconds after `t` (nanosecond resolution).
pub fn add_seconds(t: &DateTime<Utc>, seconds: f64) -> DateTime<Utc> {
    let naive = *t + Duration::nanoseconds((seconds * 1e9).round() as i64);
    let leap = tai_minus_utc(&naive) - tai_minus_utc(t);
    if leap == 0 {
        naive
    } else {
        naive - Duration::seconds(i64::from(leap))
    }
}

/// Julian date of a UTC instant (UT1 is taken equal to UTC).
pub fn julian_date(t: &DateTime<Utc>) -> f64 {
    let unix = t.timestamp() as f64 + f64::from(t.timestamp_subsec_nanos()) * 1e-9;
    unix / 86_400.0 + 2_440_587.5
}

/// Greenwich mean sidereal time (IAU-82), radians in [0, 2π).
pub fn gmst(t: &DateTime<Utc>) -> f64 {
    gmst_jd(julian_date(t))
}

/// [`gmst`] for a UTC Julian date.
pub fn gmst_jd(jd: f64) -> f64 {
    let tu = (jd - 2_451_545.0) / 36_525.0;
    let seconds = 67_310.548_41
        + (876_600.0 * 3600.0 + 8_640_184.812_866) * tu
        + 0.093_104 * tu * tu
        - 6.2e-6 * tu * tu * tu;
    (seconds.rem_euclid(86_400.0) / 240.0).to_radians()
}

/// ISO-8601 with microsecond precision and a `Z` suffix.
pub fn format_iso(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%S%.6fZ").to_string()
}

/// Parses RFC 3339 / ISO-8601 UTC text.
pub fn parse_utc(text: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
    DateTime::parse_from_rfc3339(text.trim()).map(|t| t.with_timezone(&Utc))
}

/// Builds the instant for a TLE epoch (two-digit year, fractional day of year).
pub(crate) fn from_tle_epoch(year: i32, day_of_year: f64) -> Option<DateTime<Utc>> {
    let whole_day = day_of_year.trunc() as u32;
    let seconds = day_of_year.fract() * 86_400.0;
    let mut whole_seconds = seconds.trunc() as i64;
    // a TLE epoch resolves ~1 ms; rounding to the microsecond removes f64 noise
    let mut nanos = (seconds.fract() * 1e6).round() as i64 * 1000;
    if nanos >= 1_000_000_000 {
        nanos -= 1_000_000_000;
        whole_seconds += 1;
    }
    let date = NaiveDate::from_yo_opt(year, whole_day)?;
    let midnight = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0)?);
    Some(midnight + Duration::seconds(whole_seconds) + Duration::nanoseconds(nanos))
}

/// Calendar helper used by presets and fixtures: `(y, m, d, h, min, s)`.
pub fn utc(y: i32, m: u32, d: u32, h: u32, min: u32, s: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, h, min, s)
        .single()
        .expect("valid calendar instant")
}

/// Day of year plus fraction, the inverse of the TLE epoch encoding.
pub fn fractional_day_of_year(t: &DateTime<Utc>) -> f64 {
    f64::from(t.ordinal())
        + (f64::from(t.num_seconds_from_midnight()) + f64::from(t.nanosecond()) * 1e-9)
            / 86_400.0
}
