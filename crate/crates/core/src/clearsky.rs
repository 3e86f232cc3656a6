//! Clear-sky irradiance baseline.
//!
//! Solar position uses the NOAA fractional-year series for declination and
//! the equation of time. Global horizontal irradiance follows Haurwitz,
//! scaled by orbital eccentricity and an air-mass exponential in Linke
//! turbidity referenced to `TL = 3`. Direct normal irradiance uses the
//! Kasten–Young air mass, the Kasten Rayleigh optical thickness fit and the
//! Linke attenuation `exp(−0.8662·TL·AM·δR)`, capped so that the beam
//! projected on the horizontal never exceeds GHI.

use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::data::{format_timestamp, STEP_MINUTES};
use crate::error::{Error, Result};
use crate::numfmt::g17;

pub const SOLAR_CONSTANT: f64 = 1361.0;
pub const DEFAULT_TURBIDITY: f64 = 3.0;
const REFERENCE_TURBIDITY: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteLocation {
    pub latitude: f64,
    /// Degrees east.
    pub longitude: f64,
    /// Hours added to UTC to obtain the local clock. No DST inference.
    pub utc_offset: f64,
}

impl SiteLocation {
    pub fn new(latitude: f64, longitude: f64, utc_offset: f64) -> Result<Self> {
        let site = Self {
            latitude,
            longitude,
            utc_offset,
        };
        site.validate()?;
        Ok(site)
    }

    /// Orlando, Florida on Eastern Standard Time.
    pub fn orlando() -> Self {
        Self {
            latitude: 28.54,
            longitude: -81.38,
            utc_offset: -5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::InvalidParameter(format!("latitude {} outside [-90, 90]", self.latitude)));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::InvalidParameter(format!(
                "longitude {} outside [-180, 180]",
                self.longitude
            )));
        }
        if !self.utc_offset.is_finite() || self.utc_offset.abs() > 14.0 {
            return Err(Error::InvalidParameter(format!("utc offset {} out of range", self.utc_offset)));
        }
        Ok(())
    }
}

/// Angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarPosition {
    pub zenith: f64,
    pub declination: f64,
    pub hour_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearSkyPoint {
    pub timestamp: NaiveDateTime,
    pub solar_zenith: f64,
    pub ghi: f64,
    pub dni: f64,
}

struct OrbitTerms {
    declination: f64,
    equation_of_time_min: f64,
    day_of_year: u32,
}

fn orbit_terms(utc: NaiveDateTime) -> OrbitTerms {
    let doy = utc.ordinal();
    let hour = utc.num_seconds_from_midnight() as f64 / 3600.0;
    let g = 2.0 * std::f64::consts::PI / 365.0 * (doy as f64 - 1.0 + (hour - 12.0) / 24.0);
    let equation_of_time_min = 229.18
        * (0.000075 + 0.001868 * g.cos() - 0.032077 * g.sin() - 0.014615 * (2.0 * g).cos()
            - 0.040849 * (2.0 * g).sin());
    let declination = 0.006918 - 0.399912 * g.cos() + 0.070257 * g.sin() - 0.006758 * (2.0 * g).cos()
        + 0.000907 * (2.0 * g).sin()
        - 0.002697 * (3.0 * g).cos()
        + 0.00148 * (3.0 * g).sin();
    OrbitTerms {
        declination,
        equation_of_time_min,
        day_of_year: doy,
    }
}

fn to_utc(site: &SiteLocation, t: NaiveDateTime) -> NaiveDateTime {
    t - Duration::milliseconds((site.utc_offset * 3_600_000.0).round() as i64)
}

/// Solar position at local clock time `t`.
pub fn solar_position(site: &SiteLocation, t: NaiveDateTime) -> SolarPosition {
    let utc = to_utc(site, t);
    let orbit = orbit_terms(utc);
    let utc_minutes = utc.num_seconds_from_midnight() as f64 / 60.0;
    let true_solar_minutes = utc_minutes + orbit.equation_of_time_min + 4.0 * site.longitude;
    let mut hour_angle = true_solar_minutes / 4.0 - 180.0;
    hour_angle = (hour_angle + 180.0).rem_euclid(360.0) - 180.0;

    let lat = site.latitude.to_radians();
    let cos_z = lat.sin() * orbit.declination.sin()
        + lat.cos() * orbit.declination.cos() * hour_angle.to_radians().cos();
    SolarPosition {
        zenith: cos_z.clamp(-1.0, 1.0).acos().to_degrees(),
        declination: orbit.declination.to_degrees(),
        hour_angle,
    }
}

/// Local clock time of solar noon on `date`, to the second.
pub fn solar_noon(site: &SiteLocation, date: NaiveDate) -> NaiveDateTime {
    let midnight = date.and_hms_opt(0, 0, 0).expect("valid midnight");
    let mut noon = midnight + Duration::hours(12);
    for _ in 0..3 {
        let eot = orbit_terms(to_utc(site, noon)).equation_of_time_min;
        let minutes = 720.0 - 4.0 * site.longitude - eot + 60.0 * site.utc_offset;
        noon = midnight + Duration::seconds((minutes * 60.0).round() as i64);
    }
    noon
}

/// Kasten–Young relative optical air mass.
pub fn air_mass(zenith_deg: f64) -> f64 {
    1.0 / (zenith_deg.to_radians().cos() + 0.50572 * (96.07995 - zenith_deg).powf(-1.6364))
}

fn rayleigh_thickness(am: f64) -> f64 {
    if am <= 20.0 {
        1.0 / (6.6296 + 1.7513 * am - 0.1202 * am.powi(2) + 0.0065 * am.powi(3) - 0.00013 * am.powi(4))
    } else {
        1.0 / (10.4 + 0.718 * am)
    }
}

fn eccentricity(day_of_year: u32) -> f64 {
    1.0 + 0.033 * (2.0 * std::f64::consts::PI * day_of_year as f64 / 365.0).cos()
}

/// GHI and DNI in W/m² at local clock time `t`; turbidity must lie in [1, 10].
pub fn clear_sky(site: &SiteLocation, t: NaiveDateTime, turbidity: f64) -> Result<ClearSkyPoint> {
    site.validate()?;
    if !(1.0..=10.0).contains(&turbidity) {
        return Err(Error::InvalidParameter(format!("turbidity {turbidity} outside [1, 10]")));
    }
    let pos = solar_position(site, t);
    let mut point = ClearSkyPoint {
        timestamp: t,
        solar_zenith: pos.zenith,
        ghi: 0.0,
        dni: 0.0,
    };
    if pos.zenith >= 90.0 {
        return Ok(point);
    }
    let cos_z = pos.zenith.to_radians().cos();
    let am = air_mass(pos.zenith);
    let e0 = eccentricity(orbit_terms(to_utc(site, t)).day_of_year);

    let haurwitz = 1098.0 * cos_z * (-0.057 / cos_z).exp();
    let ghi = haurwitz * e0 * (-0.0387 * am * (turbidity - REFERENCE_TURBIDITY)).exp();
    let beam = SOLAR_CONSTANT * e0 * (-0.8662 * turbidity * am * rayleigh_thickness(am)).exp();

    point.ghi = ghi.max(0.0);
    point.dni = beam.min(point.ghi / cos_z).max(0.0);
    Ok(point)
}

/// Clear-sky values on the 15-minute lattice from `start` to `end` inclusive.
pub fn clear_sky_series(
    site: &SiteLocation,
    start: NaiveDateTime,
    end: NaiveDateTime,
    turbidity: f64,
) -> Result<Vec<ClearSkyPoint>> {
    let mut out = Vec::new();
    let mut t = start;
    while t <= end {
        out.push(clear_sky(site, t, turbidity)?);
        t += Duration::minutes(STEP_MINUTES);
    }
    Ok(out)
}

/// Writes `timestamp,zenith_deg,ghi_wm2,dni_wm2`.
pub fn write_clear_sky_csv<W: Write>(points: &[ClearSkyPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "zenith_deg", "ghi_wm2", "dni_wm2"])?;
    for p in points {
        w.write_record([
            format_timestamp(p.timestamp),
            g17(p.solar_zenith),
            g17(p.ghi),
            g17(p.dni),
        ])?;
    }
    w.flush()?;
    Ok(())
}
