//! Solar geometry and the simplified Solis clear-sky model.
//!
//! Solar position follows the low-cost Fourier-series formulation for
//! declination, equation of time and eccentricity (accuracy about ±0.5° in
//! elevation), which is plenty for a normalizer. The clear-sky model is the
//! single-expression simplified Solis form
//!
//! ```text
//! GHI_cs = I0' · exp(−τ_g / sin^g(h)) · sin(h)
//! ```
//!
//! with `h` the solar elevation.

use std::f64::consts::PI;

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::data::{check_hourly, ClearSkySeries};
use crate::error::{Error, Result};

/// Solar constant used for the default `i0_prime`, W·m⁻².
pub const SOLAR_CONSTANT: f64 = 1367.0;

/// Geographic location of the measurement site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteLocation {
    /// Degrees north, in [-90, 90].
    pub latitude: f64,
    /// Degrees east, in [-180, 180].
    pub longitude: f64,
}

impl SiteLocation {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self> {
        let site = SiteLocation { latitude, longitude };
        site.validate()?;
        Ok(site)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::InvalidParameter(format!("latitude {} outside [-90, 90]", self.latitude)));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::InvalidParameter(format!("longitude {} outside [-180, 180]", self.longitude)));
        }
        Ok(())
    }

    /// Ajaccio, Corsica (41°55'N, 8°44'E).
    pub fn ajaccio() -> Self {
        SiteLocation { latitude: 41.9167, longitude: 8.7333 }
    }
}

/// Parameters of the simplified Solis model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolisParams {
    /// Enhanced extraterrestrial irradiance I0', W·m⁻².
    pub i0_prime: f64,
    /// Global total atmospheric optical depth τ_g.
    pub tau_g: f64,
    /// Fitting exponent g applied to sin(h) in the attenuation term.
    pub g_exponent: f64,
    /// Multiply `i0_prime` by the Sun–Earth distance correction of the day
    /// when building a series.
    pub eccentricity_correction: bool,
}

impl Default for SolisParams {
    fn default() -> Self {
        SolisParams { i0_prime: SOLAR_CONSTANT, tau_g: 0.27, g_exponent: 1.0, eccentricity_correction: true }
    }
}

impl SolisParams {
    pub fn new(i0_prime: f64, tau_g: f64, g_exponent: f64) -> Result<Self> {
        let params = SolisParams { i0_prime, tau_g, g_exponent, eccentricity_correction: false };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("i0_prime", self.i0_prime), ("tau_g", self.tau_g), ("g_exponent", self.g_exponent)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Parameters with `i0_prime` scaled for the Sun–Earth distance at `time`.
    fn at(&self, time: DateTime<Utc>) -> SolisParams {
        let mut p = *self;
        if self.eccentricity_correction {
            p.i0_prime *= eccentricity_factor(day_angle(time));
        }
        p
    }
}

/// Fractional year angle in radians.
fn day_angle(time: DateTime<Utc>) -> f64 {
    let days_in_year = if time.date_naive().leap_year() { 366.0 } else { 365.0 };
    let hour = time.hour() as f64 + time.minute() as f64 / 60.0 + time.second() as f64 / 3600.0;
    2.0 * PI / days_in_year * (time.ordinal0() as f64 + (hour - 12.0) / 24.0)
}

fn eccentricity_factor(g: f64) -> f64 {
    1.000110 + 0.034221 * g.cos() + 0.001280 * g.sin() + 0.000719 * (2.0 * g).cos() + 0.000077 * (2.0 * g).sin()
}

/// Solar declination in radians.
pub fn declination(time: DateTime<Utc>) -> f64 {
    let g = day_angle(time);
    0.006918 - 0.399912 * g.cos() + 0.070257 * g.sin() - 0.006758 * (2.0 * g).cos() + 0.000907 * (2.0 * g).sin()
        - 0.002697 * (3.0 * g).cos()
        + 0.00148 * (3.0 * g).sin()
}

/// Equation of time in minutes.
pub fn equation_of_time(time: DateTime<Utc>) -> f64 {
    let g = day_angle(time);
    229.18
        * (0.000075 + 0.001868 * g.cos() - 0.032077 * g.sin() - 0.014615 * (2.0 * g).cos() - 0.040849 * (2.0 * g).sin())
}

/// Sun elevation above the horizon in radians; negative at night.
pub fn solar_elevation(site: &SiteLocation, time: DateTime<Utc>) -> f64 {
    let decl = declination(time);
    let minutes_utc = time.hour() as f64 * 60.0 + time.minute() as f64 + time.second() as f64 / 60.0;
    let true_solar_time = minutes_utc + equation_of_time(time) + 4.0 * site.longitude;
    let hour_angle = (true_solar_time / 4.0 - 180.0).to_radians();
    let lat = site.latitude.to_radians();
    let sin_el = lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos();
    sin_el.clamp(-1.0, 1.0).asin()
}

/// Clear-sky GHI for a given elevation (radians). Zero when the sun is at or
/// below the horizon.
pub fn solis_ghi(params: &SolisParams, elevation: f64) -> f64 {
    if elevation <= 0.0 {
        return 0.0;
    }
    let s = elevation.sin();
    params.i0_prime * (-params.tau_g / s.powf(params.g_exponent)).exp() * s
}

/// Clear-sky GHI at every timestamp.
pub fn clear_sky_series(
    site: &SiteLocation,
    params: &SolisParams,
    timestamps: &[DateTime<Utc>],
) -> Result<ClearSkySeries> {
    site.validate()?;
    params.validate()?;
    check_hourly(timestamps)?;
    let values = timestamps.iter().map(|&t| solis_ghi(&params.at(t), solar_elevation(site, t))).collect();
    Ok(ClearSkySeries::new_unchecked(timestamps.to_vec(), values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    /// Independent reference: NOAA general solar position (Meeus-based,
    /// Julian-century series).
    fn noaa_elevation_deg(lat: f64, lon: f64, t: DateTime<Utc>) -> f64 {
        let jd = t.timestamp() as f64 / 86400.0 + 2440587.5;
        let jc = (jd - 2451545.0) / 36525.0;
        let l0 = (280.46646 + jc * (36000.76983 + jc * 0.0003032)).rem_euclid(360.0);
        let m = 357.52911 + jc * (35999.05029 - 0.0001537 * jc);
        let e = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc);
        let mr = m.to_radians();
        let c = mr.sin() * (1.914602 - jc * (0.004817 + 0.000014 * jc))
            + (2.0 * mr).sin() * (0.019993 - 0.000101 * jc)
            + (3.0 * mr).sin() * 0.000289;
        let true_long = l0 + c;
        let omega = 125.04 - 1934.136 * jc;
        let app_long = true_long - 0.00569 - 0.00478 * omega.to_radians().sin();
        let mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0;
        let obliq = mean_obliq + 0.00256 * omega.to_radians().cos();
        let decl = (obliq.to_radians().sin() * app_long.to_radians().sin()).asin();
        let y = (obliq.to_radians() / 2.0).tan().powi(2);
        let l0r = l0.to_radians();
        let eot = 4.0
            * (y * (2.0 * l0r).sin() - 2.0 * e * mr.sin() + 4.0 * e * y * mr.sin() * (2.0 * l0r).cos()
                - 0.5 * y * y * (4.0 * l0r).sin()
                - 1.25 * e * e * (2.0 * mr).sin())
            .to_degrees();
        let minutes = t.hour() as f64 * 60.0 + t.minute() as f64 + t.second() as f64 / 60.0;
        let tst = (minutes + eot + 4.0 * lon).rem_euclid(1440.0);
        let ha = if tst / 4.0 < 0.0 { tst / 4.0 + 180.0 } else { tst / 4.0 - 180.0 };
        let latr = lat.to_radians();
        let zen = (latr.sin() * decl.sin() + latr.cos() * decl.cos() * ha.to_radians().cos()).acos();
        90.0 - zen.to_degrees()
    }

    #[test]
    fn equator_equinox_noon_is_near_zenith() {
        let site = SiteLocation::new(0.0, 0.0).unwrap();
        let t = Utc.with_ymd_and_hms(2024, 3, 20, 12, 7, 0).unwrap();
        let el = solar_elevation(&site, t).to_degrees();
        assert!((el - 90.0).abs() < 1.0, "elevation {el}");
    }

    #[test]
    fn winter_midnight_is_below_horizon() {
        let site = SiteLocation::ajaccio();
        let t = Utc.with_ymd_and_hms(2006, 12, 21, 23, 25, 0).unwrap();
        assert!(solar_elevation(&site, t) < 0.0);
        let south = SiteLocation::new(-33.9, 18.4).unwrap();
        let t = Utc.with_ymd_and_hms(2006, 6, 21, 22, 45, 0).unwrap();
        assert!(solar_elevation(&south, t) < 0.0);
    }

    #[test]
    fn ajaccio_summer_noon_matches_reference() {
        let site = SiteLocation::new(41.92, 8.73).unwrap();
        let t = Utc.with_ymd_and_hms(2006, 6, 21, 12, 0, 0).unwrap();
        let reference = noaa_elevation_deg(41.92, 8.73, t);
        let el = solar_elevation(&site, t).to_degrees();
        assert!((reference - 70.3).abs() < 0.3, "reference {reference}");
        assert!((el - reference).abs() < 0.5, "{el} vs {reference}");
    }

    #[test]
    fn elevation_tracks_reference_over_a_year() {
        let site = SiteLocation::ajaccio();
        let start = Utc.with_ymd_and_hms(2006, 1, 1, 0, 0, 0).unwrap();
        let mut worst: f64 = 0.0;
        for k in (0..8760).step_by(7) {
            let t = start + Duration::hours(k);
            let reference = noaa_elevation_deg(site.latitude, site.longitude, t);
            worst = worst.max((solar_elevation(&site, t).to_degrees() - reference).abs());
        }
        assert!(worst < 0.5, "worst deviation {worst}°");
    }

    #[test]
    fn solis_examples() {
        let p = SolisParams::new(1300.0, 0.3, 1.0).unwrap();
        assert_eq!(solis_ghi(&p, 0.0), 0.0);
        assert_eq!(solis_ghi(&p, -0.2), 0.0);
        // 1300·exp(−0.6)·0.5
        let v = solis_ghi(&p, 30f64.to_radians());
        assert!((v - 356.727_563).abs() < 1e-3, "{v}");
        let thin = SolisParams::new(1300.0, 1e-12, 1.0).unwrap();
        assert!((solis_ghi(&thin, PI / 2.0) - 1300.0).abs() < 1e-6);
    }

    #[test]
    fn solis_monotone_and_zero_iff_below_horizon() {
        let p = SolisParams::default();
        let mut prev = 0.0;
        for k in 0..1000 {
            let e = -0.3 + (PI / 2.0 + 0.3) * k as f64 / 999.0;
            let v = solis_ghi(&p, e);
            assert!(v >= prev, "not monotone at {e}");
            assert_eq!(v == 0.0, e <= 0.0);
            prev = v;
        }
    }

    #[test]
    fn solis_scales_linearly_in_i0() {
        let p = SolisParams::new(1000.0, 0.4, 1.3).unwrap();
        let q = SolisParams { i0_prime: 2500.0, ..p };
        for e in [0.01, 0.3, 1.0, 1.5] {
            let (a, b) = (solis_ghi(&q, e), 2.5 * solis_ghi(&p, e));
            assert!((a - b).abs() <= 1e-14 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn invalid_params_and_site_rejected() {
        assert!(SolisParams::new(0.0, 0.3, 1.0).is_err());
        assert!(SolisParams::new(1300.0, -0.1, 1.0).is_err());
        assert!(SolisParams::new(1300.0, 0.3, 0.0).is_err());
        assert!(SiteLocation::new(91.0, 0.0).is_err());
        assert!(SiteLocation::new(0.0, -181.0).is_err());
    }

    #[test]
    fn series_has_night_block_and_one_daytime_bump() {
        let site = SiteLocation::ajaccio();
        let start = Utc.with_ymd_and_hms(2006, 3, 10, 0, 0, 0).unwrap();
        let stamps: Vec<_> = (0..24).map(|h| start + Duration::hours(h)).collect();
        let cs = clear_sky_series(&site, &SolisParams::default(), &stamps).unwrap();
        for (t, v) in stamps.iter().zip(cs.values()) {
            assert_eq!(*v == 0.0, solar_elevation(&site, *t) <= 0.0);
        }
        let positive: Vec<usize> = (0..24).filter(|&i| cs.values()[i] > 0.0).collect();
        let (first, last) = (positive[0], *positive.last().unwrap());
        assert_eq!(positive.len(), last - first + 1, "daytime block not contiguous");
        let day = &cs.values()[first..=last];
        let peak = day.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert!(day[..=peak].windows(2).all(|w| w[0] <= w[1]));
        assert!(day[peak..].windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn series_edge_cases() {
        let site = SiteLocation::ajaccio();
        let cs = clear_sky_series(&site, &SolisParams::default(), &[]).unwrap();
        assert!(cs.is_empty());
        let t = Utc.with_ymd_and_hms(2006, 3, 10, 0, 0, 0).unwrap();
        let err = clear_sky_series(&site, &SolisParams::default(), &[t, t]).unwrap_err();
        assert!(matches!(err, Error::NonMonotonicTimestamps { index: 1 }));
    }
}
