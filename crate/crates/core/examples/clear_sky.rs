//! Solar elevation and Solis clear-sky GHI over the summer solstice at Ajaccio.

use chrono::{Duration, TimeZone, Utc};
use ghi_committee::clearsky::{clear_sky_series, solar_elevation, solis_ghi, SiteLocation, SolisParams};

fn main() -> ghi_committee::Result<()> {
    let site = SiteLocation::ajaccio();
    let params = SolisParams::default();
    let t0 = Utc.with_ymd_and_hms(2006, 6, 21, 0, 0, 0).unwrap();
    let hours: Vec<_> = (0..24).map(|h| t0 + Duration::hours(h)).collect();
    let cls = clear_sky_series(&site, &params, &hours)?;

    println!("hour (UTC)  elevation (deg)  clear-sky GHI (Wh/m2)");
    for (t, g) in hours.iter().zip(cls.values()) {
        let e = solar_elevation(&site, *t).to_degrees();
        println!("{:>10}  {:>15.2}  {:>21.1}", t.format("%H:%M"), e, g);
    }
    println!("daily total: {:.0} Wh/m2", cls.values().iter().sum::<f64>());

    let fixed = SolisParams::new(1300.0, 0.3, 1.0)?;
    println!("I0' = 1300, tau = 0.3, g = 1, h = 30 deg: {:.3}", solis_ghi(&fixed, 30f64.to_radians()));
    Ok(())
}
