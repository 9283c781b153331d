//! Least-squares molecular clock: distance to the reference year against
//! elapsed days, with a 95% mean-response band and an SVG plot.
//!
//! cargo run --example clock_fit -- [OBSERVATIONS_CSV] [DEGREE] [SVG_OUT]

use chrono::NaiveDate;
use mutarate::pipeline::fit_observations;
use mutarate::rate::{fit_polynomial, observations_from_csv, predict};

// Kimura distances from the 2007 representative; later years dated July 1.
const REFERENCE: &str = "label,date,elapsed_days,distance
2007,2007-03-23,0,0
2008,2008-07-01,466,0.0589
2009,2009-07-01,831,0.0424
2010,2010-07-01,1196,0.0515
";

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let csv = match args.next() {
        Some(path) => std::fs::read_to_string(path)?,
        None => REFERENCE.to_string(),
    };
    let degree = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let svg_out = args.next().unwrap_or_else(|| "clock_fit.svg".into());

    let obs = observations_from_csv(&csv)?;
    let fit = fit_polynomial(&obs, degree)?;
    println!(
        "coefficients {:?}\nrate {:.4e} per day, {:.4e} per year, rss {:.3e}",
        fit.coefficients,
        fit.rate(),
        fit.rate_per_year(),
        fit.rss
    );
    let when = NaiveDate::from_ymd_opt(2012, 1, 1).unwrap();
    let p = predict(&fit, when)?;
    println!(
        "predicted distance on {when}: {:.4}{}",
        p.distance,
        if p.extrapolated { " (extrapolated)" } else { "" }
    );

    let (doc, svg) = fit_observations(&csv, degree)?;
    println!("band: {} at {} grid points", doc.band_kind, doc.band.len());
    std::fs::write(&svg_out, svg)?;
    println!("plot written to {svg_out}");
    Ok(())
}
