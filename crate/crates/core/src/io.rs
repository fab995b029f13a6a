//! RFC-4180 CSV tables with a header row and 17 significant digits.

use std::io::Write;

use crate::asymptotics::TailQuantileCurve;
use crate::markets::ScenarioEnsemble;

/// Formats `x` with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `path_id,t,short_rate,integrated_rate`, one row per path and grid point.
pub fn write_ensemble_csv<W: Write>(ensemble: &ScenarioEnsemble, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_id", "t", "short_rate", "integrated_rate"])?;
    let times = ensemble.grid().points();
    for path in 0..ensemble.n_paths() {
        let id = path.to_string();
        for (k, &t) in times.iter().enumerate() {
            w.write_record([
                id.as_str(),
                &fmt17(t),
                &fmt17(ensemble.short_rate(path)[k]),
                &fmt17(ensemble.integrated_rate(path)[k]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `T,quantile_low,quantile_high`
pub fn write_quantile_csv<W: Write>(curve: &TailQuantileCurve, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "quantile_low", "quantile_high"])?;
    for j in 0..curve.maturities.len() {
        w.write_record([
            fmt17(curve.maturities[j]),
            fmt17(curve.lower[j]),
            fmt17(curve.upper[j]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `T,q_low,q_high,mean,se`
pub fn write_experiment_csv<W: Write>(curve: &TailQuantileCurve, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "q_low", "q_high", "mean", "se"])?;
    for j in 0..curve.maturities.len() {
        w.write_record([
            fmt17(curve.maturities[j]),
            fmt17(curve.lower[j]),
            fmt17(curve.upper[j]),
            fmt17(curve.mean[j]),
            fmt17(curve.mean_se[j]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::{simulate_vasicek, TimeGrid, VasicekParams};

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn ensemble_csv_layout() {
        let p = VasicekParams::new(0.5, 1.0).unwrap();
        let e = simulate_vasicek(p, &TimeGrid::uniform(0.5, 0.25).unwrap(), 2, 4).unwrap();
        let mut buf = Vec::new();
        write_ensemble_csv(&e, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path_id,t,short_rate,integrated_rate");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert!(lines[1].starts_with("0,0.0000000000000000e0,5.0000000000000000e-1,0.0000000000000000e0"));
    }
}
