//! Performance-portability metrics: roofline-relative kernel performance
//! per platform, and the harmonic/arithmetic aggregate scores PP1 and PP2.

use crate::error::{Error, Result};
use crate::perf::PlatformPeaks;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// One measured kernel on one platform: achieved processing speed
/// [GFLOP/s] and achieved arithmetic intensity [FLOP/B] at problem size
/// `n_side`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatformObservation {
    pub platform: String,
    pub kernel: String,
    pub n_side: usize,
    pub p_achieved_gflops: f64,
    pub a_achieved_flops_per_byte: f64,
}

/// Roofline-relative performance r = p / min(p_peak, b_peak * a).
///
/// Small measurement overshoots in (1, 1.02] are clipped to 1 with a
/// warning; anything above 1.02 indicates an inconsistent cost model or
/// peak table and is an error.
pub fn relative_performance(
    obs: &PlatformObservation,
    peaks: &PlatformPeaks,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    peaks.validate()?;
    if obs.p_achieved_gflops < 0.0 || obs.a_achieved_flops_per_byte < 0.0 {
        return Err(Error::Metric(format!(
            "negative observation for {}/{}",
            obs.platform, obs.kernel
        )));
    }
    let roof = peaks
        .p_peak_gflops
        .min(peaks.b_peak_gbs * obs.a_achieved_flops_per_byte);
    if roof <= 0.0 {
        return Err(Error::Metric(format!(
            "degenerate roofline for {}/{}",
            obs.platform, obs.kernel
        )));
    }
    let r = obs.p_achieved_gflops / roof;
    if r > 1.02 {
        return Err(Error::Metric(format!(
            "{}/{}: relative performance {r:.4} exceeds the roofline by more than 2%",
            obs.platform, obs.kernel
        )));
    }
    if r > 1.0 {
        warnings.push(format!(
            "{}/{}: relative performance {r:.4} clipped to 1",
            obs.platform, obs.kernel
        ));
        return Ok(1.0);
    }
    Ok(r)
}

/// Harmonic-mean performance portability. Zero if any platform scores
/// zero, or if the platform set is empty.
pub fn pp1(rs: &[f64]) -> f64 {
    if rs.is_empty() || rs.iter().any(|&r| r == 0.0) {
        return 0.0;
    }
    if rs.len() == 1 {
        // Exact for a single platform; the reciprocal round trip is not.
        return rs[0];
    }
    rs.len() as f64 / rs.iter().map(|r| 1.0 / r).sum::<f64>()
}

/// Arithmetic-mean performance portability. Zero on an empty platform set.
pub fn pp2(rs: &[f64]) -> f64 {
    if rs.is_empty() {
        return 0.0;
    }
    rs.iter().sum::<f64>() / rs.len() as f64
}

/// PP1/PP2 for one application (kernel) over a platform set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpRow {
    pub kernel: String,
    pub platforms: Vec<String>,
    pub rs: Vec<f64>,
    pub pp1: f64,
    pub pp2: f64,
}

/// Compute per-kernel relative performances and both PP scores over every
/// kernel present in `observations`. A kernel missing on some platform in
/// `peaks` scores zero there (it does not run on that platform).
pub fn pp_sweep(
    observations: &[PlatformObservation],
    peaks: &[PlatformPeaks],
    warnings: &mut Vec<String>,
) -> Result<Vec<PpRow>> {
    let mut kernels: Vec<String> = Vec::new();
    for o in observations {
        if !kernels.contains(&o.kernel) {
            kernels.push(o.kernel.clone());
        }
    }
    let mut rows = Vec::new();
    for kernel in kernels {
        let mut platforms = Vec::new();
        let mut rs = Vec::new();
        for p in peaks {
            platforms.push(p.platform.clone());
            let r = match observations
                .iter()
                .find(|o| o.kernel == kernel && o.platform == p.platform)
            {
                Some(obs) => relative_performance(obs, p, warnings)?,
                None => 0.0,
            };
            rs.push(r);
        }
        let row = PpRow {
            pp1: pp1(&rs),
            pp2: pp2(&rs),
            kernel,
            platforms,
            rs,
        };
        debug_assert!(row.pp1 <= row.pp2 + 1e-12, "harmonic mean exceeds arithmetic");
        rows.push(row);
    }
    Ok(rows)
}

/// Observations CSV:
/// `platform,kernel,n_side,p_achieved_gflops,a_achieved_flops_per_byte`.
pub fn read_observations_csv(path: &Path) -> Result<Vec<PlatformObservation>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("platform")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Metric(format!(
                "observations CSV line {}: expected 5 columns",
                lineno + 1
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|e| Error::Metric(format!("observations CSV line {}: {e}", lineno + 1)))
        };
        out.push(PlatformObservation {
            platform: cols[0].trim().to_string(),
            kernel: cols[1].trim().to_string(),
            n_side: cols[2].trim().parse().map_err(|e| {
                Error::Metric(format!("observations CSV line {}: {e}", lineno + 1))
            })?,
            p_achieved_gflops: parse_f(cols[3])?,
            a_achieved_flops_per_byte: parse_f(cols[4])?,
        });
    }
    Ok(out)
}

pub fn write_observations_csv(path: &Path, obs: &[PlatformObservation]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "platform,kernel,n_side,p_achieved_gflops,a_achieved_flops_per_byte")?;
    for o in obs {
        writeln!(
            w,
            "{},{},{},{},{}",
            o.platform, o.kernel, o.n_side, o.p_achieved_gflops, o.a_achieved_flops_per_byte
        )?;
    }
    Ok(())
}

/// Report CSV: `kernel,pp1,pp2` followed by one `r(platform)` column per
/// platform in peak-table order.
pub fn write_report_csv(path: &Path, rows: &[PpRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let platforms: &[String] = rows.first().map(|r| r.platforms.as_slice()).unwrap_or(&[]);
    let mut header = String::from("kernel,pp1,pp2");
    for p in platforms {
        header.push_str(&format!(",r({p})"));
    }
    writeln!(w, "{header}")?;
    for row in rows {
        let mut line = format!("{},{},{}", row.kernel, row.pp1, row.pp2);
        for r in &row.rs {
            line.push_str(&format!(",{r}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_report_json(path: &Path, rows: &[PpRow], warnings: &[String]) -> Result<()> {
    #[derive(Serialize)]
    struct Report<'a> {
        rows: &'a [PpRow],
        warnings: &'a [String],
    }
    let json = serde_json::to_string_pretty(&Report { rows, warnings })
        .map_err(|e| Error::Metric(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}
