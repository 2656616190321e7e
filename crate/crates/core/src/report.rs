//! Plain-text outputs: signal CSVs, overlay plots, error histograms and
//! polar scattering tables.
//!
//! Column layouts:
//!
//! * signal: `x,value`
//! * errors: `trial,e1,e2,e3`
//! * histogram: `bin_lo,bin_hi,e1,e2,e3`
//! * polar: `beta,amplitude,re,im`

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::experiments::{geometry_errors, CaseReport, Overlay};
use crate::microlocal::{BackscatterSignal, RayDecomposition};
use crate::{Error, Result};

pub const SIGNAL_HEADER: [&str; 2] = ["x", "value"];
pub const ERRORS_HEADER: [&str; 4] = ["trial", "e1", "e2", "e3"];
pub const HISTOGRAM_HEADER: [&str; 5] = ["bin_lo", "bin_hi", "e1", "e2", "e3"];
pub const POLAR_HEADER: [&str; 4] = ["beta", "amplitude", "re", "im"];

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

fn write_rows<W: Write>(w: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for r in rows {
        out.write_record(&r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_signal_csv<W: Write>(w: W, s: &BackscatterSignal) -> Result<()> {
    write_rows(
        w,
        &SIGNAL_HEADER,
        s.x_coords.iter().zip(&s.values).map(|(x, v)| vec![x.to_string(), v.to_string()]),
    )
}

pub fn signal_csv_string(s: &BackscatterSignal) -> Result<String> {
    let mut buf = Vec::new();
    write_signal_csv(&mut buf, s)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

/// Reads an `x,value` table. Samples must be equispaced; `segment_width`
/// and `alpha` are not stored in the file.
pub fn read_signal_csv<R: Read>(r: R, alpha: f64, segment_width: f64) -> Result<BackscatterSignal> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.len() != 2 || &header[0] != "x" || &header[1] != "value" {
        return Err(Error::Format(format!("expected header x,value, found {:?}", header.iter().collect::<Vec<_>>())));
    }
    let (mut xs, mut vs) = (Vec::new(), Vec::new());
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Format(format!("row {}: bad number {:?}", line + 1, &rec[i])))
        };
        xs.push(num(0)?);
        vs.push(num(1)?);
    }
    if vs.is_empty() {
        return Err(Error::Format("signal has no samples".into()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Format("x must increase".into()));
    }
    Ok(BackscatterSignal {
        values: vs,
        x_coords: xs,
        alpha,
        segment_width,
    })
}

/// Per-trial relative geometry errors of one case.
pub fn errors_csv(case: &CaseReport) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(
        &mut buf,
        &ERRORS_HEADER,
        case.trials.iter().map(|t| {
            let e = geometry_errors(&case.truth.geometries, &t.geometries);
            vec![t.trial.to_string(), e[0].to_string(), e[1].to_string(), e[2].to_string()]
        }),
    )?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

/// Counts of the per-trial errors in `bins` equal bins over `[0, max]`.
pub fn histogram_csv(case: &CaseReport, bins: usize) -> Result<String> {
    let bins = bins.max(1);
    let errs: Vec<[f64; 3]> =
        case.trials.iter().map(|t| geometry_errors(&case.truth.geometries, &t.geometries)).collect();
    let top = errs.iter().flatten().copied().fold(0.0, f64::max);
    let width = if top > 0.0 { top / bins as f64 } else { 1.0 / bins as f64 };
    let mut counts = vec![[0usize; 3]; bins];
    for e in &errs {
        for k in 0..3 {
            let b = ((e[k] / width) as usize).min(bins - 1);
            counts[b][k] += 1;
        }
    }
    let mut buf = Vec::new();
    write_rows(
        &mut buf,
        &HISTOGRAM_HEADER,
        counts.iter().enumerate().map(|(b, c)| {
            vec![
                (b as f64 * width).to_string(),
                ((b + 1) as f64 * width).to_string(),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
            ]
        }),
    )?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

pub fn polar_csv(dec: &RayDecomposition) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(
        &mut buf,
        &POLAR_HEADER,
        dec.angles.iter().zip(&dec.amplitudes).zip(&dec.coefficients).map(|((b, a), c)| {
            vec![b.to_string(), a.to_string(), c.re.to_string(), c.im.to_string()]
        }),
    )?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

/// Clean, noisy and predicted signals as an SVG line plot.
pub fn overlay_svg(o: &Overlay, title: &str) -> String {
    let (w, h, pad) = (960.0, 360.0, 40.0);
    let x0 = o.x.first().copied().unwrap_or(0.0);
    let x1 = o.x.last().copied().unwrap_or(1.0).max(x0 + 1e-12);
    let ymax = o
        .clean
        .iter()
        .chain(&o.noisy)
        .chain(&o.prediction)
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-12);
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - y / ymax * (h - 2.0 * pad);
    let line = |vals: &[f64]| {
        let mut s = String::new();
        for (x, y) in o.x.iter().zip(vals) {
            let _ = write!(s, "{:.2},{:.2} ", px(*x), py(*y));
        }
        s
    };
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{pad}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        svg,
        r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{0}" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    for (vals, colour, name) in [
        (&o.noisy, "#bbbbbb", "noisy"),
        (&o.clean, "#1f77b4", "clean"),
        (&o.prediction, "#d62728", "prediction"),
    ] {
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1" points="{}"><title>{name}</title></polyline>"#,
            line(vals).trim_end()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> BackscatterSignal {
        BackscatterSignal {
            values: vec![0.5, 1.0 / 3.0, 2.0, 1e-300],
            x_coords: vec![0.0, 0.25, 0.5, 0.75],
            alpha: 0.5,
            segment_width: 1.0,
        }
    }

    #[test]
    fn signal_roundtrip_is_exact() {
        let s = sig();
        let text = signal_csv_string(&s).unwrap();
        assert!(text.starts_with("x,value\n"));
        let back = read_signal_csv(text.as_bytes(), 0.5, 1.0).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn malformed_signals() {
        assert!(matches!(read_signal_csv("a,b\n1,2\n".as_bytes(), 0.5, 1.0), Err(Error::Format(_))));
        assert!(matches!(read_signal_csv("x,value\n".as_bytes(), 0.5, 1.0), Err(Error::Format(_))));
        assert!(matches!(read_signal_csv("x,value\n0,nan\n".as_bytes(), 0.5, 1.0), Err(Error::Format(_))));
        assert!(matches!(
            read_signal_csv("x,value\n1,1\n0,1\n".as_bytes(), 0.5, 1.0),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn svg_has_three_series() {
        let o = Overlay {
            x: vec![0.0, 1.0, 2.0],
            clean: vec![1.0, 2.0, 1.0],
            noisy: vec![1.1, 1.9, 1.0],
            prediction: vec![1.0, 2.0, 1.2],
        };
        let svg = overlay_svg(&o, "a & b");
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("a &amp; b"));
    }
}
