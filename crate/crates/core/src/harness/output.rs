use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentOutput, Mode, RecordRow};
use crate::error::Result;

pub const RECORD_HEADER: &str = "run_id,seed,iter,acq,y_min,log_err,log_dist,alpha_star,n_starts,win_idx,win_src,t_cum_ms";
const SUMMARY_HEADER: &str = "iter,median,q25,q75";
const SET_SIZE_HEADER: &str = "run_id,seed,iter,n_starts,i_explore,i_exploit,i_overall,win_src";
const INNER_HEADER: &str = "run_id,seed,iter,optimizer,alpha_star,n_starts,win_idx,win_src,t_ms,ref_alpha,dist_ref";
const SPECTRUM_HEADER: &str = "method,n,sup_err";
const FAILURE_HEADER: &str = "run_id,seed,acq,reason";

/// 17 significant digits in scientific notation.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn opt_int(v: Option<usize>) -> String {
    v.map(|i| i.to_string()).unwrap_or_default()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Per-iteration median and quartiles over runs, ignoring non-finite values.
pub fn summarize(points: impl IntoIterator<Item = (usize, f64)>) -> Vec<(usize, f64, f64, f64)> {
    let mut by_iter: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (it, v) in points {
        if v.is_finite() {
            by_iter.entry(it).or_default().push(v);
        }
    }
    by_iter
        .into_iter()
        .map(|(it, mut v)| {
            v.sort_by(f64::total_cmp);
            (it, quantile(&v, 0.5), quantile(&v, 0.25), quantile(&v, 0.75))
        })
        .collect()
}

fn write_summary(path: &Path, rows: &[(usize, f64, f64, f64)]) -> Result<()> {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for (it, m, a, b) in rows {
        let _ = writeln!(s, "{it},{},{},{}", fmt_float(*m), fmt_float(*a), fmt_float(*b));
    }
    fs::write(path, s)?;
    Ok(())
}

fn file_tag(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn ms(d: std::time::Duration, timing: bool) -> String {
    fmt_float(if timing { d.as_secs_f64() * 1e3 } else { 0.0 })
}

fn records_csv(rows: &[RecordRow], timing: bool) -> String {
    let mut s = String::from(RECORD_HEADER);
    s.push('\n');
    for r in rows {
        let x = &r.record;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.run_id,
            r.seed,
            x.iter,
            r.acq,
            fmt_float(x.y_min),
            opt_float(x.log_err),
            opt_float(x.log_dist),
            fmt_float(x.alpha_star),
            x.n_starts,
            opt_int(x.win_idx),
            x.win_src.map(|s| s.as_str()).unwrap_or(""),
            ms(x.t_cum, timing),
        );
    }
    s
}

/// Writes every table the experiment produced into `dir` and returns the
/// paths written.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    let mode = out.mode.unwrap_or(Mode::Outer);
    match mode {
        Mode::Outer | Mode::AtsSweep | Mode::SetSizeStudy => {
            put("records.csv".into(), records_csv(&out.records, out.timing))?;
            let mut acqs: Vec<&str> = Vec::new();
            for r in &out.records {
                if !acqs.contains(&r.acq.as_str()) {
                    acqs.push(&r.acq);
                }
            }
            type Metric = fn(&RecordRow, bool) -> Option<f64>;
            let metrics: [(&str, Metric); 5] = [
                ("y_min", |r, _| Some(r.record.y_min)),
                ("log_err", |r, _| r.record.log_err),
                ("log_dist", |r, _| r.record.log_dist),
                ("alpha_star", |r, _| Some(r.record.alpha_star)),
                ("t_cum_ms", |r, t| Some(if t { r.record.t_cum.as_secs_f64() * 1e3 } else { 0.0 })),
            ];
            for acq in acqs {
                let rows: Vec<&RecordRow> = out.records.iter().filter(|r| r.acq == acq).collect();
                for (name, get) in metrics {
                    if rows.iter().all(|r| get(r, out.timing).is_none_or(|v| !v.is_finite())) {
                        continue;
                    }
                    let summary = summarize(rows.iter().filter_map(|r| get(r, out.timing).map(|v| (r.record.iter, v))));
                    let p = dir.join(format!("summary_{}_{name}.csv", file_tag(acq)));
                    write_summary(&p, &summary)?;
                    written.push(p);
                }
            }
            if mode == Mode::SetSizeStudy {
                let mut s = String::from(SET_SIZE_HEADER);
                s.push('\n');
                for r in &out.records {
                    let x = &r.record;
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{}",
                        r.run_id,
                        r.seed,
                        x.iter,
                        x.n_starts,
                        opt_int(x.win_explore),
                        opt_int(x.win_exploit),
                        opt_int(x.win_idx),
                        x.win_src.map(|s| s.as_str()).unwrap_or(""),
                    );
                }
                let p = dir.join("set_size.csv");
                fs::write(&p, s)?;
                written.push(p);
            }
        }
        Mode::InnerCompare => {
            let mut s = String::from(INNER_HEADER);
            s.push('\n');
            let mut opts: Vec<&str> = Vec::new();
            for r in &out.inner {
                if !opts.contains(&r.optimizer.as_str()) {
                    opts.push(&r.optimizer);
                }
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.run_id,
                    r.seed,
                    r.iter,
                    r.optimizer,
                    fmt_float(r.alpha_star),
                    r.n_starts,
                    r.win_idx,
                    r.win_src.as_str(),
                    ms(r.elapsed, out.timing),
                    opt_float(r.ref_alpha),
                    opt_float(r.dist_ref),
                );
            }
            put("inner_compare.csv".into(), s)?;
            for o in opts {
                let summary = summarize(out.inner.iter().filter(|r| r.optimizer == o).map(|r| (r.iter, r.alpha_star)));
                let p = dir.join(format!("summary_inner_{}_alpha_star.csv", file_tag(o)));
                write_summary(&p, &summary)?;
                written.push(p);
            }
        }
        Mode::SpectrumCheck => {
            let mut s = String::from(SPECTRUM_HEADER);
            s.push('\n');
            for r in &out.spectrum {
                let _ = writeln!(s, "{},{},{}", r.method, r.n, fmt_float(r.sup_err));
            }
            put("spectrum.csv".into(), s)?;
        }
    }
    let mut s = String::from(FAILURE_HEADER);
    s.push('\n');
    for f in &out.failures {
        let _ = writeln!(s, "{},{},{},\"{}\"", f.run_id, f.seed, f.acq, f.reason.replace('"', "'"));
    }
    let p = dir.join("failures.csv");
    fs::write(&p, s)?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_float(f64::NAN), "nan");
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 1.0), 4.0);
        let s = summarize([(1, 3.0), (1, 1.0), (2, 5.0), (1, f64::NAN), (1, 2.0)]);
        assert_eq!(s, vec![(1, 2.0, 1.5, 2.5), (2, 5.0, 5.0, 5.0)]);
    }
}
