//! CSV and SVG artifacts. Floats are written in Rust's shortest
//! round-trip form, so files are byte-stable and parse back exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::experiment::{Aggregate, RunRecord};
use crate::error::{Error, Result};
use crate::planning::PlanRecord;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Long-form per-run trace: `[instance,]step,run,error[,kp,ki,kd]`. The
/// gain columns appear when any run adapted its gains.
pub fn emit_csv(runs: &[RunRecord], path: &Path, with_instance: bool) -> Result<()> {
    let with_gains = runs.iter().any(|r| r.result.gains.is_some());
    let mut w = csv_writer(path)?;
    let mut header = Vec::new();
    if with_instance {
        header.push("instance");
    }
    header.extend(["step", "run", "error"]);
    if with_gains {
        header.extend(["kp", "ki", "kd"]);
    }
    w.write_record(&header)?;
    for rec in runs {
        let r = &rec.result;
        for (k, (step, err)) in r.steps.iter().zip(&r.errors).enumerate() {
            let mut row = Vec::with_capacity(header.len());
            if with_instance {
                row.push(rec.instance.to_string());
            }
            row.extend([step.to_string(), r.run_id.to_string(), err.to_string()]);
            if with_gains {
                match r.gains.as_ref().and_then(|g| g.get(k)) {
                    Some(g) => row.extend(g.iter().map(f64::to_string)),
                    None => row.extend(["", "", ""].map(String::from)),
                }
            }
            w.write_record(&row)?;
        }
    }
    finish(w, path)
}

/// `step,mean,stderr` per evaluation step.
pub fn emit_aggregate_csv(aggregate: &Aggregate, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["step", "mean", "stderr"])?;
    for ((s, m), e) in aggregate.steps.iter().zip(&aggregate.mean).zip(&aggregate.stderr) {
        w.write_record([s.to_string(), m.to_string(), e.to_string()])?;
    }
    finish(w, path)
}

/// `instance,step,mean,stderr,n_included,n_diverged` for a multi-instance study.
pub fn emit_instances_csv(instances: &[Aggregate], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["instance", "step", "mean", "stderr", "n_included", "n_diverged"])?;
    for (i, a) in instances.iter().enumerate() {
        for ((s, m), e) in a.steps.iter().zip(&a.mean).zip(&a.stderr) {
            w.write_record([
                i.to_string(),
                s.to_string(),
                m.to_string(),
                e.to_string(),
                a.n_included.to_string(),
                a.n_diverged.to_string(),
            ])?;
        }
    }
    finish(w, path)
}

/// Planning trace `iter,error,kp,ki,kd`; `error` is the sup-norm distance
/// to the exact solution.
pub fn emit_plan_csv(trace: &[PlanRecord], path: &Path) -> Result<()> {
    let mut f = create(path)?;
    write_plan_csv(trace, &mut f)?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// [`emit_plan_csv`] into any writer.
pub fn write_plan_csv<W: Write>(trace: &[PlanRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iter", "error", "kp", "ki", "kd"])?;
    for r in trace {
        w.write_record([
            r.iter.to_string(),
            r.error.map(|e| e.to_string()).unwrap_or_default(),
            r.gains.kp.to_string(),
            r.gains.ki.to_string(),
            r.gains.kd.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// One parsed row of [`emit_csv`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub instance: Option<usize>,
    pub step: u64,
    pub run: usize,
    pub error: f64,
    pub gains: Option<[f64; 3]>,
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    rec.get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidConfig(format!("bad or missing '{name}' field in CSV row {rec:?}")))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (step, run, error) = match (col("step"), col("run"), col("error")) {
        (Some(s), Some(r), Some(e)) => (s, r, e),
        _ => return Err(Error::InvalidConfig("trace CSV lacks step,run,error".into())),
    };
    let instance = col("instance");
    let gains = col("kp").zip(col("ki")).zip(col("kd"));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(TraceRow {
            instance: instance.map(|i| field(&rec, i, "instance")).transpose()?,
            step: field(&rec, step, "step")?,
            run: field(&rec, run, "run")?,
            error: field(&rec, error, "error")?,
            gains: match gains {
                Some(((p, i), d)) if !rec.get(p).unwrap_or("").is_empty() => {
                    Some([field(&rec, p, "kp")?, field(&rec, i, "ki")?, field(&rec, d, "kd")?])
                }
                _ => None,
            },
        });
    }
    Ok(rows)
}

/// Parses `step,mean,stderr` rows.
pub fn read_aggregate_csv(path: &Path) -> Result<Vec<(u64, f64, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok((field(&rec, 0, "step")?, field(&rec, 1, "mean")?, field(&rec, 2, "stderr")?))
        })
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line chart of one or more aggregates with a shaded `mean +- stderr` band.
pub fn emit_svg(series: &[(&str, &Aggregate)], path: &Path) -> Result<()> {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let x_max = series
        .iter()
        .filter_map(|(_, a)| a.steps.last())
        .copied()
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let y_max = series
        .iter()
        .flat_map(|(_, a)| a.mean.iter().zip(&a.stderr).map(|(m, s)| m + s))
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max);
    let y_max = if y_max > 0.0 { y_max } else { 1.0 };
    let px = |s: u64| pad + (s as f64 / x_max) * (w - 2.0 * pad);
    let py = |v: f64| h - pad - (v.clamp(0.0, y_max) / y_max) * (h - 2.0 * pad);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<path d=\"M{pad} {pad} V{b} H{r}\" stroke=\"black\" fill=\"none\"/>\n",
        b = h - pad,
        r = w - pad
    ));
    out.push_str(&format!(
        "<text x=\"{pad}\" y=\"{t}\" font-size=\"12\" text-anchor=\"middle\">0</text>\n\
         <text x=\"{r}\" y=\"{t}\" font-size=\"12\" text-anchor=\"middle\">{x_max}</text>\n\
         <text x=\"{l}\" y=\"{pad}\" font-size=\"12\" text-anchor=\"end\">{y:.3}</text>\n\
         <text x=\"{c}\" y=\"{t2}\" font-size=\"12\" text-anchor=\"middle\">step</text>\n",
        t = h - pad + 16.0,
        t2 = h - 10.0,
        r = w - pad,
        l = pad - 4.0,
        c = w / 2.0,
        y = y_max
    ));
    for (k, (label, a)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let upper: Vec<String> = a
            .steps
            .iter()
            .zip(a.mean.iter().zip(&a.stderr))
            .map(|(&s, (m, e))| format!("{:.2},{:.2}", px(s), py(m + e)))
            .collect();
        let lower: Vec<String> = a
            .steps
            .iter()
            .zip(a.mean.iter().zip(&a.stderr))
            .rev()
            .map(|(&s, (m, e))| format!("{:.2},{:.2}", px(s), py(m - e)))
            .collect();
        let line: Vec<String> = a
            .steps
            .iter()
            .zip(&a.mean)
            .map(|(&s, &m)| format!("{:.2},{:.2}", px(s), py(m)))
            .collect();
        if !line.is_empty() {
            out.push_str(&format!(
                "<polygon points=\"{} {}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
                upper.join(" "),
                lower.join(" ")
            ));
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                line.join(" ")
            ));
        }
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            x = w - pad - 120.0,
            y = pad + 16.0 * (k as f64 + 1.0),
            label = escape(label)
        ));
    }
    out.push_str("</svg>\n");
    let mut f = create(path)?;
    f.write_all(out.as_bytes()).and_then(|_| f.flush()).map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::RunResult;

    fn record(run_id: usize, errors: Vec<f64>, gains: bool) -> RunRecord {
        RunRecord {
            instance: 0,
            result: RunResult {
                run_id,
                seed: run_id as u64,
                steps: (0..errors.len() as u64).map(|k| k * 10).collect(),
                gains: gains.then(|| errors.iter().map(|&e| [1.0 + e, 0.1, -0.2]).collect()),
                errors,
                diverged: false,
                final_values: vec![],
            },
        }
    }

    #[test]
    fn empty_results_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("runs.csv");
        emit_csv(&[], &p, false).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "step,run,error\n");
    }

    #[test]
    fn trace_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("runs.csv");
        let runs = vec![record(0, vec![1.0, 0.1 + 0.2, 1e-20], true), record(1, vec![1.0, 1.0 / 3.0, 0.0], true)];
        emit_csv(&runs, &p, true).unwrap();
        let rows = read_trace_csv(&p).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[1].error, 0.1 + 0.2);
        assert_eq!(rows[4].error, 1.0 / 3.0);
        assert_eq!(rows[2].gains, Some([1.0 + 1e-20, 0.1, -0.2]));
        assert_eq!(rows[5].instance, Some(0));
    }

    #[test]
    fn svg_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = Aggregate::from_traces([(&[0u64, 5][..], &[1.0, 0.5][..], false)]).unwrap();
        let (p, q) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
        emit_svg(&[("td <x>", &a)], &p).unwrap();
        emit_svg(&[("td <x>", &a)], &q).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, std::fs::read_to_string(&q).unwrap());
        assert!(text.contains("td &lt;x&gt;"));
    }
}
