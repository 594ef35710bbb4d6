use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A directory populated in a hidden sibling and moved into place by
/// [`OutputDir::commit`]. Dropping without committing removes the partial
/// output.
pub struct OutputDir {
    target: PathBuf,
    staging: PathBuf,
    committed: bool,
}

impl OutputDir {
    pub fn create(target: &Path) -> Result<Self> {
        let name = target
            .file_name()
            .ok_or_else(|| Error::Config(format!("output path {} has no file name", target.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        Ok(OutputDir {
            target: target.to_path_buf(),
            staging,
            committed: false,
        })
    }

    /// Path inside the staging directory.
    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.staging.join(rel)
    }

    /// Where `rel` will live once committed.
    pub fn final_path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.target.join(rel)
    }

    pub fn root(&self) -> &Path {
        &self.staging
    }

    pub fn write(&self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    /// Replaces the target with the staged directory.
    pub fn commit(mut self) -> Result<PathBuf> {
        let old = self.staging.with_file_name(format!(
            "{}.old",
            self.staging.file_name().unwrap().to_string_lossy()
        ));
        if self.target.exists() {
            fs::rename(&self.target, &old).map_err(|e| Error::io(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| Error::io(&self.target, e))?;
        if old.exists() {
            fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
        }
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-method summary over a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub mean_makespan: f64,
    pub std_makespan: f64,
    pub mean_emission: f64,
    pub std_emission: f64,
    /// Mean of `makespan / optimal makespan`, when the oracle solved every
    /// instance.
    pub approx_oracle: Option<f64>,
}

impl ResultRow {
    pub fn from_samples(method: &str, makespans: &[f64], emissions: &[f64], approx: Option<f64>) -> Self {
        let (mean_makespan, std_makespan) = mean_std(makespans);
        let (mean_emission, std_emission) = mean_std(emissions);
        ResultRow {
            method: method.to_string(),
            mean_makespan,
            std_makespan,
            mean_emission,
            std_emission,
            approx_oracle: approx,
        }
    }
}

pub const TABLE_HEADER: &str = "method,mean_makespan,std_makespan,mean_emission,std_emission,approx_oracle";

/// Full-precision CSV of a result table.
pub fn table_csv(rows: &[ResultRow]) -> String {
    let mut s = format!("{TABLE_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{}",
            r.method,
            r.mean_makespan,
            r.std_makespan,
            r.mean_emission,
            r.std_emission,
            r.approx_oracle.map(|a| format!("{a:?}")).unwrap_or_default()
        )
        .unwrap();
    }
    s
}

pub fn parse_table_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TABLE_HEADER => {}
        _ => return Err(Error::parse(1, "missing result table header")),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(Error::parse(i + 1, "expected 6 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse(i + 1, e.to_string()));
            Ok(ResultRow {
                method: f[0].to_string(),
                mean_makespan: num(f[1])?,
                std_makespan: num(f[2])?,
                mean_emission: num(f[3])?,
                std_emission: num(f[4])?,
                approx_oracle: if f[5].is_empty() { None } else { Some(num(f[5])?) },
            })
        })
        .collect()
}

/// Relative improvement of `ours` over `base`, positive when `ours` is
/// smaller: `(base - ours) / base`.
pub fn improvement(base: f64, ours: f64) -> f64 {
    (base - ours) / base
}

/// Markdown table of results.
pub fn table_markdown(rows: &[ResultRow]) -> String {
    let mut s = String::from("| method | makespan mean | makespan std | emission mean | emission std | approx. to oracle |\n");
    s.push_str("|---|---:|---:|---:|---:|---:|\n");
    for r in rows {
        writeln!(
            s,
            "| {} | {:.2} | {:.2} | {:.2} | {:.2} | {} |",
            r.method,
            r.mean_makespan,
            r.std_makespan,
            r.mean_emission,
            r.std_emission,
            r.approx_oracle.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into())
        )
        .unwrap();
    }
    s
}

pub const IMPROVEMENT_HEADER: &str = "method,baseline,makespan_improvement_pct,emission_improvement_pct";

/// Improvement of every `ours` row over every other row, in percent.
pub fn improvements_csv(rows: &[ResultRow], ours: &[String]) -> String {
    let mut s = format!("{IMPROVEMENT_HEADER}\n");
    for o in rows.iter().filter(|r| ours.contains(&r.method)) {
        for b in rows.iter().filter(|b| b.method != o.method) {
            writeln!(
                s,
                "{},{},{:.2},{:.2}",
                o.method,
                b.method,
                100.0 * improvement(b.mean_makespan, o.mean_makespan),
                100.0 * improvement(b.mean_emission, o.mean_emission)
            )
            .unwrap();
        }
    }
    s
}

/// Scatter plot of `(makespan, emission)` points labelled by `labels`.
pub fn pareto_svg(points: &[(String, f64, f64)]) -> String {
    let (w, h, pad) = (480.0, 360.0, 50.0);
    let xs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo))
        }
    };
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<g class="axes" stroke="black"><line x1="{pad}" y1="{}" x2="{}" y2="{}"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}"/></g>"#,
        h - pad,
        w - pad,
        h - pad,
        h - pad
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">mean makespan</text>"#, w / 2.0, h - 12.0).unwrap();
    writeln!(s, r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})" text-anchor="middle">mean emission</text>"#, h / 2.0, h / 2.0).unwrap();
    for (label, x, y) in points {
        writeln!(
            s,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"><title>{label}: {x:.2}, {y:.2}</title></circle>"#,
            px(*x),
            py(*y)
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10">{label}</text>"#, px(*x) + 6.0, py(*y) - 6.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
