use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::CliError;

/// Bumped whenever a column is added, removed, or changes meaning.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Rows of one CSV table, written with a leading comment line naming the
/// table and the schema version.
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Self { name: name.into(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut out = BufWriter::new(File::create(&path)?);
        writeln!(out, "# sobolev {} schema={CSV_SCHEMA_VERSION}", self.name)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Log-log plot of `(size, error)` with the fitted line `e^b size^a`.
pub fn loglog_svg(path: &Path, title: &str, x_label: &str, points: &[(f64, f64)], fit: Option<(f64, f64)>) -> Result<(), CliError> {
    let draw = || -> Result<(), Box<dyn std::error::Error>> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        let root = SVGBackend::new(path, (640, 480)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d((lo(&xs) * 0.8..hi(&xs) * 1.25).log_scale(), (lo(&ys) * 0.5..hi(&ys) * 2.0).log_scale())?;
        chart.configure_mesh().x_desc(x_label).y_desc("error").draw()?;
        chart.draw_series(points.iter().map(|&p| Circle::new(p, 4, BLUE.filled())))?;
        chart.draw_series(LineSeries::new(points.iter().copied(), &BLUE))?;
        if let Some((slope, intercept)) = fit {
            let line = xs.iter().map(|&x| (x, (intercept + slope * x.ln()).exp()));
            chart.draw_series(LineSeries::new(line, &RED))?.label(format!("slope {slope:.3}"));
            chart.configure_series_labels().border_style(BLACK).draw()?;
        }
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| CliError::Io(format!("cannot write plot {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1e-300, 3.0, -2.5e17, f64::INFINITY] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn table_has_versioned_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        let p = t.write(dir.path()).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text, "# sobolev demo schema=1\na,b\n1,\"x,y\"\n");
    }
}
