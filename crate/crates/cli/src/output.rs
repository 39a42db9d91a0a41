//! Deterministic artifact writing: CSV with shortest round-trip floats, SVG
//! trajectory plots, and a manifest with content hashes.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::PathBuf;

pub struct OutputWriter {
    dir: PathBuf,
    files: Vec<(String, u64, String)>,
}

impl OutputWriter {
    pub fn new(dir: PathBuf) -> std::io::Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(OutputWriter {
            dir,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        let mut file = fs::File::create(&path)?;
        file.write_all(contents.as_bytes())?;
        let mut hasher = Sha256::new();
        hasher.update(contents.as_bytes());
        self.files.push((
            name.to_string(),
            contents.len() as u64,
            hex::encode(hasher.finalize()),
        ));
        Ok(path)
    }

    pub fn write_manifest(
        &mut self,
        config_echo: &Value,
        wall_time_s: f64,
        metrics: Value,
    ) -> std::io::Result<PathBuf> {
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(name, bytes, sha256)| {
                json!({"path": name, "bytes": bytes, "sha256": sha256})
            })
            .collect();
        let manifest = json!({
            "config": config_echo,
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_s": wall_time_s,
            "outputs": files,
            "metrics": metrics,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.dir.join("manifest.json");
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn file_names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _, _)| n.clone()).collect()
    }
}

/// Shortest round-trip decimal form of a float.
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        let mut buf = header.join(",");
        buf.push('\n');
        Csv { buf }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let mut first = true;
        for cell in cells {
            if !first {
                self.buf.push(',');
            }
            self.buf.push_str(&cell);
            first = false;
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Space-time trajectory plot: one polyline per retained grid point, space on
/// the horizontal axis, time running down the vertical axis. At most
/// `max_lines` polylines are kept (evenly decimated).
pub fn trajectories_svg(times: &[f64], positions: &[Vec<f64>], max_lines: usize) -> String {
    let (width, height, margin) = (600.0, 800.0, 30.0);
    let n = positions.first().map_or(0, |row| row.len());
    let stride = n.div_ceil(max_lines).max(1);
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    for row in positions {
        for &x in row.iter().step_by(stride) {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
        }
    }
    if !(x_max > x_min) {
        x_max = x_min + 1.0;
    }
    let t_max = times.last().copied().unwrap_or(1.0).max(1e-12);
    let sx = (width - 2.0 * margin) / (x_max - x_min);
    let sy = (height - 2.0 * margin) / t_max;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for j in (0..n).step_by(stride) {
        svg.push_str("<polyline fill=\"none\" stroke=\"#1f3a5f\" stroke-width=\"0.6\" points=\"");
        for (row, &t) in positions.iter().zip(times) {
            let px = margin + (row[j] - x_min) * sx;
            let py = margin + t * sy;
            svg.push_str(&format!("{px:.2},{py:.2} "));
        }
        svg.push_str("\"/>\n");
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_and_header() {
        let mut csv = Csv::new(&["a", "b"]);
        csv.row([fmt(1.0), fmt(0.5)]);
        assert_eq!(csv.finish(), "a,b\n1,0.5\n");
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-17, -2.5e300, 0.0] {
            let s = fmt(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn svg_caps_polyline_count() {
        let times = vec![0.0, 0.5, 1.0];
        let positions = vec![vec![0.0; 400], vec![0.1; 400], vec![0.2; 400]];
        let svg = trajectories_svg(&times, &positions, 64);
        let count = svg.matches("<polyline").count();
        assert!(count <= 64 && count > 0, "{count} polylines");
    }
}
