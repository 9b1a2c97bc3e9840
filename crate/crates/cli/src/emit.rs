//! File emission: theta.csv, distribution.csv, summary.json.
//!
//! Floats are written as `{:.16e}` (17 significant digits) so every value
//! round-trips through an f64 parser exactly and outputs can be compared
//! byte for byte. Each file opens with a provenance line.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::runner::{Provenance, ResultBundle};

/// 17-significant-digit scientific form; lossless for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn provenance_line(p: &Provenance) -> String {
    format!(
        "# heatline {} config_sha256={} seed={}\n",
        p.version, p.config_sha256, p.seed
    )
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Write every requested artifact into `out_dir`, returning the paths.
pub fn emit(bundle: &ResultBundle, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    if let Some(samples) = &bundle.theta {
        let path = out_dir.join("theta.csv");
        let mut text = provenance_line(&bundle.provenance);
        text.push_str("t,re_theta,im_theta,stderr_re,stderr_im\n");
        for s in samples {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(s.t),
                fmt_f64(s.theta.re),
                fmt_f64(s.theta.im),
                fmt_f64(s.std_error_re),
                fmt_f64(s.std_error_im)
            ));
        }
        fs::write(&path, text)?;
        written.push(path);
    }

    if let Some(dist) = &bundle.distribution {
        let path = out_dir.join("distribution.csv");
        let mut text = provenance_line(&bundle.provenance);
        text.push_str("q,p,p_reconstructed\n");
        let reconstructed = bundle
            .reconstruction
            .as_ref()
            .map(|r| r.distribution.atoms());
        for (i, atom) in dist.atoms().iter().enumerate() {
            let rec_field = match reconstructed {
                Some(atoms) => atoms
                    .get(i)
                    .filter(|a| (a.q - atom.q).abs() <= dist.gap_cluster_tol())
                    .map(|a| fmt_f64(a.p))
                    .unwrap_or_default(),
                None => String::new(),
            };
            text.push_str(&format!(
                "{},{},{rec_field}\n",
                fmt_f64(atom.q),
                fmt_f64(atom.p)
            ));
        }
        fs::write(&path, text)?;
        written.push(path);
    }

    let path = out_dir.join("summary.json");
    let summary = summary_value(bundle);
    fs::write(&path, to_json_bytes(&summary)?)?;
    written.push(path);

    Ok(written)
}

fn summary_value(bundle: &ResultBundle) -> Value {
    let mut root = Map::new();
    root.insert(
        "provenance".into(),
        json!({
            "config_sha256": bundle.provenance.config_sha256,
            "seed": bundle.provenance.seed,
            "version": bundle.provenance.version,
        }),
    );
    root.insert(
        "mode".into(),
        json!(format!("{:?}", bundle.mode).to_lowercase()),
    );

    if let Some(grid) = &bundle.grid {
        root.insert(
            "grid".into(),
            json!({
                "points": grid.times.len(),
                "spacing": finite_or_null(grid.spacing),
                "max_spacing": finite_or_null(grid.max_spacing),
                "span": finite_or_null(grid.span),
                "min_span": finite_or_null(grid.min_span),
            }),
        );
    } else {
        root.insert(
            "grid".into(),
            json!({ "points": bundle.times.len(), "explicit": true }),
        );
    }

    if let Some(m) = bundle.moments {
        root.insert(
            "moments".into(),
            json!({ "m1": m[0], "m2": m[1], "m3": m[2], "m4": m[3] }),
        );
    }
    if let Some(l) = &bundle.landauer {
        root.insert(
            "landauer".into(),
            json!({
                "average_heat": l.average_heat,
                "beta_q": l.beta_q,
                "entropy_decrease": l.entropy_decrease,
                "slack": l.slack,
                "mutual_information": l.mutual_information,
                "relative_entropy": l.relative_entropy,
                "beta_zero": l.beta_zero,
            }),
        );
    }
    if let Some(r) = &bundle.reconstruction {
        root.insert(
            "reconstruction".into(),
            json!({
                "residual_rms": r.residual_rms,
                "condition_estimate": r.condition_estimate,
            }),
        );
    }
    if let Some(e) = &bundle.elimination {
        root.insert(
            "elimination".into(),
            json!({
                "max_state_error": e.max_state_error,
                "max_leakage": e.max_leakage,
                "leakage_bound": e.leakage_bound,
                "max_occupied_n": e.max_occupied_n,
                "drive_time": e.drive_time,
                "adiabaticity_ratio": e.adiabaticity_ratio,
                "adiabaticity_warning": e.adiabaticity_warning,
            }),
        );
    }
    Value::Object(root)
}

/// Pretty JSON with all floats in 17-significant-digit scientific form.
pub fn to_json_bytes(value: &Value) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut serializer = serde_json::Serializer::with_formatter(&mut buf, SciFormatter::default());
    serde::Serialize::serialize(value, &mut serializer)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    buf.push(b'\n');
    Ok(buf)
}

/// Pretty-printing formatter that overrides float output.
#[derive(Default)]
pub struct SciFormatter {
    indent: usize,
}

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.indent += 1;
        writer.write_all(b"[")
    }

    fn end_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.indent -= 1;
        writer.write_all(b"\n")?;
        writer.write_all(indent(self.indent).as_bytes())?;
        writer.write_all(b"]")
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        if !first {
            writer.write_all(b",")?;
        }
        writer.write_all(b"\n")?;
        writer.write_all(indent(self.indent).as_bytes())
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.indent += 1;
        writer.write_all(b"{")
    }

    fn end_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.indent -= 1;
        writer.write_all(b"\n")?;
        writer.write_all(indent(self.indent).as_bytes())?;
        writer.write_all(b"}")
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        if !first {
            writer.write_all(b",")?;
        }
        writer.write_all(b"\n")?;
        writer.write_all(indent(self.indent).as_bytes())
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        writer.write_all(b": ")
    }
}

fn indent(level: usize) -> String {
    "  ".repeat(level)
}
