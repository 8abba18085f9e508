//! Map posterior export: CSV `x,y,z,p_<id>…,label` or PLY colored by the
//! hard label.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rvsm_core::{ClassDictionary, ClassId, MapPosterior};

use crate::cloud_io::CloudFormat;
use crate::json::format_f64;
use crate::ply::{self, PlyEncoding, Scalar, Value};
use crate::{Error, Location, Result};

pub fn write_csv(post: &MapPosterior, mut w: impl Write) -> std::io::Result<()> {
    let mut header = String::from("x,y,z");
    for id in &post.class_ids {
        header.push_str(&format!(",p_{id}"));
    }
    writeln!(w, "{header},label")?;
    for (i, p) in post.points.iter().enumerate() {
        let mut line = format!("{},{},{}", format_f64(p[0]), format_f64(p[1]), format_f64(p[2]));
        for k in 0..post.class_ids.len() {
            line.push(',');
            line.push_str(&format_f64(post.class_probs[(i, k)]));
        }
        writeln!(w, "{line},{}", post.hard_labels[i])?;
    }
    w.flush()
}

/// Reads a posterior written by [`write_csv`].
pub fn read_csv(reader: impl Read, path: &Path) -> Result<MapPosterior> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let csv_err = |e: csv::Error| Error::parse(path, Location::Line(e.position().map_or(1, |p| p.line())), e.to_string());
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let bad_header = || Error::parse(path, Location::Line(1), "expected header x,y,z,p_<id>...,label");
    if header.len() < 5 || header[..3] != ["x", "y", "z"] || header[header.len() - 1] != "label" {
        return Err(bad_header());
    }
    let class_ids = header[3..header.len() - 1]
        .iter()
        .map(|h| h.strip_prefix("p_").and_then(|s| s.parse::<ClassId>().ok()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(bad_header)?;
    let n_c = class_ids.len();
    let mut points = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut hard_labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let loc = Location::Line(record.position().map_or(0, |p| p.line()));
        let row = points.len();
        let num = |k: usize| -> Result<f64> {
            let v: f64 = record[k].parse().map_err(|_| Error::parse(path, loc, format!("invalid number {:?}", &record[k])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(path, loc, format!("non-finite value in row {row}")))
            }
        };
        points.push([num(0)?, num(1)?, num(2)?]);
        for k in 0..n_c {
            probs.push(num(3 + k)?);
        }
        hard_labels.push(record[3 + n_c].parse().map_err(|_| Error::parse(path, loc, "invalid label"))?);
    }
    Ok(MapPosterior {
        class_probs: DMatrix::from_row_slice(points.len(), n_c, &probs),
        points,
        class_ids,
        hard_labels,
    })
}

/// Binary PLY with `double` coordinates, `uchar` colors of the hard label's
/// class, and the `int` label.
pub fn write_ply(post: &MapPosterior, dict: &ClassDictionary, w: impl Write, path: &Path) -> Result<()> {
    let mut rows = Vec::with_capacity(post.len());
    for (p, &label) in post.points.iter().zip(&post.hard_labels) {
        let [r, g, b] = dict.get(label).map_or([0, 0, 0], |e| e.color);
        rows.push(vec![
            Value::F64(p[0]),
            Value::F64(p[1]),
            Value::F64(p[2]),
            Value::U8(r),
            Value::U8(g),
            Value::U8(b),
            ply::label_value(label, path)?,
        ]);
    }
    let names = ["x", "y", "z", "red", "green", "blue", "label"];
    let types = [Scalar::F64, Scalar::F64, Scalar::F64, Scalar::U8, Scalar::U8, Scalar::U8, Scalar::I32];
    ply::write_vertices(w, PlyEncoding::BinaryLittleEndian, "rvsm map posterior", &names, rows.into_iter(), &types)
        .map_err(|e| Error::io(path, e))
}

pub fn save_posterior(post: &MapPosterior, dict: &ClassDictionary, path: &Path, format: CloudFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let w = BufWriter::new(file);
    match format {
        CloudFormat::Csv => write_csv(post, w).map_err(|e| Error::io(path, e)),
        CloudFormat::Ply => write_ply(post, dict, w, path),
    }
}

pub fn load_posterior(path: &Path) -> Result<MapPosterior> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), path)
}
