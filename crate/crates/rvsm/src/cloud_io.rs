//! Labeled point clouds on disk: CSV (`x,y,z,label`) and PLY, plus the
//! `<name>.classes.json` dictionary sidecar.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rvsm_core::{ClassDictionary, ClassEntry, ClassId, LabeledPointCloud, Point3};

use crate::json::format_f64;
use crate::ply::{self, PlyEncoding};
use crate::{Error, Location, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    Ply,
}

impl CloudFormat {
    /// Format implied by the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(CloudFormat::Csv),
            Some("ply") => Ok(CloudFormat::Ply),
            _ => Err(Error::format(path, "cannot infer cloud format; expected a .csv or .ply extension")),
        }
    }
}

impl std::str::FromStr for CloudFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CloudFormat::Csv),
            "ply" => Ok(CloudFormat::Ply),
            other => Err(format!("unknown format {other:?}; expected csv or ply")),
        }
    }
}

fn check_finite(path: &Path, location: Location, index: usize, p: &Point3) -> Result<()> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::parse(path, location, format!("non-finite coordinate in point {index}")))
    }
}

/// Parses CSV text with header `x,y,z,label`. `path` only labels errors.
pub fn read_csv(reader: impl Read, path: &Path) -> Result<LabeledPointCloud> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(1, |p| p.line());
        Error::parse(path, Location::Line(line), e.to_string())
    };
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["x", "y", "z", "label"] {
        return Err(Error::parse(path, Location::Line(1), format!("expected header x,y,z,label, found {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let loc = Location::Line(line);
        let mut p = [0.0; 3];
        for (k, c) in p.iter_mut().enumerate() {
            *c = record[k]
                .parse()
                .map_err(|_| Error::parse(path, loc, format!("invalid coordinate {:?}", &record[k])))?;
        }
        check_finite(path, loc, points.len(), &p)?;
        let label: ClassId =
            record[3].parse().map_err(|_| Error::parse(path, loc, format!("invalid label {:?}", &record[3])))?;
        points.push(p);
        labels.push(label);
    }
    Ok(LabeledPointCloud::new(points, labels)?)
}

pub fn write_csv(cloud: &LabeledPointCloud, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "x,y,z,label")?;
    for (p, l) in cloud.points().iter().zip(cloud.labels()) {
        writeln!(w, "{},{},{},{l}", format_f64(p[0]), format_f64(p[1]), format_f64(p[2]))?;
    }
    w.flush()
}

/// Reads a cloud without any dictionary check.
pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<LabeledPointCloud> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    match format {
        CloudFormat::Csv => read_csv(reader, path),
        CloudFormat::Ply => ply::read_cloud(reader, path),
    }
}

/// Writes `cloud`; PLY output is little-endian binary with `double` coordinates.
pub fn save_cloud(cloud: &LabeledPointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let w = BufWriter::new(file);
    match format {
        CloudFormat::Csv => write_csv(cloud, w).map_err(|e| Error::io(path, e)),
        CloudFormat::Ply => ply::write_cloud(cloud, w, PlyEncoding::BinaryLittleEndian, path),
    }
}

/// `dir/scene.csv` → `dir/scene.classes.json`.
pub fn sidecar_path(cloud_path: &Path) -> PathBuf {
    let stem = cloud_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    cloud_path.with_file_name(format!("{stem}.classes.json"))
}

pub fn load_dictionary(path: &Path) -> Result<ClassDictionary> {
    let entries: Vec<ClassEntry> = crate::json::read_file(path)?;
    ClassDictionary::new(entries).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_dictionary(dict: &ClassDictionary, path: &Path) -> Result<()> {
    crate::json::write_file(path, &dict.entries())
}

/// Query locations: a CSV with header `x,y,z` (or a full labeled cloud,
/// whose labels are ignored), or a labeled PLY.
pub fn load_points(path: &Path, format: CloudFormat) -> Result<Vec<Point3>> {
    if format == CloudFormat::Ply {
        return Ok(load_cloud(path, format)?.points().to_vec());
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(std::io::BufReader::new(file));
    let csv_err = |e: csv::Error| Error::parse(path, Location::Line(e.position().map_or(1, |p| p.line())), e.to_string());
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header.len() < 3 || header[..3] != ["x", "y", "z"] {
        return Err(Error::parse(path, Location::Line(1), "expected a header starting with x,y,z"));
    }
    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let loc = Location::Line(record.position().map_or(0, |p| p.line()));
        let mut p = [0.0; 3];
        for (k, c) in p.iter_mut().enumerate() {
            *c = record[k].parse().map_err(|_| Error::parse(path, loc, format!("invalid coordinate {:?}", &record[k])))?;
        }
        check_finite(path, loc, points.len(), &p)?;
        points.push(p);
    }
    Ok(points)
}

/// How labels are matched against a class dictionary on load.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelPolicy<'a> {
    /// Dictionary to check against. When absent the sidecar next to the
    /// cloud is used, and failing that one is built from the labels present.
    pub dictionary: Option<&'a ClassDictionary>,
    /// Append unknown labels to the dictionary instead of rejecting them.
    pub allow_new_classes: bool,
}

/// Loads a cloud together with the dictionary its labels belong to.
pub fn load_labeled(path: &Path, format: CloudFormat, policy: LabelPolicy<'_>) -> Result<(LabeledPointCloud, ClassDictionary)> {
    let cloud = load_cloud(path, format)?;
    let sidecar = sidecar_path(path);
    let dict = match policy.dictionary {
        Some(d) => d.clone(),
        None if sidecar.exists() => load_dictionary(&sidecar)?,
        None => {
            let dict = ClassDictionary::from_ids(&cloud.classes())?;
            return Ok((cloud, dict));
        }
    };
    let unknown: Vec<ClassId> = cloud.classes().into_iter().filter(|c| !dict.contains(*c)).collect();
    if unknown.is_empty() {
        return Ok((cloud, dict));
    }
    if policy.allow_new_classes {
        let dict = dict.extended(&unknown)?;
        return Ok((cloud, dict));
    }
    let index = cloud.labels().iter().position(|l| !dict.contains(*l)).expect("an unknown label exists");
    let location = match format {
        CloudFormat::Csv => Location::Line(index as u64 + 2),
        CloudFormat::Ply => Location::Vertex(index),
    };
    Err(Error::parse(
        path,
        location,
        format!("label {} is not in the class dictionary (use --allow-new-classes to accept it)", cloud.labels()[index]),
    ))
}
