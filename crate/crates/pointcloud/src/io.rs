//! ASCII PLY and CSV (x, y, z in metres) readers and writers. A trailing
//! `.gz` on the file name selects gzip compression.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use nalgebra::Vector3;

use crate::{CloudError, CloudSource, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ply,
    Csv,
}

fn format_of(path: &Path) -> Result<(Format, bool), CloudError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_ascii_lowercase();
    let (stem, gz) = match name.strip_suffix(".gz") {
        Some(s) => (s.to_string(), true),
        None => (name.clone(), false),
    };
    if stem.ends_with(".ply") {
        Ok((Format::Ply, gz))
    } else if stem.ends_with(".csv") {
        Ok((Format::Csv, gz))
    } else {
        Err(CloudError::Format(name))
    }
}

pub fn read_cloud(path: impl AsRef<Path>, source: CloudSource) -> Result<PointCloud, CloudError> {
    let path = path.as_ref();
    let (format, gz) = format_of(path)?;
    let file = File::open(path)?;
    let reader: Box<dyn Read> = if gz { Box::new(GzDecoder::new(file)) } else { Box::new(file) };
    let points = match format {
        Format::Ply => parse_ply(BufReader::new(reader))?,
        Format::Csv => parse_csv(reader)?,
    };
    let cloud = PointCloud::new(points, source);
    cloud.validate()?;
    Ok(cloud)
}

pub fn write_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<(), CloudError> {
    let path = path.as_ref();
    let (format, gz) = format_of(path)?;
    let file = BufWriter::new(File::create(path)?);
    if gz {
        let mut enc = GzEncoder::new(file, Compression::default());
        write_to(&mut enc, format, cloud)?;
        enc.finish()?.flush()?;
    } else {
        let mut file = file;
        write_to(&mut file, format, cloud)?;
        file.flush()?;
    }
    Ok(())
}

fn write_to<W: Write>(w: &mut W, format: Format, cloud: &PointCloud) -> Result<(), CloudError> {
    match format {
        Format::Ply => {
            writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", cloud.len())?;
            writeln!(w, "property double x\nproperty double y\nproperty double z\nend_header")?;
            for p in &cloud.points {
                writeln!(w, "{:e} {:e} {:e}", p.x, p.y, p.z)?;
            }
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["x", "y", "z"])?;
            for p in &cloud.points {
                csv.write_record([p.x, p.y, p.z].map(|c| format!("{c:e}")))?;
            }
            csv.flush()?;
        }
    }
    Ok(())
}

/// Vertex positions of an ASCII PLY; other elements are skipped.
fn parse_ply<R: BufRead>(reader: R) -> Result<Vec<Vector3<f64>>, CloudError> {
    let bad = |m: String| CloudError::Parse(m);
    let mut lines = reader.lines();
    let mut next = || -> Result<String, CloudError> {
        lines.next().ok_or_else(|| bad("unexpected end of PLY".into()))?.map_err(CloudError::from)
    };
    if next()?.trim() != "ply" {
        return Err(bad("missing ply magic".into()));
    }
    // (name, count, property names) in header order.
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    loop {
        let line = next()?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", f, ..] if *f != "ascii" => return Err(bad(format!("only ASCII PLY is supported, got {f}"))),
            ["element", name, count] => {
                let n = count.parse().map_err(|_| bad(format!("bad element count {count}")))?;
                elements.push((name.to_string(), n, Vec::new()));
            }
            ["property", "list", ..] => {
                if let Some(e) = elements.last_mut() {
                    e.2.push("<list>".into());
                }
            }
            ["property", _, name] => {
                if let Some(e) = elements.last_mut() {
                    e.2.push(name.to_string());
                }
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    let mut points = Vec::new();
    for (name, count, props) in elements {
        if name != "vertex" {
            for _ in 0..count {
                next()?;
            }
            continue;
        }
        let col = |axis: &str| props.iter().position(|p| p == axis).ok_or_else(|| bad(format!("vertex has no {axis}")));
        let (ix, iy, iz) = (col("x")?, col("y")?, col("z")?);
        points.reserve(count);
        for row in 0..count {
            let line = next()?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            let get = |i: usize| -> Result<f64, CloudError> {
                vals.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(format!("vertex {row}: cannot read column {i}")))
            };
            points.push(Vector3::new(get(ix)?, get(iy)?, get(iz)?));
        }
    }
    Ok(points)
}

/// Three numeric columns; a non-numeric first row is taken as a header.
fn parse_csv<R: Read>(reader: R) -> Result<Vec<Vector3<f64>>, CloudError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals: Option<Vec<f64>> = rec.iter().take(3).map(|s| s.parse().ok()).collect();
        match vals {
            Some(v) if v.len() == 3 => points.push(Vector3::new(v[0], v[1], v[2])),
            _ if row == 0 => continue,
            _ => return Err(CloudError::Parse(format!("row {}: expected x,y,z", row + 1))),
        }
    }
    Ok(points)
}
