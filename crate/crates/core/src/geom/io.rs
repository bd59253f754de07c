//! File formats: OBJ meshes, ASCII PLY point clouds, `WNG1` scalar grids,
//! `DPF1` depth images, and 16-bit PGM intensity images.
//!
//! All writers are deterministic: floats are emitted with shortest
//! round-trip formatting and binary payloads are little-endian.

use super::{DepthImage, GridSpec, Point3, PointCloud, TriangleMesh, VoxelGrid};
use crate::{Error, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Magic for the binary winding-number grid format.
pub const WNG_MAGIC: &[u8; 4] = b"WNG1";
/// Magic for the binary depth-image format.
pub const DEPTH_MAGIC: &[u8; 4] = b"DPF1";

// ---------------------------------------------------------------------------
// OBJ (vertices + triangular faces only)
// ---------------------------------------------------------------------------

pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for v in mesh.vertices() {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let pathstr = path.display().to_string();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    *c = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::parse(&pathstr, format!("bad vertex at line {}", lineno + 1)))?;
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = [0u32; 3];
                for (k, slot) in idx.iter_mut().enumerate() {
                    let tok = it.next().ok_or_else(|| {
                        Error::parse(&pathstr, format!("face with <3 indices at line {}", lineno + 1))
                    })?;
                    // Accept "i", "i/t", "i/t/n" forms; indices are 1-based.
                    let head = tok.split('/').next().unwrap_or(tok);
                    let i: i64 = head.parse().map_err(|_| {
                        Error::parse(&pathstr, format!("bad face index at line {}", lineno + 1))
                    })?;
                    if i < 1 {
                        return Err(Error::parse(
                            &pathstr,
                            format!("non-positive face index at line {}", lineno + 1),
                        ));
                    }
                    let _ = k;
                    *slot = (i - 1) as u32;
                }
                if it.next().is_some() {
                    return Err(Error::parse(
                        &pathstr,
                        format!("non-triangular face at line {}", lineno + 1),
                    ));
                }
                faces.push(idx);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

// ---------------------------------------------------------------------------
// ASCII PLY point clouds
// ---------------------------------------------------------------------------

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "end_header")?;
    for p in cloud.points() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let pathstr = path.display().to_string();
    let mut lines = reader.lines();
    let mut count: Option<usize> = None;
    // Header.
    match lines.next() {
        Some(Ok(l)) if l.trim() == "ply" => {}
        _ => return Err(Error::parse(&pathstr, "missing ply magic")),
    }
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(&pathstr, "unterminated header"))??;
        let line = line.trim().to_string();
        if line == "end_header" {
            break;
        }
        if let Some(rest) = line.strip_prefix("element vertex ") {
            count = rest.trim().parse().ok();
        } else if line.starts_with("format") && !line.contains("ascii") {
            return Err(Error::parse(&pathstr, "only ascii PLY is supported"));
        }
    }
    let count = count.ok_or_else(|| Error::parse(&pathstr, "missing vertex element"))?;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(&pathstr, "truncated vertex list"))??;
        let mut it = line.split_whitespace();
        let mut coords = [0.0f64; 3];
        for c in &mut coords {
            *c = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(&pathstr, "bad vertex line"))?;
        }
        points.push(Point3::new(coords[0], coords[1], coords[2]));
    }
    PointCloud::new(points)
}

// ---------------------------------------------------------------------------
// WNG1 scalar grids: magic + dims(3xu32 LE) + origin(3xf64 LE) + spacing(f64
// LE) + payload(f32 LE, x fastest)
// ---------------------------------------------------------------------------

pub fn write_wng(path: &Path, grid: &VoxelGrid<f64>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(WNG_MAGIC)?;
    for d in grid.spec.dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for o in grid.spec.origin {
        w.write_all(&o.to_le_bytes())?;
    }
    w.write_all(&grid.spec.spacing.to_le_bytes())?;
    for &v in grid.data() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_wng(path: &Path) -> Result<VoxelGrid<f64>> {
    let pathstr = path.display().to_string();
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != WNG_MAGIC {
        return Err(Error::parse(&pathstr, "bad WNG1 magic"));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf)?;
        *d = u32::from_le_bytes(buf) as usize;
    }
    let mut origin = [0.0f64; 3];
    for o in &mut origin {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        *o = f64::from_le_bytes(buf);
    }
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let spacing = f64::from_le_bytes(buf);
    let spec = GridSpec::new(Point3::new(origin[0], origin[1], origin[2]), spacing, dims)?;
    let n = spec.voxel_count();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        let mut vb = [0u8; 4];
        r.read_exact(&mut vb)?;
        data.push(f32::from_le_bytes(vb) as f64);
    }
    VoxelGrid::new(spec, data)
}

// ---------------------------------------------------------------------------
// DPF1 depth images: magic + width(u32) + height(u32) + f32 LE row-major,
// invalid pixels stored as 0.0
// ---------------------------------------------------------------------------

pub fn write_depth(path: &Path, depth: &DepthImage) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(DEPTH_MAGIC)?;
    w.write_all(&(depth.width as u32).to_le_bytes())?;
    w.write_all(&(depth.height as u32).to_le_bytes())?;
    for &d in depth.values() {
        let stored = if d.is_finite() { d as f32 } else { 0.0f32 };
        w.write_all(&stored.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_depth(path: &Path) -> Result<DepthImage> {
    let pathstr = path.display().to_string();
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DEPTH_MAGIC {
        return Err(Error::parse(&pathstr, "bad DPF1 magic"));
    }
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    let width = u32::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf)?;
    let height = u32::from_le_bytes(buf) as usize;
    let mut values = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let mut vb = [0u8; 4];
        r.read_exact(&mut vb)?;
        let v = f32::from_le_bytes(vb) as f64;
        values.push(if v == 0.0 { f64::NAN } else { v });
    }
    DepthImage::new(width, height, values)
}

// ---------------------------------------------------------------------------
// 16-bit binary PGM (P5, maxval 65535, big-endian samples per spec)
// ---------------------------------------------------------------------------

/// Writes intensities in [0, 1] as a 16-bit PGM.
pub fn write_pgm16(path: &Path, width: usize, height: usize, intensities: &[f64]) -> Result<()> {
    if intensities.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "pgm buffer length {} != {width}x{height}",
            intensities.len()
        )));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P5\n{width} {height}\n65535\n")?;
    for &v in intensities {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        w.write_all(&q.to_be_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a 16-bit PGM back into intensities in [0, 1].
pub fn read_pgm16(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let pathstr = path.display().to_string();
    let mut r = BufReader::new(std::fs::File::open(path)?);
    // Read the magic plus three whitespace-separated header tokens.
    let mut tokens = Vec::new();
    let mut byte = [0u8; 1];
    let mut cur = Vec::new();
    while tokens.len() < 4 {
        r.read_exact(&mut byte)?;
        if byte[0].is_ascii_whitespace() {
            if !cur.is_empty() {
                tokens.push(String::from_utf8_lossy(&cur).to_string());
                cur.clear();
            }
        } else {
            cur.push(byte[0]);
        }
    }
    if tokens[0] != "P5" {
        return Err(Error::parse(&pathstr, "not a binary PGM"));
    }
    let width: usize = tokens[1]
        .parse()
        .map_err(|_| Error::parse(&pathstr, "bad width"))?;
    let height: usize = tokens[2]
        .parse()
        .map_err(|_| Error::parse(&pathstr, "bad height"))?;
    let maxval: u32 = tokens[3]
        .parse()
        .map_err(|_| Error::parse(&pathstr, "bad maxval"))?;
    if maxval != 65535 {
        return Err(Error::parse(&pathstr, "expected 16-bit PGM"));
    }
    let mut data = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let mut vb = [0u8; 2];
        r.read_exact(&mut vb)?;
        data.push(u16::from_be_bytes(vb) as f64 / 65535.0);
    }
    Ok((width, height, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn obj_round_trip_is_lossless() {
        let mesh = TriangleMesh::new(
            vec![
                Point3::new(0.1234567890123, -2.5, 1e-7),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 3.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.obj");
        write_obj(&path, &mesh).unwrap();
        let back = read_obj(&path).unwrap();
        assert_eq!(mesh, back);
    }

    #[test]
    fn ply_round_trip_is_lossless() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.25, -1.5, 3.125),
            Point3::new(1.0 / 3.0, 0.1, -0.7),
        ])
        .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.ply");
        write_ply(&path, &cloud).unwrap();
        assert_eq!(read_ply(&path).unwrap(), cloud);
    }

    #[test]
    fn wng_round_trip_through_f32() {
        let spec = GridSpec::new(Point3::new(-0.5, -0.5, -0.5), 0.25, [2, 3, 4]).unwrap();
        let data: Vec<f64> = (0..24).map(|i| (i as f64 * 0.125) as f32 as f64).collect();
        let grid = VoxelGrid::new(spec, data.clone()).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("g.wng");
        write_wng(&path, &grid).unwrap();
        let back = read_wng(&path).unwrap();
        assert_eq!(back.spec, spec);
        assert_eq!(back.data(), grid.data());
    }

    #[test]
    fn depth_invalid_maps_to_zero_on_disk() {
        let mut depth = DepthImage::invalid(3, 2);
        depth.set(1, 0, 2.5);
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.depth");
        write_depth(&path, &depth).unwrap();
        let back = read_depth(&path).unwrap();
        assert_eq!(back.valid_count(), 1);
        assert!((back.get(1, 0) - 2.5).abs() < 1e-6);
        assert!(!back.get(0, 0).is_finite());
    }

    #[test]
    fn pgm16_quantizes_round_trip() {
        let vals = vec![0.0, 0.25, 0.5, 1.0, 0.333, 0.9999];
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        write_pgm16(&path, 3, 2, &vals).unwrap();
        let (w, h, back) = read_pgm16(&path).unwrap();
        assert_eq!((w, h), (3, 2));
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }
}
