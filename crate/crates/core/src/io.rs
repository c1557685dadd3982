//! Text formats: correspondence lists, 4×4 ground-truth matrices, ASCII
//! PLY clouds, benchmark manifests and key=value config files.
//!
//! Writers print every float with 17 significant digits so that loading a
//! written file reproduces the values bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::bench::{PairData, PairInput};
use crate::error::{Error, Result};
use crate::geometry::{nearest_rotation, Correspondence, Point3, RigidTransform, UnitVec3};
use crate::graph::{estimate_normals, estimate_pair_resolution, nearest_indices};

/// Largest deviation from a rotation accepted (and projected away) in a
/// ground-truth file.
pub const GT_ROTATION_TOLERANCE: f64 = 1e-3;
const NORMAL_NEIGHBORS: usize = 20;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_numbers(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .enumerate()
        .map(|(col, tok)| {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("column {}: '{tok}' is not a number", col + 1)))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(path, line_no, format!("column {}: non-finite value '{tok}'", col + 1)))
            }
        })
        .collect()
}

fn unit_normal(path: &Path, line_no: usize, v: Vector3<f64>) -> Result<UnitVec3> {
    let norm = v.norm();
    if norm < 1e-9 {
        return Err(Error::parse(path, line_no, "zero-length normal"));
    }
    // leave already-unit normals untouched so files round-trip exactly
    if (norm - 1.0).abs() <= 1e-12 {
        Ok(UnitVec3::new_unchecked(v))
    } else {
        Ok(UnitVec3::new_normalize(v))
    }
}

/// Whitespace-separated correspondences, one per line:
/// `sx sy sz tx ty tz [snx sny snz tnx tny tnz]`. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_correspondences(text: &str, path: &Path) -> Result<Vec<Correspondence>> {
    let mut out = Vec::new();
    for (line_no, line) in content_lines(text) {
        let v = parse_numbers(path, line_no, line)?;
        if v.len() != 6 && v.len() != 12 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 6 or 12 columns, found {}", v.len()),
            ));
        }
        let mut c = Correspondence::new(out.len(), Point3::new(v[0], v[1], v[2]), Point3::new(v[3], v[4], v[5]));
        if v.len() == 12 {
            c = c.with_normals(
                unit_normal(path, line_no, Vector3::new(v[6], v[7], v[8]))?,
                unit_normal(path, line_no, Vector3::new(v[9], v[10], v[11]))?,
            );
        }
        out.push(c);
    }
    Ok(out)
}

pub fn read_correspondences(path: &Path) -> Result<Vec<Correspondence>> {
    parse_correspondences(&read_text(path)?, path)
}

/// Writes 12 columns when every correspondence has normals, else 6.
pub fn format_correspondences(corrs: &[Correspondence]) -> String {
    let with_normals = !corrs.is_empty() && corrs.iter().all(Correspondence::has_normals);
    let mut s = String::new();
    for c in corrs {
        let mut cols: Vec<f64> = c.source.iter().chain(c.target.iter()).copied().collect();
        if with_normals {
            if let (Some(a), Some(b)) = (c.source_normal, c.target_normal) {
                cols.extend(a.iter().chain(b.iter()));
            }
        }
        let line: Vec<String> = cols.into_iter().map(fmt_f64).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn write_correspondences(path: &Path, corrs: &[Correspondence]) -> Result<()> {
    write_text(path, &format_correspondences(corrs))
}

/// A 4×4 row-major rigid transform. A rotation block that is off by at
/// most [`GT_ROTATION_TOLERANCE`] is projected onto the nearest rotation.
pub fn parse_ground_truth(text: &str, path: &Path) -> Result<RigidTransform> {
    let mut values = Vec::with_capacity(16);
    let mut last_line = 0;
    for (line_no, line) in content_lines(text) {
        values.extend(parse_numbers(path, line_no, line)?);
        last_line = line_no;
        if values.len() > 16 {
            return Err(Error::parse(path, line_no, "more than 16 matrix entries"));
        }
    }
    if values.len() != 16 {
        return Err(Error::parse(
            path,
            last_line.max(1),
            format!("expected 16 matrix entries, found {}", values.len()),
        ));
    }
    let m = Matrix4::from_row_slice(&values);
    let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
    if bottom != [0.0, 0.0, 0.0, 1.0] {
        return Err(Error::parse(path, last_line, format!("bottom row must be 0 0 0 1, found {bottom:?}")));
    }
    let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
    let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into_owned();
    if let Ok(exact) = RigidTransform::new(r, t) {
        return Ok(exact);
    }
    let projected = nearest_rotation(&r)?;
    let deviation = (projected - r).norm();
    if deviation > GT_ROTATION_TOLERANCE {
        return Err(Error::parse(
            path,
            last_line,
            format!("rotation block is {deviation:.3e} away from a rotation"),
        ));
    }
    RigidTransform::new(projected, t)
}

pub fn read_ground_truth(path: &Path) -> Result<RigidTransform> {
    parse_ground_truth(&read_text(path)?, path)
}

pub fn format_ground_truth(t: &RigidTransform) -> String {
    let mut s = String::new();
    for row in t.to_rows() {
        let cols: Vec<String> = row.into_iter().map(fmt_f64).collect();
        let _ = writeln!(s, "{}", cols.join(" "));
    }
    s
}

pub fn write_ground_truth(path: &Path, t: &RigidTransform) -> Result<()> {
    write_text(path, &format_ground_truth(t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<UnitVec3>>,
}

/// ASCII PLY. Only the `vertex` element is read; `x y z` are required and
/// `nx ny nz` are picked up when present. Other scalar properties and
/// elements are skipped.
pub fn parse_ply(text: &str, path: &Path) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(path, 1, "missing 'ply' magic line")),
    }
    // (name, count, scalar property names, whether a list property appears)
    let mut elements: Vec<(String, usize, Vec<String>, bool)> = Vec::new();
    let mut header_done = false;
    for (line_no, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(Error::parse(path, line_no, format!("unsupported PLY format '{other}', only ascii")))
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, format!("bad element count '{count}'")))?;
                elements.push((name.to_string(), count, Vec::new(), false));
            }
            ["property", "list", ..] => match elements.last_mut() {
                Some(e) => e.3 = true,
                None => return Err(Error::parse(path, line_no, "property before any element")),
            },
            ["property", _ty, name] => match elements.last_mut() {
                Some(e) => e.2.push(name.to_string()),
                None => return Err(Error::parse(path, line_no, "property before any element")),
            },
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(Error::parse(path, line_no, format!("unexpected header line '{line}'"))),
        }
    }
    if !header_done {
        return Err(Error::parse(path, text.lines().count().max(1), "missing end_header"));
    }
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut has_normals = false;
    for (name, count, props, has_list) in &elements {
        if name != "vertex" {
            // vertex data is read first in the common layout; skip the rest
            for _ in 0..*count {
                if lines.next().is_none() {
                    return Err(Error::parse(path, text.lines().count(), format!("truncated '{name}' element")));
                }
            }
            continue;
        }
        if *has_list {
            return Err(Error::parse(path, 1, "list properties on vertices are not supported"));
        }
        let col = |n: &str| props.iter().position(|p| p == n);
        let (Some(x), Some(y), Some(z)) = (col("x"), col("y"), col("z")) else {
            return Err(Error::parse(path, 1, "vertex element lacks x, y or z"));
        };
        let normal_cols = match (col("nx"), col("ny"), col("nz")) {
            (Some(a), Some(b), Some(c)) => Some((a, b, c)),
            _ => None,
        };
        has_normals = normal_cols.is_some();
        for _ in 0..*count {
            let Some((line_no, line)) = lines.next() else {
                return Err(Error::parse(
                    path,
                    text.lines().count(),
                    format!("expected {count} vertices, file ended after {}", points.len()),
                ));
            };
            let v = parse_numbers(path, line_no, line)?;
            if v.len() != props.len() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected {} vertex values, found {}", props.len(), v.len()),
                ));
            }
            points.push(Point3::new(v[x], v[y], v[z]));
            if let Some((a, b, c)) = normal_cols {
                normals.push(unit_normal(path, line_no, Vector3::new(v[a], v[b], v[c]))?);
            }
        }
    }
    Ok(PointCloud {
        points,
        normals: has_normals.then_some(normals),
    })
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    parse_ply(&read_text(path)?, path)
}

pub fn format_ply(cloud: &PointCloud) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ply\nformat ascii 1.0\nelement vertex {}", cloud.points.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.normals.is_some() {
        s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    s.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let mut cols: Vec<f64> = p.iter().copied().collect();
        if let Some(n) = &cloud.normals {
            cols.extend(n[i].iter());
        }
        let line: Vec<String> = cols.into_iter().map(fmt_f64).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_text(path, &format_ply(cloud))
}

/// One manifest line: `corr gt [source.ply target.ply] [pr=VALUE]`, paths
/// relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub corr: PathBuf,
    pub gt: PathBuf,
    pub source_cloud: Option<PathBuf>,
    pub target_cloud: Option<PathBuf>,
    pub pr: Option<f64>,
    pub line: usize,
}

impl ManifestEntry {
    pub fn name(&self) -> String {
        self.corr
            .file_stem()
            .map_or_else(|| self.corr.display().to_string(), |s| s.to_string_lossy().into_owned())
    }
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (line_no, line) in content_lines(text) {
        let mut paths = Vec::new();
        let mut pr = None;
        for tok in line.split_whitespace() {
            if let Some(v) = tok.strip_prefix("pr=") {
                let v: f64 = v
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, format!("bad resolution '{v}'")))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::parse(path, line_no, "resolution must be positive"));
                }
                pr = Some(v);
            } else {
                paths.push(base.join(tok));
            }
        }
        let (source_cloud, target_cloud) = match paths.len() {
            2 => (None, None),
            4 => (Some(paths[2].clone()), Some(paths[3].clone())),
            n => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected 'corr gt [source.ply target.ply] [pr=VALUE]', found {n} paths"),
                ))
            }
        };
        out.push(ManifestEntry {
            corr: paths[0].clone(),
            gt: paths[1].clone(),
            source_cloud,
            target_cloud,
            pr,
            line: line_no,
        });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    parse_manifest(&read_text(path)?, path)
}

/// Gives each correspondence the normal of the nearest point of the
/// respective cloud, estimating cloud normals when the cloud has none.
pub fn assign_normals(corrs: &mut [Correspondence], source: &PointCloud, target: &PointCloud) -> Result<()> {
    let cloud_normals = |c: &PointCloud| match &c.normals {
        Some(n) => Ok(n.clone()),
        None => estimate_normals(&c.points, NORMAL_NEIGHBORS),
    };
    let src_normals = cloud_normals(source)?;
    let tgt_normals = cloud_normals(target)?;
    let src_q: Vec<Point3> = corrs.iter().map(|c| c.source).collect();
    let tgt_q: Vec<Point3> = corrs.iter().map(|c| c.target).collect();
    let src_nn = nearest_indices(&source.points, &src_q)?;
    let tgt_nn = nearest_indices(&target.points, &tgt_q)?;
    for (i, c) in corrs.iter_mut().enumerate() {
        if !c.has_normals() {
            c.source_normal = Some(src_normals[src_nn[i]]);
            c.target_normal = Some(tgt_normals[tgt_nn[i]]);
        }
    }
    Ok(())
}

/// A loaded pair plus its clouds, when the manifest names them.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPair {
    pub data: PairData,
    pub source_cloud: Option<PointCloud>,
    pub target_cloud: Option<PointCloud>,
}

/// Loads one manifest entry. Resolution comes from `pr=`, else from the
/// clouds, else from the keypoints themselves. With `need_normals`,
/// correspondences without normals take them from the clouds.
pub fn load_pair(entry: &ManifestEntry, need_normals: bool) -> Result<LoadedPair> {
    let mut corrs = read_correspondences(&entry.corr)?;
    let gt = read_ground_truth(&entry.gt)?;
    let clouds = match (&entry.source_cloud, &entry.target_cloud) {
        (Some(s), Some(t)) => Some((read_ply(s)?, read_ply(t)?)),
        _ => None,
    };
    let resolution = match (entry.pr, &clouds) {
        (Some(pr), _) => pr,
        (None, Some((s, t))) => estimate_pair_resolution(&s.points, &t.points)?,
        (None, None) => {
            let s: Vec<Point3> = corrs.iter().map(|c| c.source).collect();
            let t: Vec<Point3> = corrs.iter().map(|c| c.target).collect();
            estimate_pair_resolution(&s, &t)?
        }
    };
    if need_normals && !corrs.iter().all(Correspondence::has_normals) {
        if let Some((s, t)) = &clouds {
            assign_normals(&mut corrs, s, t)?;
        }
    }
    let (source_cloud, target_cloud) = clouds.map_or((None, None), |(s, t)| (Some(s), Some(t)));
    Ok(LoadedPair {
        data: PairData {
            name: entry.name(),
            corrs,
            gt,
            resolution,
        },
        source_cloud,
        target_cloud,
    })
}

/// Loads every entry; failures become [`PairInput::Failed`] so that a
/// sweep never aborts on one bad pair.
pub fn load_pairs(entries: &[ManifestEntry], need_normals: bool) -> Vec<PairInput> {
    entries
        .iter()
        .map(|e| match load_pair(e, need_normals) {
            Ok(p) => PairInput::Loaded(p.data),
            Err(err) => PairInput::Failed {
                name: e.name(),
                message: err.to_string(),
            },
        })
        .collect()
}

/// Flat `key = value` lines; `#` starts a comment line. Returns entries in
/// file order with their line numbers.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String, usize)>> {
    content_lines(text)
        .map(|(line_no, line)| match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string(), line_no)),
            _ => Err(Error::parse(path, line_no, format!("expected 'key = value', found '{line}'"))),
        })
        .collect()
}

pub fn read_key_values(path: &Path) -> Result<Vec<(String, String, usize)>> {
    parse_key_values(&read_text(path)?, path)
}
