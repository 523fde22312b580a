//! Slide records and their CSV form.
//!
//! Point-set CSV columns:
//! `slide_id,label,source,patch_size,stride,patch_row,patch_col,origin_x,origin_y,x,y`.
//! Each row is one nucleus in patch-local coordinates. A patch without
//! nuclei is written as one row with empty `x` and `y`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::points::{Point, PointSet};
use crate::{Error, Result};

const POINTSET_HEADER: [&str; 11] = [
    "slide_id",
    "label",
    "source",
    "patch_size",
    "stride",
    "patch_row",
    "patch_col",
    "origin_x",
    "origin_y",
    "x",
    "y",
];

/// Where a slide came from and how it was tiled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub patch_size: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub row: usize,
    pub col: usize,
    pub origin_x: usize,
    pub origin_y: usize,
    /// Nuclei in patch-local coordinates; the set's extent is the patch size.
    pub points: PointSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlideRecord {
    pub slide_id: String,
    pub label: usize,
    pub provenance: Provenance,
    pub patches: Vec<PatchRecord>,
}

impl SlideRecord {
    /// Checks label range and that every patch has the declared size.
    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.label >= classes {
            return Err(Error::invalid(format!(
                "slide {}: label {} outside {classes} classes",
                self.slide_id, self.label
            )));
        }
        let size = self.provenance.patch_size as f64;
        for p in &self.patches {
            if p.points.width() != size || p.points.height() != size {
                return Err(Error::invalid(format!(
                    "slide {}: patch ({}, {}) is {}x{}, expected {size}x{size}",
                    self.slide_id,
                    p.row,
                    p.col,
                    p.points.width(),
                    p.points.height()
                )));
            }
        }
        Ok(())
    }

    pub fn nuclei_count(&self) -> usize {
        self.patches.iter().map(|p| p.points.len()).sum()
    }
}

pub fn write_pointsets<W: Write>(out: W, records: &[SlideRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POINTSET_HEADER)?;
    for r in records {
        for p in &r.patches {
            let prefix = [
                r.slide_id.clone(),
                r.label.to_string(),
                r.provenance.source.clone(),
                r.provenance.patch_size.to_string(),
                r.provenance.stride.to_string(),
                p.row.to_string(),
                p.col.to_string(),
                p.origin_x.to_string(),
                p.origin_y.to_string(),
            ];
            if p.points.is_empty() {
                w.write_record(prefix.iter().map(String::as_str).chain(["", ""]))?;
            }
            for q in p.points.points() {
                let (x, y) = (q.x.to_string(), q.y.to_string());
                w.write_record(prefix.iter().map(String::as_str).chain([x.as_str(), y.as_str()]))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<pointset writer>", e))?;
    Ok(())
}

pub fn save_pointsets(path: &Path, records: &[SlideRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_pointsets(std::io::BufWriter::new(f), records)
}

/// Parses point-set CSV. Slides and patches keep their order of first
/// appearance; `path` is only used in diagnostics.
pub fn read_pointsets<R: Read>(input: R, path: &Path) -> Result<Vec<SlideRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header.iter().collect::<Vec<_>>() != POINTSET_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", POINTSET_HEADER.join(",")),
        });
    }

    struct Pending {
        record: SlideRecord,
        patch_index: HashMap<(usize, usize), usize>,
        points: Vec<Vec<Point>>,
    }
    let mut slides: Vec<Pending> = Vec::new();
    let mut slide_index: HashMap<String, usize> = HashMap::new();

    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let fail = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let row = row.map_err(|e| fail(e.to_string()))?;
        if row.len() != POINTSET_HEADER.len() {
            return Err(fail(format!("expected {} fields, got {}", POINTSET_HEADER.len(), row.len())));
        }
        let int = |k: usize| -> Result<usize> {
            row[k]
                .trim()
                .parse::<usize>()
                .map_err(|_| fail(format!("{}: expected a non-negative integer, got {:?}", POINTSET_HEADER[k], &row[k])))
        };
        let real = |k: usize| -> Result<f64> {
            row[k]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(format!("{}: expected a finite number, got {:?}", POINTSET_HEADER[k], &row[k])))
        };
        let slide_id = row[0].to_string();
        if slide_id.is_empty() {
            return Err(fail("empty slide_id".into()));
        }
        let label = int(1)?;
        let provenance = Provenance {
            source: row[2].to_string(),
            patch_size: int(3)?,
            stride: int(4)?,
        };
        if provenance.patch_size == 0 {
            return Err(fail("patch_size must be positive".into()));
        }
        let (prow, pcol, ox, oy) = (int(5)?, int(6)?, int(7)?, int(8)?);
        let point = match (row[9].trim().is_empty(), row[10].trim().is_empty()) {
            (true, true) => None,
            (false, false) => {
                let (x, y) = (real(9)?, real(10)?);
                let size = provenance.patch_size as f64;
                if !(0.0..size).contains(&x) || !(0.0..size).contains(&y) {
                    return Err(fail(format!("point ({x}, {y}) outside patch [0, {size}) x [0, {size})")));
                }
                Some(Point::new(x, y))
            }
            _ => return Err(fail("x and y must both be present or both be empty".into())),
        };

        let si = *slide_index.entry(slide_id.clone()).or_insert_with(|| {
            slides.push(Pending {
                record: SlideRecord {
                    slide_id: slide_id.clone(),
                    label,
                    provenance: provenance.clone(),
                    patches: Vec::new(),
                },
                patch_index: HashMap::new(),
                points: Vec::new(),
            });
            slides.len() - 1
        });
        let s = &mut slides[si];
        if s.record.label != label || s.record.provenance != provenance {
            return Err(fail(format!("slide {slide_id}: label or tiling differs from earlier rows")));
        }
        let pi = match s.patch_index.get(&(prow, pcol)) {
            Some(&pi) => {
                let p = &s.record.patches[pi];
                if (p.origin_x, p.origin_y) != (ox, oy) {
                    return Err(fail(format!("patch ({prow}, {pcol}) origin differs from earlier rows")));
                }
                pi
            }
            None => {
                let size = provenance.patch_size as f64;
                s.record.patches.push(PatchRecord {
                    row: prow,
                    col: pcol,
                    origin_x: ox,
                    origin_y: oy,
                    points: PointSet::empty(size, size)?,
                });
                s.points.push(Vec::new());
                s.patch_index.insert((prow, pcol), s.record.patches.len() - 1);
                s.record.patches.len() - 1
            }
        };
        if let Some(p) = point {
            s.points[pi].push(p);
        }
    }

    slides
        .into_iter()
        .map(|mut s| {
            let size = s.record.provenance.patch_size as f64;
            for (patch, pts) in s.record.patches.iter_mut().zip(s.points) {
                patch.points = PointSet::new(pts, size, size)?;
            }
            Ok(s.record)
        })
        .collect()
}

pub fn load_pointsets(path: &Path) -> Result<Vec<SlideRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let records = read_pointsets(std::io::BufReader::new(f), path)?;
    if records.is_empty() {
        log::warn!("{}: no point-set rows", path.display());
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<SlideRecord> {
        let prov = Provenance {
            source: "synthetic".into(),
            patch_size: 16,
            stride: 16,
        };
        vec![
            SlideRecord {
                slide_id: "a".into(),
                label: 1,
                provenance: prov.clone(),
                patches: vec![
                    PatchRecord {
                        row: 0,
                        col: 0,
                        origin_x: 0,
                        origin_y: 0,
                        points: PointSet::new([Point::new(0.1, 2.0 / 3.0), Point::new(15.999, 0.0)], 16.0, 16.0).unwrap(),
                    },
                    PatchRecord {
                        row: 0,
                        col: 1,
                        origin_x: 16,
                        origin_y: 0,
                        points: PointSet::empty(16.0, 16.0).unwrap(),
                    },
                ],
            },
            SlideRecord {
                slide_id: "b, quoted".into(),
                label: 0,
                provenance: prov,
                patches: vec![PatchRecord {
                    row: 0,
                    col: 0,
                    origin_x: 0,
                    origin_y: 0,
                    points: PointSet::new([Point::new(1e-17, 3.0)], 16.0, 16.0).unwrap(),
                }],
            },
        ]
    }

    fn parse(text: &str) -> Result<Vec<SlideRecord>> {
        read_pointsets(text.as_bytes(), Path::new("in.csv"))
    }

    #[test]
    fn round_trip() {
        let recs = sample();
        let mut buf = Vec::new();
        write_pointsets(&mut buf, &recs).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), recs);
    }

    #[test]
    fn empty_input() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse(&POINTSET_HEADER.join(",")).unwrap().is_empty());
    }

    #[test]
    fn out_of_patch_point_reports_line() {
        let text = format!("{}\ns,0,src,16,16,0,0,0,0,1,1\ns,0,src,16,16,0,0,0,0,16,1\n", POINTSET_HEADER.join(","));
        match parse(&text) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("outside"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        let h = POINTSET_HEADER.join(",");
        for bad in [
            "s,x,src,16,16,0,0,0,0,1,1",
            "s,0,src,16,16,0,0,0,0,1,",
            "s,0,src,16,16,0,0,0,0,nan,1",
            "s,0,src,0,16,0,0,0,0,,",
            "s,0,src,16,16,0,0,0,0,1",
        ] {
            let err = parse(&format!("{h}\n{bad}\n")).unwrap_err();
            assert!(matches!(err, Error::Parse { line: 2, .. }), "{bad}: {err}");
        }
        assert!(parse("a,b\n1,2\n").is_err());
        let inconsistent = format!("{h}\ns,0,src,16,16,0,0,0,0,1,1\ns,1,src,16,16,0,1,16,0,1,1\n");
        assert!(matches!(parse(&inconsistent), Err(Error::Parse { line: 3, .. })));
    }
}
