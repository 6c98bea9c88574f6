//! On-disk dataset layout:
//!
//! ```text
//! root/labels.csv         ID,Angle  (angle with 6 decimals, \n endings)
//! root/images/000000.ppm  P6
//! root/depth/000000.pgm   P5, 16-bit millimeters (optional)
//! root/metadata.json      camera, map, expert, per-row timestamps
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use hallway_core::recorder::{Dataset, DatasetMeta, Sample};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pnm;

pub const LABELS_HEADER: &str = "ID,Angle";

pub fn image_path(root: &Path, id: u64) -> PathBuf {
    root.join("images").join(format!("{id:06}.ppm"))
}

pub fn depth_path(root: &Path, id: u64) -> PathBuf {
    root.join("depth").join(format!("{id:06}.pgm"))
}

#[derive(Serialize, Deserialize)]
struct MetaFile {
    #[serde(flatten)]
    meta: DatasetMeta,
    /// Aligned with the rows of labels.csv.
    #[serde(default)]
    timestamps: Vec<f64>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(Error::io(&tmp))?;
    fs::rename(&tmp, path).map_err(Error::io(path))
}

/// Incremental writer. Frames land on disk as they are pushed; the label
/// file only changes in [`DatasetWriter::flush`], and then atomically, so
/// every row always has its image.
pub struct DatasetWriter {
    root: PathBuf,
    meta: DatasetMeta,
    rows: Vec<(u64, f64, f64)>,
}

impl DatasetWriter {
    /// Starts an empty dataset at `root`, creating directories as needed.
    pub fn create(root: impl AsRef<Path>, meta: DatasetMeta) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("images")).map_err(Error::io(&root))?;
        let mut w = Self { root, meta, rows: Vec::new() };
        w.flush()?;
        Ok(w)
    }

    /// Appends to the dataset at `root` if it has a label file, otherwise
    /// starts a new one. Existing metadata is kept.
    pub fn open_or_create(root: impl AsRef<Path>, meta: DatasetMeta) -> Result<Self> {
        let root = root.as_ref();
        let labels = root.join("labels.csv");
        if !labels.exists() {
            return Self::create(root, meta);
        }
        let text = fs::read_to_string(&labels).map_err(Error::io(&labels))?;
        let rows = parse_labels(&labels, &text)?;
        let (meta, stamps) = read_meta(root, rows.len())?;
        let rows = rows.into_iter().zip(stamps).map(|((id, a), t)| (id, a, t)).collect();
        Ok(Self { root: root.to_path_buf(), meta, rows })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Next unused id, for callers numbering their own samples.
    pub fn next_id(&self) -> u64 {
        self.rows.iter().map(|r| r.0 + 1).max().unwrap_or(0)
    }

    pub fn push(&mut self, s: &Sample) -> Result<()> {
        let p = image_path(&self.root, s.id);
        fs::write(&p, pnm::encode_ppm(&s.rgb)).map_err(Error::io(&p))?;
        if let Some(d) = &s.depth {
            let p = depth_path(&self.root, s.id);
            fs::create_dir_all(p.parent().expect("depth dir")).map_err(Error::io(&p))?;
            fs::write(&p, pnm::encode_pgm16(d)).map_err(Error::io(&p))?;
        }
        self.rows.push((s.id, s.angle, s.timestamp));
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        let mut csv = String::from(LABELS_HEADER);
        csv.push('\n');
        for (id, angle, _) in &self.rows {
            csv.push_str(&format!("{id},{angle:.6}\n"));
        }
        write_atomic(&self.root.join("labels.csv"), csv.as_bytes())?;
        let meta = MetaFile { meta: self.meta.clone(), timestamps: self.rows.iter().map(|r| r.2).collect() };
        let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        write_atomic(&self.root.join("metadata.json"), json.as_bytes())
    }
}

pub fn write_dataset(ds: &Dataset, root: impl AsRef<Path>) -> Result<()> {
    let mut w = DatasetWriter::create(root, ds.meta.clone())?;
    for s in &ds.samples {
        w.push(s)?;
    }
    w.flush()
}

fn parse_labels(path: &Path, text: &str) -> Result<Vec<(u64, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(LABELS_HEADER) => {}
        Some(other) => return Err(Error::format(path, format!("header must be {LABELS_HEADER:?}, found {other:?}"))),
        None => return Err(Error::format(path, "empty file")),
    }
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let bad = |msg: String| Error::Row { line: line_no, msg };
        if line.is_empty() {
            continue;
        }
        let (id, angle) = line.split_once(',').ok_or_else(|| bad(format!("expected ID,Angle, found {line:?}")))?;
        let id: u64 = id.trim().parse().map_err(|_| bad(format!("invalid ID {id:?}")))?;
        let angle: f64 = angle.trim().parse().map_err(|_| bad(format!("invalid angle {angle:?}")))?;
        if !(-1.0..=1.0).contains(&angle) {
            return Err(bad(format!("angle {angle} outside [-1, 1]")));
        }
        if !seen.insert(id) {
            return Err(bad(format!("duplicate ID {id}")));
        }
        rows.push((id, angle));
    }
    Ok(rows)
}

fn read_meta(root: &Path, n_rows: usize) -> Result<(DatasetMeta, Vec<f64>)> {
    let path = root.join("metadata.json");
    if !path.exists() {
        return Ok((DatasetMeta::default(), vec![0.0; n_rows]));
    }
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    let m: MetaFile = serde_json::from_str(&text).map_err(|e| Error::format(&path, e))?;
    let mut ts = m.timestamps;
    if ts.len() != n_rows {
        ts = vec![0.0; n_rows];
    }
    Ok((m.meta, ts))
}

/// Ids of the `.ppm` files under `images/`.
fn image_ids(root: &Path) -> Result<BTreeSet<u64>> {
    let dir = root.join("images");
    let mut ids = BTreeSet::new();
    if !dir.exists() {
        return Ok(ids);
    }
    for entry in fs::read_dir(&dir).map_err(Error::io(&dir))? {
        let name = entry.map_err(Error::io(&dir))?.file_name();
        if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".ppm")).and_then(|s| s.parse().ok()) {
            ids.insert(id);
        }
    }
    Ok(ids)
}

/// Loads a dataset written by [`write_dataset`] or by hand. A missing
/// `metadata.json` gives default metadata and zero timestamps.
pub fn read_dataset(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();
    let labels = root.join("labels.csv");
    let text = fs::read_to_string(&labels).map_err(Error::io(&labels))?;
    let rows = parse_labels(&labels, &text)?;
    let (meta, stamps) = read_meta(root, rows.len())?;

    let mut samples = Vec::with_capacity(rows.len());
    for (&(id, angle), &timestamp) in rows.iter().zip(&stamps) {
        let p = image_path(root, id);
        let bytes = match fs::read(&p) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingImage(id)),
            Err(e) => return Err(Error::io(&p)(e)),
        };
        let rgb = pnm::decode_ppm(&bytes).map_err(|m| Error::format(&p, m))?;
        let dp = depth_path(root, id);
        let depth = match fs::read(&dp) {
            Ok(b) => Some(pnm::decode_pgm16(&b).map_err(|m| Error::format(&dp, m))?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(Error::io(&dp)(e)),
        };
        samples.push(Sample { id, rgb, depth, angle, timestamp });
    }
    let labelled: BTreeSet<u64> = rows.iter().map(|r| r.0).collect();
    if let Some(&id) = image_ids(root)?.difference(&labelled).next() {
        return Err(Error::OrphanImage(id));
    }
    Ok(Dataset::new(samples, meta))
}
