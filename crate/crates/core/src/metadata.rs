//! Per-image metadata and its CSV schema.
//!
//! Header: `image_id,camera_id,track_id,identity_id,brand_id,type_id,orientation_deg`.
//! An empty cell means the attribute is absent.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METADATA_HEADER: [&str; 7] = [
    "image_id",
    "camera_id",
    "track_id",
    "identity_id",
    "brand_id",
    "type_id",
    "orientation_deg",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CameraId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrackId(pub u32);

impl fmt::Display for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub camera_id: CameraId,
    pub track_id: Option<TrackId>,
    pub identity_id: Option<u32>,
    pub brand_id: Option<u32>,
    pub type_id: Option<u32>,
    /// Heading in degrees, `[0, 360)`.
    pub orientation_deg: Option<f64>,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, camera_id: CameraId) -> Self {
        Self {
            image_id: image_id.into(),
            camera_id,
            track_id: None,
            identity_id: None,
            brand_id: None,
            type_id: None,
            orientation_deg: None,
        }
    }
}

/// Validated list of image records, row-aligned with an [`EmbeddingSet`](crate::EmbeddingSet).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetadataTable {
    records: Vec<ImageRecord>,
}

impl MetadataTable {
    /// Checks id uniqueness, orientation range and single-camera tracks.
    pub fn new(records: Vec<ImageRecord>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(records.len());
        let mut track_cams: HashMap<TrackId, CameraId> = HashMap::new();
        for (row, r) in records.iter().enumerate() {
            if !ids.insert(r.image_id.as_str()) {
                return Err(Error::Schema {
                    row,
                    reason: format!("duplicate image_id {:?}", r.image_id),
                });
            }
            if let Some(o) = r.orientation_deg {
                if !(0.0..360.0).contains(&o) {
                    return Err(Error::Schema {
                        row,
                        reason: format!("orientation {o} outside [0, 360)"),
                    });
                }
            }
            if let Some(t) = r.track_id {
                let cam = *track_cams.entry(t).or_insert(r.camera_id);
                if cam != r.camera_id {
                    return Err(Error::Schema {
                        row,
                        reason: format!("track {t} spans cameras {cam} and {}", r.camera_id),
                    });
                }
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn get(&self, i: usize) -> &ImageRecord {
        &self.records[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ImageRecord> {
        self.records.iter()
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(METADATA_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.image_id.clone(),
                r.camera_id.0.to_string(),
                opt(r.track_id.map(|t| t.0)),
                opt(r.identity_id),
                opt(r.brand_id),
                opt(r.type_id),
                opt(r.orientation_deg),
            ])?;
        }
        w.into_inner()
            .map_err(|e| Error::Shape(format!("csv flush: {e}")))
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(METADATA_HEADER.iter().copied()) {
            return Err(Error::Schema {
                row: 0,
                reason: format!("expected header {}", METADATA_HEADER.join(",")),
            });
        }
        let mut records = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != METADATA_HEADER.len() {
                return Err(Error::Schema {
                    row,
                    reason: format!("expected 7 fields, found {}", rec.len()),
                });
            }
            let image_id = rec[0].to_string();
            if image_id.is_empty() {
                return Err(Error::Schema {
                    row,
                    reason: "empty image_id".into(),
                });
            }
            let camera_id =
                parse_cell::<u32>(&rec[1], row, "camera_id")?.ok_or_else(|| Error::Schema {
                    row,
                    reason: "camera_id is required".into(),
                })?;
            let orientation_deg = parse_cell::<f64>(&rec[6], row, "orientation_deg")?;
            if orientation_deg.is_some_and(|o| !o.is_finite()) {
                return Err(Error::Schema {
                    row,
                    reason: "orientation_deg must be finite".into(),
                });
            }
            records.push(ImageRecord {
                image_id,
                camera_id: CameraId(camera_id),
                track_id: parse_cell::<u32>(&rec[2], row, "track_id")?.map(TrackId),
                identity_id: parse_cell(&rec[3], row, "identity_id")?,
                brand_id: parse_cell(&rec[4], row, "brand_id")?,
                type_id: parse_cell(&rec[5], row, "type_id")?,
                orientation_deg,
            });
        }
        Self::new(records)
    }
}

impl<'a> IntoIterator for &'a MetadataTable {
    type Item = &'a ImageRecord;
    type IntoIter = std::slice::Iter<'a, ImageRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub(crate) fn parse_cell<T: std::str::FromStr>(
    cell: &str,
    row: usize,
    column: &str,
) -> Result<Option<T>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse().map(Some).map_err(|_| Error::Schema {
        row,
        reason: format!("cannot parse {column} from {cell:?}"),
    })
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<MetadataTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    MetadataTable::from_csv_reader(file)
}

pub fn save_metadata(table: &MetadataTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, table.to_csv_bytes()?).map_err(|e| Error::io(path, e))
}
