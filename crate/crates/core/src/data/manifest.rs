use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split `{other}`"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One utterance. Labels lie in [-3, 3].
#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub clip_id: String,
    pub video_id: String,
    pub split: Split,
    pub label: f64,
}

pub const LABEL_MIN: f64 = -3.0;
pub const LABEL_MAX: f64 = 3.0;
pub const MANIFEST_HEADER: [&str; 4] = ["clip_id", "video_id", "split", "label"];

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<ClipRecord>,
}

impl Manifest {
    /// Validates label range, split names and clip id uniqueness.
    pub fn new(records: Vec<ClipRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            let row = i + 1;
            if !(LABEL_MIN..=LABEL_MAX).contains(&r.label) {
                return Err(Error::Data(format!(
                    "row {row}: label {} outside [-3, 3] (clip {})",
                    r.label, r.clip_id
                )));
            }
            if r.clip_id.is_empty() || r.clip_id.contains(['/', '\\']) {
                return Err(Error::Data(format!("row {row}: invalid clip_id `{}`", r.clip_id)));
            }
            if !seen.insert(r.clip_id.as_str()) {
                return Err(Error::Data(format!("row {row}: duplicate clip_id `{}`", r.clip_id)));
            }
        }
        Ok(Manifest { records })
    }

    /// Clip counts as (train, valid, test).
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.records {
            c[r.split as usize] += 1;
        }
        c
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ClipRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other:?}", path.display())),
        })?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(Error::Data(format!(
            "{}: header must be `{}`, found `{}`",
            path.display(),
            MANIFEST_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Data(format!("{} row {row}: {e}", path.display())))?;
        let field = |j: usize| rec.get(j).unwrap_or_default();
        let split = Split::parse(field(2)).map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        let label: f64 = field(3)
            .parse()
            .map_err(|_| Error::Data(format!("row {row}: label `{}` is not a number", field(3))))?;
        records.push(ClipRecord {
            clip_id: field(0).to_string(),
            video_id: field(1).to_string(),
            split,
            label,
        });
    }
    Manifest::new(records)
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{other:?}")),
    })?;
    w.write_record(MANIFEST_HEADER)?;
    for r in &manifest.records {
        w.write_record([
            r.clip_id.as_str(),
            r.video_id.as_str(),
            r.split.as_str(),
            &r.label.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
