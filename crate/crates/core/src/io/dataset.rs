//! Datasets on disk: a manifest of `image label partition` triples, one
//! graymap per image and one `x y` label file per image.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::boost::TrainingSample;
use crate::error::{Error, Result};
use crate::geometry::{Extent, GrayImage, Location};

use super::{content_lines, pgm, read_text, write_text};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Validation, Partition::Test];

    pub fn tag(&self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Validation => "validation",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Partition::Train),
            "validation" => Ok(Partition::Validation),
            "test" => Ok(Partition::Test),
            other => Err(format!("unknown partition `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetEntry {
    /// Identifier used in detection files.
    pub id: String,
    pub image: GrayImage,
    pub objects: Vec<Location>,
    pub partition: Partition,
}

impl DatasetEntry {
    pub fn sample(&self) -> TrainingSample {
        TrainingSample {
            image: self.image.clone(),
            objects: self.objects.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn partition(&self, p: Partition) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.partition == p)
    }

    pub fn samples(&self, p: Partition) -> Vec<TrainingSample> {
        self.partition(p).map(DatasetEntry::sample).collect()
    }
}

pub fn format_labels(objects: &[Location]) -> String {
    objects.iter().map(|o| format!("{} {}\n", o.x, o.y)).collect()
}

pub fn parse_labels(text: &str, path: &Path, extent: Extent) -> Result<Vec<Location>> {
    let mut out = Vec::new();
    for (line, content) in content_lines(text) {
        let mut parts = content.split_whitespace();
        let mut coord = |name: &str| -> Result<u32> {
            let token = parts
                .next()
                .ok_or_else(|| Error::parse(path, line, format!("missing {name} coordinate")))?;
            token
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad {name} coordinate `{token}`")))
        };
        let loc = Location::new(coord("x")?, coord("y")?);
        if parts.next().is_some() {
            return Err(Error::parse(path, line, "expected exactly two coordinates"));
        }
        if !extent.contains(loc) {
            return Err(Error::parse(
                path,
                line,
                format!("label ({}, {}) outside the {}x{} image", loc.x, loc.y, extent.width, extent.height),
            ));
        }
        out.push(loc);
    }
    Ok(out)
}

pub fn read_labels(path: &Path, extent: Extent) -> Result<Vec<Location>> {
    parse_labels(&read_text(path)?, path, extent)
}

/// Loads every entry named by a manifest; paths are relative to the
/// manifest's directory.
pub fn load_dataset(manifest: &Path) -> Result<Dataset> {
    let text = read_text(manifest)?;
    let root = manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut entries: Vec<DatasetEntry> = Vec::new();
    for (line, content) in content_lines(&text) {
        let parts: Vec<&str> = content.split_whitespace().collect();
        let [image, label, partition] = parts[..] else {
            return Err(Error::parse(manifest, line, "expected `image label partition`"));
        };
        let partition: Partition = partition.parse().map_err(|m: String| Error::parse(manifest, line, m))?;
        let id = Path::new(image)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| image.to_owned());
        if entries.iter().any(|e| e.id == id) {
            return Err(Error::parse(manifest, line, format!("duplicate image id `{id}`")));
        }
        let image = pgm::read(&root.join(image))?;
        let objects = read_labels(&root.join(label), image.extent())?;
        entries.push(DatasetEntry {
            id,
            image,
            objects,
            partition,
        });
    }
    Ok(Dataset { entries })
}

/// Writes `images/<id>.pgm`, `labels/<id>.txt` and `manifest.txt` under
/// `dir`, returning the manifest path.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    let mut manifest = String::new();
    for e in &dataset.entries {
        let image = format!("images/{}.pgm", e.id);
        let label = format!("labels/{}.txt", e.id);
        pgm::write(&dir.join(&image), &e.image)?;
        write_text(&dir.join(&label), &format_labels(&e.objects))?;
        manifest.push_str(&format!("{image} {label} {}\n", e.partition));
    }
    let path = dir.join("manifest.txt");
    write_text(&path, &manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse_and_reject() {
        let p = Path::new("l.txt");
        let e = Extent::new(10, 10);
        assert_eq!(
            parse_labels("1 2\n# c\n\n3 4\n", p, e).unwrap(),
            vec![Location::new(1, 2), Location::new(3, 4)]
        );
        assert!(matches!(parse_labels("1 2\n10 0\n", p, e), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_labels("1\n", p, e), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_labels("1 2 3\n", p, e), Err(Error::Parse { line: 1, .. })));
        assert!(parse_labels("", p, e).unwrap().is_empty());
    }

    #[test]
    fn round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::filled(Extent::new(6, 4), 17);
        let ds = Dataset {
            entries: vec![
                DatasetEntry {
                    id: "a".into(),
                    image: img.clone(),
                    objects: vec![Location::new(1, 1)],
                    partition: Partition::Train,
                },
                DatasetEntry {
                    id: "b".into(),
                    image: img,
                    objects: vec![],
                    partition: Partition::Test,
                },
            ],
        };
        let manifest = save_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(&manifest).unwrap(), ds);
        std::fs::remove_file(dir.path().join("labels/b.txt")).unwrap();
        assert!(matches!(load_dataset(&manifest), Err(Error::Io { .. })));
    }
}
