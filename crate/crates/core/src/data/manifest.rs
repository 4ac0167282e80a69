//! Line-oriented dataset index. After a `#` header, one tab-separated record
//! per sample: `lr_l lr_r hr_l hr_r scale [disparities]`, where the optional
//! last field is a comma-separated list of per-layer HR disparities. Paths
//! are relative to the manifest's directory unless absolute.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{load_png, StereoSample};
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "# nafssr stereo manifest v1: lr_l lr_r hr_l hr_r scale [disparities]";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub lr_l: PathBuf,
    pub lr_r: PathBuf,
    pub hr_l: PathBuf,
    pub hr_r: PathBuf,
    pub scale: usize,
    pub disparities: Vec<usize>,
}

impl ManifestEntry {
    /// Identifier used in reports: the left HR file stem without a
    /// trailing `_hr_l`.
    pub fn id(&self) -> String {
        let stem = self
            .hr_l
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match stem.strip_suffix("_hr_l") {
            Some(base) if !base.is_empty() => base.to_string(),
            _ => stem,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| Error::data(path, format!("line {}: {why}", lineno + 1));
            let fields: Vec<&str> = line.split('\t').collect();
            if !(5..=6).contains(&fields.len()) {
                return Err(bad(&format!("expected 5 or 6 tab-separated fields, found {}", fields.len())));
            }
            let scale = fields[4].parse().map_err(|_| bad("scale is not an integer"))?;
            let disparities = match fields.get(5) {
                Some(list) if !list.is_empty() => list
                    .split(',')
                    .map(|d| d.parse().map_err(|_| bad("bad disparity")))
                    .collect::<Result<Vec<usize>>>()?,
                _ => Vec::new(),
            };
            entries.push(ManifestEntry {
                lr_l: fields[0].into(),
                lr_r: fields[1].into(),
                hr_l: fields[2].into(),
                hr_r: fields[3].into(),
                scale,
                disparities,
            });
        }
        Ok(Manifest { root, entries })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for e in &self.entries {
            let disp: Vec<String> = e.disparities.iter().map(usize::to_string).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                e.lr_l.display(),
                e.lr_r.display(),
                e.hr_l.display(),
                e.hr_r.display(),
                e.scale,
                disp.join(",")
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load_sample(&self, i: usize) -> Result<StereoSample> {
        let e = &self.entries[i];
        let load = |p: &PathBuf| load_png(&self.resolve(p));
        let sample = StereoSample {
            lr_l: load(&e.lr_l)?,
            lr_r: load(&e.lr_r)?,
            hr_l: load(&e.hr_l)?,
            hr_r: load(&e.hr_r)?,
            scale: e.scale,
        };
        sample
            .check()
            .map_err(|err| Error::data(self.resolve(&e.hr_l), format!("inconsistent sample: {err}")))?;
        Ok(sample)
    }

    pub fn load_all(&self) -> Result<Vec<StereoSample>> {
        (0..self.len()).map(|i| self.load_sample(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = Manifest {
            root: PathBuf::from("/data"),
            entries: vec![
                ManifestEntry {
                    lr_l: "a_lr_l.png".into(),
                    lr_r: "a_lr_r.png".into(),
                    hr_l: "a_hr_l.png".into(),
                    hr_r: "a_hr_r.png".into(),
                    scale: 4,
                    disparities: vec![1, 3, 6],
                },
                ManifestEntry {
                    lr_l: "/abs/b_lr_l.png".into(),
                    lr_r: "b_lr_r.png".into(),
                    hr_l: "b_hr_l.png".into(),
                    hr_r: "b_hr_r.png".into(),
                    scale: 2,
                    disparities: vec![],
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        m.save(&path).unwrap();
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back.entries, m.entries);
        assert_eq!(back.resolve(Path::new("x.png")), dir.path().join("x.png"));
        assert_eq!(back.resolve(Path::new("/abs/y.png")), PathBuf::from("/abs/y.png"));
        assert_eq!(back.entries[0].id(), "a");
    }

    #[test]
    fn malformed_lines_name_the_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, format!("{MANIFEST_HEADER}\na\tb\tc\n")).unwrap();
        let err = Manifest::load(&path).unwrap_err().to_string();
        assert!(err.contains("bad.txt") && err.contains("line 2"), "{err}");
    }
}
