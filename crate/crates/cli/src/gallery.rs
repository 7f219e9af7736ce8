//! Gallery directory: one finger-code file per enrolled sample plus
//! `index.tsv` mapping samples to files.

use std::path::Path;

use ridgekit::imgio::SampleKey;
use ridgekit::{Error, Result};

pub const INDEX_FILE: &str = "index.tsv";
const HEADER: &str = "#ridgekit-gallery v1";

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub key: SampleKey,
    /// Code file name, or the failure reason for an absent entry.
    pub file: std::result::Result<String, String>,
}

impl GalleryEntry {
    pub fn present(key: SampleKey, file: String) -> Self {
        Self { key, file: Ok(file) }
    }

    pub fn absent(key: SampleKey, reason: String) -> Self {
        Self { key, file: Err(reason) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    pub config_fingerprint: String,
    pub entries: Vec<GalleryEntry>,
}

impl Gallery {
    pub fn new(config_fingerprint: String) -> Self {
        Self {
            config_fingerprint,
            entries: Vec::new(),
        }
    }

    pub fn present(&self) -> impl Iterator<Item = (&SampleKey, &str)> {
        self.entries
            .iter()
            .filter_map(|e| e.file.as_ref().ok().map(|f| (&e.key, f.as_str())))
    }

    /// Rows `subject<TAB>sample<TAB>file`, with `-<TAB>reason` for absent entries.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut out = format!("{HEADER} config={}\n", self.config_fingerprint);
        let mut entries: Vec<&GalleryEntry> = self.entries.iter().collect();
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        for e in entries {
            match &e.file {
                Ok(f) => out.push_str(&format!("{}\t{}\t{f}\n", e.key.subject, e.key.sample)),
                Err(reason) => {
                    let reason = reason.replace(['\t', '\n'], " ");
                    out.push_str(&format!("{}\t{}\t-\t{reason}\n", e.key.subject, e.key.sample))
                }
            }
        }
        let path = dir.join(INDEX_FILE);
        std::fs::write(&path, out).map_err(|e| Error::Io { path, source: e })
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(INDEX_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        let mut lines = text.lines();
        let first = lines.next().unwrap_or_default();
        let fp = first
            .strip_prefix(HEADER)
            .and_then(|rest| rest.trim().strip_prefix("config="))
            .ok_or_else(|| Error::Format(format!("{}: bad gallery header", path.display())))?;
        let mut gallery = Gallery::new(fp.to_string());
        for (no, line) in lines.enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Format(format!("{} line {}: malformed entry", path.display(), no + 2));
            if f.len() < 3 {
                return Err(bad());
            }
            let key = SampleKey::new(f[0], f[1].parse().map_err(|_| bad())?);
            let entry = if f[2] == "-" {
                GalleryEntry::absent(key, f.get(3).unwrap_or(&"").to_string())
            } else {
                if !dir.join(f[2]).is_file() {
                    return Err(Error::Dataset(format!("gallery file {} is missing", f[2])));
                }
                GalleryEntry::present(key, f[2].to_string())
            };
            gallery.entries.push(entry);
        }
        Ok(gallery)
    }
}
