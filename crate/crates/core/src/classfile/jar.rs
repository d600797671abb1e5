use std::collections::{BTreeMap, HashSet};
use std::io::{Cursor, Read, Write};

use thiserror::Error;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

use super::{parse_class, ClassFile, ClassFileError};

#[derive(Debug, Error)]
pub enum JarError {
    #[error("malformed archive: {0}")]
    MalformedArchive(String),
    #[error("duplicate entry {0:?}")]
    DuplicateEntry(String),
    #[error("cannot write archive: {0}")]
    Write(String),
}

/// MS-DOS timestamp as stored in ZIP headers. The default is the DOS epoch,
/// 1980-01-01 00:00:00.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DosTime {
    pub year: u16,
    pub month: u8,
    pub day: u8,
    pub hour: u8,
    pub minute: u8,
    pub second: u8,
}

impl Default for DosTime {
    fn default() -> Self {
        DosTime {
            year: 1980,
            month: 1,
            day: 1,
            hour: 0,
            minute: 0,
            second: 0,
        }
    }
}

impl DosTime {
    fn from_zip(t: zip::DateTime) -> Self {
        DosTime {
            year: t.year(),
            month: t.month(),
            day: t.day(),
            hour: t.hour(),
            minute: t.minute(),
            second: t.second(),
        }
    }

    fn to_zip(self) -> zip::DateTime {
        zip::DateTime::from_date_and_time(self.year, self.month, self.day, self.hour, self.minute, self.second)
            .unwrap_or_default()
    }
}

/// One archive member. Directory entries have a path ending in `/`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JarEntry {
    pub path: String,
    pub data: Vec<u8>,
    pub modified: DosTime,
}

impl JarEntry {
    pub fn new(path: impl Into<String>, data: Vec<u8>) -> Self {
        JarEntry {
            path: path.into(),
            data,
            modified: DosTime::default(),
        }
    }

    pub fn is_dir(&self) -> bool {
        self.path.ends_with('/')
    }

    pub fn is_class(&self) -> bool {
        self.path.ends_with(".class") && !self.is_dir()
    }
}

/// A decoded JAR: raw entries plus the parse outcome of every `.class` entry.
#[derive(Debug, Clone)]
pub struct JarArchive {
    pub entries: Vec<JarEntry>,
    /// Parsed classes keyed by entry path.
    pub classes: BTreeMap<String, ClassFile>,
    /// `.class` entries that failed to parse.
    pub failures: Vec<(String, ClassFileError)>,
    pub metadata_present: bool,
}

/// True for `META-INF` content and embedded Maven descriptors.
pub fn is_metadata_path(path: &str) -> bool {
    let file = path.trim_end_matches('/').rsplit('/').next().unwrap_or(path);
    path == "META-INF" || path.starts_with("META-INF/") || file == "pom.xml" || file == "pom.properties"
}

impl JarArchive {
    /// Builds an archive from in-memory entries, parsing every class entry.
    pub fn from_entries(entries: Vec<JarEntry>) -> Result<Self, JarError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.path.as_str()) {
                return Err(JarError::DuplicateEntry(e.path.clone()));
            }
        }
        let mut classes = BTreeMap::new();
        let mut failures = Vec::new();
        for e in &entries {
            if e.is_class() {
                match parse_class(&e.data) {
                    Ok(c) => {
                        classes.insert(e.path.clone(), c);
                    }
                    Err(err) => {
                        log::warn!("{}: cannot parse class: {err}", e.path);
                        failures.push((e.path.clone(), err));
                    }
                }
            } else if e.path.ends_with(".jar") {
                log::warn!("{}: nested archive not scanned", e.path);
            }
        }
        let metadata_present = entries.iter().any(|e| is_metadata_path(&e.path));
        Ok(JarArchive {
            entries,
            classes,
            failures,
            metadata_present,
        })
    }

    pub fn class_entries(&self) -> impl Iterator<Item = &JarEntry> {
        self.entries.iter().filter(|e| e.is_class())
    }

    /// Serializes entries in order with deflate compression.
    pub fn to_bytes(&self) -> Result<Vec<u8>, JarError> {
        write_entries(&self.entries)
    }
}

pub fn write_entries(entries: &[JarEntry]) -> Result<Vec<u8>, JarError> {
    let werr = |e: zip::result::ZipError| JarError::Write(e.to_string());
    let mut w = ZipWriter::new(Cursor::new(Vec::new()));
    for e in entries {
        let opts = SimpleFileOptions::default()
            .compression_method(CompressionMethod::Deflated)
            .last_modified_time(e.modified.to_zip());
        if e.is_dir() {
            w.add_directory(e.path.as_str(), opts).map_err(werr)?;
        } else {
            w.start_file(e.path.as_str(), opts).map_err(werr)?;
            w.write_all(&e.data).map_err(|e| JarError::Write(e.to_string()))?;
        }
    }
    Ok(w.finish().map_err(werr)?.into_inner())
}

/// Reads a ZIP container. Individual class parse failures are collected in
/// [`JarArchive::failures`]; a repeated entry name keeps its first occurrence.
pub fn parse_jar(bytes: &[u8]) -> Result<JarArchive, JarError> {
    let mut zip = ZipArchive::new(Cursor::new(bytes)).map_err(|e| JarError::MalformedArchive(e.to_string()))?;
    let mut entries = Vec::with_capacity(zip.len());
    let mut seen = HashSet::new();
    for i in 0..zip.len() {
        let mut f = zip
            .by_index(i)
            .map_err(|e| JarError::MalformedArchive(e.to_string()))?;
        let path = f.name().to_string();
        if !seen.insert(path.clone()) {
            log::warn!("{path}: duplicate archive entry ignored");
            continue;
        }
        let modified = f.last_modified().map(DosTime::from_zip).unwrap_or_default();
        let mut data = Vec::with_capacity(f.size() as usize);
        if !f.is_dir() {
            f.read_to_end(&mut data)
                .map_err(|e| JarError::MalformedArchive(format!("{path}: {e}")))?;
        }
        entries.push(JarEntry { path, data, modified });
    }
    JarArchive::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classfile::builder::ClassBuilder;
    use crate::classfile::emit_class;

    fn class_bytes(name: &str) -> Vec<u8> {
        let mut b = ClassBuilder::new(name).unwrap();
        b.default_constructor().unwrap();
        emit_class(&b.build()).unwrap()
    }

    #[test]
    fn empty_zip() {
        let bytes = write_entries(&[]).unwrap();
        let jar = parse_jar(&bytes).unwrap();
        assert!(jar.entries.is_empty());
        assert!(!jar.metadata_present);
    }

    #[test]
    fn manifest_only_sets_metadata_flag() {
        let bytes = write_entries(&[JarEntry::new("META-INF/MANIFEST.MF", b"Manifest-Version: 1.0\n".to_vec())]).unwrap();
        let jar = parse_jar(&bytes).unwrap();
        assert_eq!(jar.classes.len(), 0);
        assert!(jar.metadata_present);
    }

    #[test]
    fn three_classes_roundtrip_with_matching_names() {
        let names = ["a.A", "a.b.B", "c.C$D"];
        let entries: Vec<JarEntry> = names
            .iter()
            .map(|n| JarEntry::new(format!("{}.class", n.replace('.', "/")), class_bytes(n)))
            .collect();
        let jar = parse_jar(&write_entries(&entries).unwrap()).unwrap();
        assert_eq!(jar.classes.len(), 3);
        for (path, class) in &jar.classes {
            assert_eq!(format!("{}.class", class.name().unwrap().replace('.', "/")), *path);
        }
        assert_eq!(jar.entries, entries);
    }

    #[test]
    fn corrupt_class_is_recorded_not_dropped() {
        let entries = vec![
            JarEntry::new("x/Bad.class", vec![0xca, 0xfe]),
            JarEntry::new("x/Good.class", class_bytes("x.Good")),
            JarEntry::new("lib/inner.jar", vec![1, 2, 3]),
        ];
        let jar = parse_jar(&write_entries(&entries).unwrap()).unwrap();
        assert_eq!(jar.classes.len(), 1);
        assert_eq!(jar.failures.len(), 1);
        assert_eq!(jar.failures[0].0, "x/Bad.class");
        assert_eq!(jar.entries.len(), 3);
    }

    #[test]
    fn not_a_zip() {
        assert!(matches!(parse_jar(b"hello"), Err(JarError::MalformedArchive(_))));
    }

    #[test]
    fn embedded_pom_counts_as_metadata() {
        assert!(is_metadata_path("pom.xml"));
        assert!(is_metadata_path("META-INF/"));
        assert!(is_metadata_path("x/y/pom.properties"));
        assert!(!is_metadata_path("a/META-INF.class"));
    }
}
