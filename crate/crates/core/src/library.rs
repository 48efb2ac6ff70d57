//! Built-in procedure bundles and structural diffs between libraries.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::procir::{self, Library, ParseError, ValidationErrors};

pub const BUILTIN: &[&str] = &["iqa/v1", "iqa/v0.1", "alfred/v1", "alfred/heat-toggleoff"];

const SOURCES: &[(&str, &str, &str)] = &[
    ("iqa/v1", include_str!("../library/iqa/v1/manifest.json"), include_str!("../library/iqa/v1/iqa.proc")),
    ("iqa/v0.1", include_str!("../library/iqa/v0.1/manifest.json"), include_str!("../library/iqa/v0.1/iqa.proc")),
    ("alfred/v1", include_str!("../library/alfred/v1/manifest.json"), include_str!("../library/alfred/v1/alfred.proc")),
    (
        "alfred/heat-toggleoff",
        include_str!("../library/alfred/heat-toggleoff/manifest.json"),
        include_str!("../library/alfred/heat-toggleoff/alfred.proc"),
    ),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub version: String,
    pub sources: Vec<String>,
    pub reactors: Vec<String>,
    #[serde(default)]
    pub atomic_set: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryBundle {
    pub manifest: Manifest,
    /// (file name, text) in manifest order.
    pub sources: Vec<(String, String)>,
    pub library: Library,
}

impl LibraryBundle {
    pub fn id(&self) -> &str {
        &self.manifest.id
    }
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("unknown bundle `{0}` (known: {known})", known = BUILTIN.join(", "))]
    UnknownBundle(String),
    #[error("{file}: {source}")]
    Parse { file: String, source: ParseError },
    #[error("duplicate definition of `{0}` across source files")]
    DuplicateDefinition(String),
    #[error(transparent)]
    Validation(#[from] ValidationErrors),
    #[error("manifest declares reactors {declared:?} but the procedures use {used:?}")]
    ReactorMismatch { declared: Vec<String>, used: Vec<String> },
    #[error("bad manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Parse, merge and validate the sources of a bundle.
pub fn assemble(manifest: Manifest, sources: Vec<(String, String)>) -> Result<LibraryBundle, LibraryError> {
    let mut library = Library::default();
    for (file, text) in &sources {
        let lib = procir::parse(text).map_err(|source| LibraryError::Parse { file: file.clone(), source })?;
        for p in lib.procs {
            if library.get(&p.name).is_some() {
                return Err(LibraryError::DuplicateDefinition(p.name));
            }
            library.procs.push(p);
        }
    }
    procir::validate(&library)?;
    let roots: Vec<&str> = library.names().collect();
    let used: Vec<String> = procir::referenced_reactors(&library, &roots).into_iter().collect();
    let declared: BTreeSet<&String> = manifest.reactors.iter().collect();
    if declared.len() != manifest.reactors.len() || declared.into_iter().cloned().collect::<Vec<_>>() != used {
        return Err(LibraryError::ReactorMismatch { declared: manifest.reactors.clone(), used });
    }
    Ok(LibraryBundle { manifest, sources, library })
}

pub fn load_builtin(name: &str) -> Result<LibraryBundle, LibraryError> {
    let (_, manifest, text) =
        SOURCES.iter().find(|(id, ..)| *id == name).ok_or_else(|| LibraryError::UnknownBundle(name.to_string()))?;
    let manifest: Manifest = serde_json::from_str(manifest)?;
    let file = manifest.sources.first().cloned().unwrap_or_default();
    assemble(manifest, vec![(file, text.to_string())])
}

/// Load a bundle directory containing `manifest.json` and its sources.
pub fn load_dir(dir: &Path) -> Result<LibraryBundle, LibraryError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| LibraryError::Io { path: p.display().to_string(), source })
    };
    let manifest: Manifest = serde_json::from_str(&read(&dir.join("manifest.json"))?)?;
    let mut sources = Vec::new();
    for f in &manifest.sources {
        sources.push((f.clone(), read(&dir.join(f))?));
    }
    assemble(manifest, sources)
}

/// Load a built-in id, a bundle directory, or a single `.proc` file
/// (validated, with the reactor list inferred).
pub fn load_any(spec: &str) -> Result<LibraryBundle, LibraryError> {
    if BUILTIN.contains(&spec) {
        return load_builtin(spec);
    }
    let path = Path::new(spec);
    if path.is_dir() {
        return load_dir(path);
    }
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LibraryError::Io { path: spec.to_string(), source })?;
        let lib = procir::parse(&text).map_err(|source| LibraryError::Parse { file: spec.to_string(), source })?;
        let roots: Vec<&str> = lib.names().collect();
        let reactors = procir::referenced_reactors(&lib, &roots).into_iter().collect();
        let manifest = Manifest {
            id: spec.to_string(),
            version: "file".into(),
            sources: vec![spec.to_string()],
            reactors,
            atomic_set: vec![],
            notes: vec![],
        };
        return assemble(manifest, vec![(spec.to_string(), text)]);
    }
    Err(LibraryError::UnknownBundle(spec.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub modified: Vec<String>,
}

impl LibraryDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty()
    }
}

/// Per-procedure structural diff (comments and formatting are ignored).
pub fn diff(a: &Library, b: &Library) -> LibraryDiff {
    let mut d = LibraryDiff::default();
    for p in &a.procs {
        match b.get(&p.name) {
            None => d.removed.push(p.name.clone()),
            Some(q) if q != p => d.modified.push(p.name.clone()),
            _ => {}
        }
    }
    for q in &b.procs {
        if a.get(&q.name).is_none() {
            d.added.push(q.name.clone());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_counts() {
        assert_eq!(load_builtin("iqa/v1").unwrap().library.len(), 6);
        assert_eq!(load_builtin("alfred/v1").unwrap().library.len(), 10);
        for id in BUILTIN {
            let b = load_builtin(id).unwrap();
            assert_eq!(b.id(), *id);
        }
    }

    #[test]
    fn unknown_bundle() {
        assert!(matches!(load_builtin("nope"), Err(LibraryError::UnknownBundle(_))));
    }

    #[test]
    fn diffs() {
        let v1 = load_builtin("iqa/v1").unwrap().library;
        let v01 = load_builtin("iqa/v0.1").unwrap().library;
        let d = diff(&v1, &v01);
        assert_eq!(d, LibraryDiff { modified: vec!["udp_grid_search_recep".into()], ..Default::default() });
        assert!(diff(&v1, &v1).is_empty());
        let a = load_builtin("alfred/v1").unwrap().library;
        let variant = load_builtin("alfred/heat-toggleoff").unwrap().library;
        assert_eq!(diff(&a, &variant).modified, vec!["udp_heat_object".to_string()]);
        assert!(diff(&a, &variant).added.is_empty() && diff(&a, &variant).removed.is_empty());
    }

    #[test]
    fn reactor_declarations_must_match() {
        let mut m: Manifest = serde_json::from_str(SOURCES[2].1).unwrap();
        m.reactors.push("detect_recep".into());
        let err = assemble(m, vec![("alfred.proc".into(), SOURCES[2].2.into())]).unwrap_err();
        assert!(matches!(err, LibraryError::ReactorMismatch { .. }));
    }

    #[test]
    fn directory_bundles_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("library/alfred/v1");
        let b = load_dir(&dir).unwrap();
        assert_eq!(b.library, load_builtin("alfred/v1").unwrap().library);
    }
}
