//! Dataset manifests: one tab-separated record per line,
//! `role  split  noise_type  id  path`, with `#` comments. Clean entries use
//! `-` for the noise type. Relative paths resolve against the manifest's
//! directory.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synth::NoiseType;
use super::wav::read_wav;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Clean,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown split {s:?}")))
    }
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Clean => "clean",
            Role::Noise => "noise",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub role: Role,
    pub split: Split,
    pub noise_type: Option<NoiseType>,
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Parses manifest text; `origin` names the source in error messages and
    /// `base_dir` anchors relative paths.
    pub fn parse(text: &str, origin: &Path, base_dir: &Path) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Format {
            path: origin.to_path_buf(),
            msg: format!("line {line}: {msg}"),
        };
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(bad(
                    i + 1,
                    format!("expected 5 tab-separated fields, found {}", fields.len()),
                ));
            }
            let role = match fields[0] {
                "clean" => Role::Clean,
                "noise" => Role::Noise,
                other => return Err(bad(i + 1, format!("unknown role {other:?}"))),
            };
            let split = fields[1].parse::<Split>().map_err(|e| bad(i + 1, e.to_string()))?;
            let noise_type = match (role, fields[2]) {
                (Role::Clean, "-") => None,
                (Role::Noise, t) => {
                    Some(NoiseType::parse(t).ok_or_else(|| bad(i + 1, format!("unknown noise type {t:?}")))?)
                }
                (Role::Clean, t) => return Err(bad(i + 1, format!("clean entries take noise type '-', got {t:?}"))),
            };
            if fields[3].is_empty() {
                return Err(bad(i + 1, "empty id".into()));
            }
            let path = Path::new(fields[4]);
            entries.push(ManifestEntry {
                role,
                split,
                noise_type,
                id: fields[3].to_string(),
                path: if path.is_absolute() {
                    path.to_path_buf()
                } else {
                    base_dir.join(path)
                },
            });
        }
        let manifest = DatasetManifest { entries };
        manifest.check_split_hygiene()?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, path, base)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# role\tsplit\tnoise_type\tid\tpath\n");
        for e in &self.entries {
            let t = e.noise_type.map_or("-", NoiseType::as_str);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                e.role.as_str(),
                e.split,
                t,
                e.id,
                e.path.display()
            ));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// No source id may appear in more than one split.
    pub fn check_split_hygiene(&self) -> Result<()> {
        let mut seen: HashMap<(Role, &str), Split> = HashMap::new();
        for e in &self.entries {
            if let Some(prev) = seen.insert((e.role, e.id.as_str()), e.split) {
                if prev != e.split {
                    return Err(Error::validation(format!(
                        "{} source {:?} appears in both {prev} and {} splits",
                        e.role.as_str(),
                        e.id,
                        e.split
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that every referenced file exists and decodes.
    pub fn validate_files(&self) -> Result<()> {
        for e in &self.entries {
            read_wav(&e.path)?;
        }
        Ok(())
    }

    pub fn entries_for(&self, role: Role, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.role == role && e.split == split)
    }
}
