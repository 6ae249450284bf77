//! Attribute/element manifests and their resolution into pattern images.
//!
//! Manifest lines are `<attribute>\t<index>\t<label>\t<source>`; `source` is
//! a PBM path (relative paths resolve against the manifest's directory) or
//! the literal `synthetic`. Lines starting with `#` and blank lines are
//! ignored.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::pattern::{self, CodecError, PatternImage};

pub const SYNTHETIC: &str = "synthetic";

/// Attribute names and element labels of the default five-ball experiment.
pub const DEFAULT_ATTRIBUTES: [(&str, [&str; 7]); 5] = [
    (
        "Color",
        ["red", "orange", "yellow", "green", "blue", "indigo", "purple"],
    ),
    (
        "Shape",
        ["square", "circle", "oval", "rectangle", "trapezoid", "triangle", "rhombus"],
    ),
    (
        "Volume",
        ["extra-large", "large", "medium", "small-medium", "small", "extra-small", "mini"],
    ),
    (
        "SpectacularView",
        ["Iguazu", "MaunaKea", "MilfordSound", "MonumentVY", "Rockies", "Tekapo", "Yellowknife"],
    ),
    (
        "Constellation",
        ["Andromeda", "Aquarius", "Cassiopeia", "Centaurus", "Cygnus", "Orion", "Perseus"],
    ),
];

#[derive(Error, Debug)]
pub enum DatasetError {
    #[error("manifest line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("duplicate attribute {0:?}")]
    DuplicateAttribute(String),

    #[error("attribute {attribute:?}: duplicate label {label:?}")]
    DuplicateLabel { attribute: String, label: String },

    #[error("attribute {attribute:?}: duplicate index {index}")]
    DuplicateIndex { attribute: String, index: usize },

    #[error("attribute {0:?} missing from manifest")]
    MissingAttribute(String),

    #[error("attribute {attribute:?}: missing element index {index}")]
    MissingElement { attribute: String, index: usize },

    #[error("attribute {attribute:?}: unexpected element index {index} (ball has {neurons} neurons)")]
    ExtraElement {
        attribute: String,
        index: usize,
        neurons: usize,
    },

    #[error("{path}: image is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    SizeMismatch {
        path: PathBuf,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },

    #[error("{path}: {source}")]
    Image { path: PathBuf, source: CodecError },

    #[error(transparent)]
    Codec(#[from] CodecError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Synthetic,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub index: usize,
    pub label: String,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    attributes: Vec<Attribute>,
}

impl DatasetManifest {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self, DatasetError> {
        let mut names = HashSet::new();
        for attr in &attributes {
            if !names.insert(attr.name.as_str()) {
                return Err(DatasetError::DuplicateAttribute(attr.name.clone()));
            }
            let mut labels = HashSet::new();
            let mut indices = HashSet::new();
            for el in &attr.elements {
                if !labels.insert(el.label.as_str()) {
                    return Err(DatasetError::DuplicateLabel {
                        attribute: attr.name.clone(),
                        label: el.label.clone(),
                    });
                }
                if !indices.insert(el.index) {
                    return Err(DatasetError::DuplicateIndex {
                        attribute: attr.name.clone(),
                        index: el.index,
                    });
                }
            }
        }
        Ok(Self { attributes })
    }

    /// The 5 × 7 default table, every element synthetic.
    pub fn default_synthetic() -> Self {
        Self::default_with(|_| Source::Synthetic)
    }

    /// The default table with sources `<dir>/<label>.pbm`.
    pub fn default_files(dir: &Path) -> Self {
        Self::default_with(|label| Source::File(dir.join(format!("{label}.pbm"))))
    }

    fn default_with(source: impl Fn(&str) -> Source) -> Self {
        let attributes = DEFAULT_ATTRIBUTES
            .iter()
            .map(|(name, labels)| Attribute {
                name: (*name).to_string(),
                elements: labels
                    .iter()
                    .enumerate()
                    .map(|(index, label)| Element {
                        index,
                        label: (*label).to_string(),
                        source: source(label),
                    })
                    .collect(),
            })
            .collect();
        Self { attributes }
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, DatasetError> {
        let mut attributes: Vec<Attribute> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != 4 {
                return Err(DatasetError::Syntax {
                    line,
                    message: format!("expected 4 tab-separated fields, found {}", fields.len()),
                });
            }
            let index = fields[1].parse().map_err(|_| DatasetError::Syntax {
                line,
                message: format!("bad element index {:?}", fields[1]),
            })?;
            if fields[0].is_empty() || fields[2].is_empty() || fields[3].is_empty() {
                return Err(DatasetError::Syntax {
                    line,
                    message: "empty field".into(),
                });
            }
            let source = if fields[3] == SYNTHETIC {
                Source::Synthetic
            } else {
                Source::File(base_dir.join(fields[3]))
            };
            let element = Element {
                index,
                label: fields[2].to_string(),
                source,
            };
            match attributes.iter_mut().find(|a| a.name == fields[0]) {
                Some(attr) => attr.elements.push(element),
                None => attributes.push(Attribute {
                    name: fields[0].to_string(),
                    elements: vec![element],
                }),
            }
        }
        Self::new(attributes)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Manifest text. File sources are written relative to `base_dir` when
    /// they live under it.
    pub fn to_text(&self, base_dir: &Path) -> String {
        let mut out = String::from("# attribute\tindex\tlabel\tsource\n");
        for attr in &self.attributes {
            for el in &attr.elements {
                let source = match &el.source {
                    Source::Synthetic => SYNTHETIC.to_string(),
                    Source::File(p) => p
                        .strip_prefix(base_dir)
                        .unwrap_or(p)
                        .to_string_lossy()
                        .into_owned(),
                };
                out.push_str(&format!("{}\t{}\t{}\t{}\n", attr.name, el.index, el.label, source));
            }
        }
        out
    }

    /// Loads or generates every image, ordered by `ball_order` and then by
    /// element index. Each ball must have exactly indices `0..neurons`.
    pub fn resolve(
        &self,
        ball_order: &[String],
        neurons: usize,
        width: usize,
        height: usize,
    ) -> Result<Dataset, DatasetError> {
        let mut balls = Vec::with_capacity(ball_order.len());
        for name in ball_order {
            let attr = self
                .attribute(name)
                .ok_or_else(|| DatasetError::MissingAttribute(name.clone()))?;
            if let Some(el) = attr.elements.iter().find(|e| e.index >= neurons) {
                return Err(DatasetError::ExtraElement {
                    attribute: name.clone(),
                    index: el.index,
                    neurons,
                });
            }
            let mut images = Vec::with_capacity(neurons);
            for index in 0..neurons {
                let el = attr
                    .elements
                    .iter()
                    .find(|e| e.index == index)
                    .ok_or_else(|| DatasetError::MissingElement {
                        attribute: name.clone(),
                        index,
                    })?;
                images.push(load_element(el, width, height)?);
            }
            balls.push((name.clone(), images));
        }
        Ok(Dataset { balls })
    }
}

fn load_element(el: &Element, width: usize, height: usize) -> Result<PatternImage, DatasetError> {
    match &el.source {
        Source::Synthetic => Ok(pattern::synth_pattern(&el.label, width, height)?),
        Source::File(path) => {
            let bytes = fs::read(path).map_err(|source| DatasetError::Io {
                path: path.clone(),
                source,
            })?;
            let image = pattern::load_pbm(&bytes, &el.label).map_err(|source| {
                DatasetError::Image {
                    path: path.clone(),
                    source,
                }
            })?;
            if image.width() != width || image.height() != height {
                return Err(DatasetError::SizeMismatch {
                    path: path.clone(),
                    got_w: image.width(),
                    got_h: image.height(),
                    want_w: width,
                    want_h: height,
                });
            }
            Ok(image)
        }
    }
}

/// Resolved images per ball; element index equals neuron index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    balls: Vec<(String, Vec<PatternImage>)>,
}

impl Dataset {
    pub fn balls(&self) -> &[(String, Vec<PatternImage>)] {
        &self.balls
    }

    pub fn images(&self, ball: &str) -> Option<&[PatternImage]> {
        self.balls
            .iter()
            .find(|(name, _)| name == ball)
            .map(|(_, imgs)| imgs.as_slice())
    }

    /// `(ball, neuron index)` of the first image with this label.
    pub fn find_label(&self, label: &str) -> Option<(&str, usize)> {
        self.balls.iter().find_map(|(ball, imgs)| {
            imgs.iter()
                .position(|img| img.label() == label)
                .map(|i| (ball.as_str(), i))
        })
    }
}
