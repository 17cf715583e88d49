//! Object class catalog: class identifiers and per-class classifier accuracy.

use thiserror::Error;

/// 1-based class identifier, as carried on the wire and in vote tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u8);

impl ClassId {
    /// 0-based position in a [`ClassModel`] catalog.
    pub fn index(self) -> usize {
        (self.0 as usize).wrapping_sub(1)
    }

    pub fn from_index(index: usize) -> ClassId {
        ClassId(index as u8 + 1)
    }
}

impl std::fmt::Display for ClassId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("a class model needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("accuracy for class `{name}` is {value}, outside [0, 1]")]
    BadAccuracy { name: String, value: f64 },
    #[error("unknown class id {0}")]
    UnknownClass(ClassId),
    #[error("malformed class table line {lineno}: {line:?}")]
    BadLine { lineno: usize, line: String },
}

/// A fixed catalog of object classes with the per-class accuracy of the
/// (simulated) classifier that produces annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    names: Vec<String>,
    accuracy: Vec<f64>,
}

impl ClassModel {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self, ModelError> {
        if entries.len() < 2 {
            return Err(ModelError::TooFewClasses(entries.len()));
        }
        for (name, p) in &entries {
            if !(0.0..=1.0).contains(p) || !p.is_finite() {
                return Err(ModelError::BadAccuracy {
                    name: name.clone(),
                    value: *p,
                });
            }
        }
        let (names, accuracy) = entries.into_iter().unzip();
        Ok(ClassModel { names, accuracy })
    }

    /// The bundled 13-class indoor catalog with the accuracies of the
    /// BGA-DGCNN point-cloud classifier it models.
    pub fn bga_dgcnn() -> Self {
        let entries = [
            ("bin", 0.819),
            ("cabinet", 0.844),
            ("chair", 0.926),
            ("desk", 0.773),
            ("display", 0.804),
            ("door", 0.924),
            ("shelf", 0.805),
            ("table", 0.741),
            ("bed", 0.727),
            ("pillow", 0.781),
            ("sink", 0.792),
            ("sofa", 0.910),
            ("toilet", 0.797),
        ];
        ClassModel::new(
            entries
                .iter()
                .map(|(n, p)| (n.to_string(), *p))
                .collect(),
        )
        .expect("bundled catalog is valid")
    }

    /// Parses a `name,accuracy` table, one class per line. Blank lines and
    /// `#` comments are ignored.
    pub fn from_csv(text: &str) -> Result<Self, ModelError> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split(',').map(str::trim);
            let bad = || ModelError::BadLine {
                lineno: lineno + 1,
                line: raw.to_string(),
            };
            let name = it.next().filter(|s| !s.is_empty()).ok_or_else(bad)?;
            let p: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(bad)?;
            if it.next().is_some() {
                return Err(bad());
            }
            entries.push((name.to_string(), p));
        }
        ClassModel::new(entries)
    }

    pub fn class_count(&self) -> u32 {
        self.names.len() as u32
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.0 >= 1 && (id.0 as usize) <= self.names.len()
    }

    pub fn accuracy(&self, id: ClassId) -> Result<f64, ModelError> {
        self.accuracy
            .get(id.index())
            .copied()
            .filter(|_| id.0 >= 1)
            .ok_or(ModelError::UnknownClass(id))
    }

    pub fn name(&self, id: ClassId) -> Result<&str, ModelError> {
        self.names
            .get(id.index())
            .map(String::as_str)
            .filter(|_| id.0 >= 1)
            .ok_or(ModelError::UnknownClass(id))
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.names.len()).map(ClassId::from_index)
    }
}
