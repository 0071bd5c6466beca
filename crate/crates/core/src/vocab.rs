use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Index into a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectLabel(pub usize);

impl fmt::Display for ObjectLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// The 38 household object classes. `wall` is what the gaze lands on when
/// it hits no object.
pub const HOUSEHOLD_OBJECTS: [&str; 38] = [
    "wall",
    "fridge",
    "kitchencabinet",
    "kitchentable",
    "stove",
    "microwave",
    "sink",
    "cup",
    "glass",
    "plate",
    "fork",
    "spoon",
    "cereal",
    "milk",
    "juice",
    "whippedcream",
    "pan",
    "bread",
    "sofa",
    "tv",
    "remotecontrol",
    "coffeetable",
    "book",
    "lamp",
    "cellphone",
    "magazine",
    "bed",
    "desk",
    "chair",
    "computer",
    "keyboard",
    "mouse",
    "pillow",
    "toilet",
    "toothbrush",
    "towel",
    "faucet",
    "bathroomcabinet",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            let n = n.as_ref();
            if n.is_empty() || n.contains(char::is_whitespace) {
                return Err(Error::Config(format!("invalid label name `{n}`")));
            }
            if index.insert(n.to_string(), i).is_some() {
                return Err(Error::Config(format!("duplicate label `{n}`")));
            }
        }
        Ok(Vocabulary {
            names: names.iter().map(|n| n.as_ref().to_string()).collect(),
            index,
        })
    }

    pub fn household() -> Self {
        Vocabulary::new(&HOUSEHOLD_OBJECTS).expect("static vocabulary is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn label(&self, name: &str) -> Result<ObjectLabel> {
        self.index
            .get(name)
            .map(|&i| ObjectLabel(i))
            .ok_or_else(|| Error::Vocabulary {
                kind: "object",
                name: name.to_string(),
            })
    }

    pub fn name(&self, label: ObjectLabel) -> &str {
        &self.names[label.0]
    }

    pub fn contains(&self, label: ObjectLabel) -> bool {
        label.0 < self.names.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = ObjectLabel> {
        (0..self.names.len()).map(ObjectLabel)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::household()
    }
}
