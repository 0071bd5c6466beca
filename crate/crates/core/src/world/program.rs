use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::executor::Atom;
use super::objects::Room;
use crate::error::{Error, Result};
use crate::vocab::{ObjectLabel, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verb {
    Walk,
    Grab,
    Put,
    Open,
    Close,
    Sit,
    Standup,
    SwitchOn,
    SwitchOff,
    Touch,
    Read,
    TypeOn,
}

impl Verb {
    pub const ALL: [Verb; 12] = [
        Verb::Walk,
        Verb::Grab,
        Verb::Put,
        Verb::Open,
        Verb::Close,
        Verb::Sit,
        Verb::Standup,
        Verb::SwitchOn,
        Verb::SwitchOff,
        Verb::Touch,
        Verb::Read,
        Verb::TypeOn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Walk => "walk",
            Verb::Grab => "grab",
            Verb::Put => "put",
            Verb::Open => "open",
            Verb::Close => "close",
            Verb::Sit => "sit",
            Verb::Standup => "standup",
            Verb::SwitchOn => "switchon",
            Verb::SwitchOff => "switchoff",
            Verb::Touch => "touch",
            Verb::Read => "read",
            Verb::TypeOn => "type_on",
        }
    }

    /// Number of object arguments.
    pub fn arity(self) -> usize {
        match self {
            Verb::Standup => 0,
            Verb::Put => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Verb {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Verb::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Vocabulary {
                kind: "verb",
                name: s.to_string(),
            })
    }
}

/// Verb plus up to two objects ("put cereal kitchentable").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomicAction {
    pub verb: Verb,
    pub object: Option<ObjectLabel>,
    pub target: Option<ObjectLabel>,
}

impl AtomicAction {
    pub fn new(verb: Verb, args: &[ObjectLabel]) -> Result<Self> {
        if args.len() != verb.arity() {
            return Err(Error::Contract(format!(
                "`{verb}` takes {} object(s), got {}",
                verb.arity(),
                args.len()
            )));
        }
        Ok(AtomicAction {
            verb,
            object: args.first().copied(),
            target: args.get(1).copied(),
        })
    }

    pub fn parse(line: &str, vocab: &Vocabulary) -> Result<Self> {
        let mut words = line.split_whitespace();
        let verb: Verb = words.next().unwrap_or("").parse()?;
        let args: Vec<ObjectLabel> = words.map(|w| vocab.label(w)).collect::<Result<_>>()?;
        AtomicAction::new(verb, &args)
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        struct D<'a>(&'a AtomicAction, &'a Vocabulary);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.0.verb.name())?;
                for o in [self.0.object, self.0.target].into_iter().flatten() {
                    write!(f, " {}", self.1.name(o))?;
                }
                Ok(())
            }
        }
        D(self, vocab)
    }

    /// Object the agent attends to while performing the action.
    pub fn focus(&self) -> Option<ObjectLabel> {
        self.target.or(self.object)
    }
}

/// Token index for every atomic action the world can produce, plus a
/// trailing end-of-sequence token.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVocab {
    actions: Vec<AtomicAction>,
    index: HashMap<AtomicAction, usize>,
}

impl ActionVocab {
    pub fn new(mut actions: Vec<AtomicAction>) -> Self {
        actions.sort();
        actions.dedup();
        let index = actions.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        ActionVocab { actions, index }
    }

    /// Size including the end-of-sequence token.
    pub fn size(&self) -> usize {
        self.actions.len() + 1
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn eos(&self) -> usize {
        self.actions.len()
    }

    pub fn token(&self, action: &AtomicAction) -> Option<usize> {
        self.index.get(action).copied()
    }

    pub fn tokens(&self, actions: &[AtomicAction]) -> Result<Vec<usize>> {
        actions
            .iter()
            .map(|a| {
                self.token(a).ok_or_else(|| Error::Vocabulary {
                    kind: "atomic action",
                    name: format!("{a:?}"),
                })
            })
            .collect()
    }

    /// `None` for the end-of-sequence token or an out-of-range index.
    pub fn action(&self, token: usize) -> Option<&AtomicAction> {
        self.actions.get(token)
    }

    pub fn actions(&self) -> &[AtomicAction] {
        &self.actions
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityProgram {
    pub activity: usize,
    pub activity_name: String,
    pub actions: Vec<AtomicAction>,
    pub goal: Vec<Atom>,
    pub rooms: Vec<Room>,
    pub camera: usize,
}

impl ActivityProgram {
    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# activity {} {}", self.activity, self.activity_name);
        let _ = writeln!(out, "# camera {}", self.camera);
        let rooms: Vec<&str> = self.rooms.iter().map(|r| r.name()).collect();
        let _ = writeln!(out, "# rooms {}", rooms.join(" "));
        let goal: Vec<String> = self.goal.iter().map(|a| a.display(vocab).to_string()).collect();
        let _ = writeln!(out, "# goal {}", goal.join("; "));
        for a in &self.actions {
            let _ = writeln!(out, "{}", a.display(vocab));
        }
        out
    }

    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let mut program = ActivityProgram {
            activity: usize::MAX,
            activity_name: String::new(),
            actions: Vec::new(),
            goal: Vec::new(),
            rooms: Vec::new(),
            camera: 0,
        };
        for (n, line) in text.lines().enumerate() {
            let loc = || format!("program line {}", n + 1);
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let header = header.trim();
                let (key, rest) = header.split_once(' ').unwrap_or((header, ""));
                match key {
                    "activity" => {
                        let (idx, name) = rest.split_once(' ').unwrap_or((rest, ""));
                        program.activity = idx.parse().map_err(|_| Error::format(loc(), "bad activity index"))?;
                        program.activity_name = name.to_string();
                    }
                    "camera" => {
                        program.camera = rest.trim().parse().map_err(|_| Error::format(loc(), "bad camera"))?;
                    }
                    "rooms" => {
                        program.rooms = rest
                            .split_whitespace()
                            .map(|r| {
                                Room::ALL.iter().copied().find(|x| x.name() == r).ok_or_else(|| {
                                    Error::Vocabulary {
                                        kind: "room",
                                        name: r.to_string(),
                                    }
                                })
                            })
                            .collect::<Result<_>>()?;
                    }
                    "goal" => {
                        program.goal = rest
                            .split(';')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(|s| Atom::parse(s, vocab))
                            .collect::<Result<_>>()?;
                    }
                    _ => return Err(Error::format(loc(), format!("unknown header `{key}`"))),
                }
                continue;
            }
            program.actions.push(AtomicAction::parse(line, vocab)?);
        }
        if program.activity == usize::MAX {
            return Err(Error::format("program", "missing `# activity` header"));
        }
        Ok(program)
    }

    pub fn save(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        std::fs::write(path, self.to_text(vocab)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, vocab)
    }
}
