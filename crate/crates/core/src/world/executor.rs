//! Symbolic precondition/effect rules over a household state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::objects::{self, info, Room};
use super::program::{AtomicAction, Verb};
use crate::error::{Error, Result};
use crate::vocab::{ObjectLabel, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    On(ObjectLabel),
    In(ObjectLabel),
    Held,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Posture {
    Standing,
    Sitting(ObjectLabel),
}

/// Agent position is the furniture zone it stands at; `None` means the
/// middle of the room.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldState {
    pub room: Room,
    pub position: Option<ObjectLabel>,
    pub posture: Posture,
    pub holding: Option<ObjectLabel>,
    pub locations: BTreeMap<ObjectLabel, Location>,
    pub open: BTreeSet<ObjectLabel>,
    pub powered: BTreeSet<ObjectLabel>,
    /// Interactions that leave no physical trace (touch, read, type_on).
    pub interactions: BTreeSet<(Verb, ObjectLabel)>,
}

impl WorldState {
    /// Every movable object at home, containers closed, devices off.
    pub fn initial(room: Room) -> Self {
        let locations = objects::OBJECTS
            .iter()
            .enumerate()
            .filter_map(|(i, o)| {
                o.home.map(|(home, inside)| {
                    let h = objects::label(home);
                    (ObjectLabel(i), if inside { Location::In(h) } else { Location::On(h) })
                })
            })
            .collect();
        WorldState {
            room,
            position: None,
            posture: Posture::Standing,
            holding: None,
            locations,
            open: BTreeSet::new(),
            powered: BTreeSet::new(),
            interactions: BTreeSet::new(),
        }
    }

    /// Zone furniture of `obj`, following movable objects to where they rest.
    pub fn zone_of(&self, obj: ObjectLabel) -> Option<ObjectLabel> {
        let meta = info(obj);
        if let Some(z) = meta.zone {
            return Some(objects::label(z));
        }
        match self.locations.get(&obj)? {
            Location::On(f) | Location::In(f) => self.zone_of(*f),
            Location::Held => self.position,
        }
    }

    pub fn is_near(&self, obj: ObjectLabel) -> bool {
        if self.holding == Some(obj) {
            return true;
        }
        info(obj).room == Some(self.room) && self.position.is_some() && self.zone_of(obj) == self.position
    }

    /// Checks the one-place-per-object and single-hand invariants.
    pub fn is_consistent(&self) -> bool {
        let held: Vec<_> = self.locations.iter().filter(|(_, l)| **l == Location::Held).map(|(o, _)| *o).collect();
        match self.holding {
            Some(h) => held == [h],
            None => held.is_empty(),
        }
    }
}

/// Goal atom evaluated on a final state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Atom {
    Inside(ObjectLabel, ObjectLabel),
    OnTop(ObjectLabel, ObjectLabel),
    Opened(ObjectLabel),
    Closed(ObjectLabel),
    Powered(ObjectLabel),
    Unpowered(ObjectLabel),
    SittingOn(ObjectLabel),
    Standing,
    Holding(ObjectLabel),
    HandsFree,
    Did(Verb, ObjectLabel),
}

impl Atom {
    pub fn holds(&self, s: &WorldState) -> bool {
        match *self {
            Atom::Inside(o, c) => s.locations.get(&o) == Some(&Location::In(c)),
            Atom::OnTop(o, c) => s.locations.get(&o) == Some(&Location::On(c)),
            Atom::Opened(c) => s.open.contains(&c),
            Atom::Closed(c) => !s.open.contains(&c),
            Atom::Powered(d) => s.powered.contains(&d),
            Atom::Unpowered(d) => !s.powered.contains(&d),
            Atom::SittingOn(x) => s.posture == Posture::Sitting(x),
            Atom::Standing => s.posture == Posture::Standing,
            Atom::Holding(o) => s.holding == Some(o),
            Atom::HandsFree => s.holding.is_none(),
            Atom::Did(v, o) => s.interactions.contains(&(v, o)),
        }
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        struct D<'a>(&'a Atom, &'a Vocabulary);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let n = |o: ObjectLabel| self.1.name(o);
                match *self.0 {
                    Atom::Inside(o, c) => write!(f, "inside {} {}", n(o), n(c)),
                    Atom::OnTop(o, c) => write!(f, "on {} {}", n(o), n(c)),
                    Atom::Opened(c) => write!(f, "open {}", n(c)),
                    Atom::Closed(c) => write!(f, "closed {}", n(c)),
                    Atom::Powered(d) => write!(f, "powered {}", n(d)),
                    Atom::Unpowered(d) => write!(f, "unpowered {}", n(d)),
                    Atom::SittingOn(x) => write!(f, "sitting {}", n(x)),
                    Atom::Standing => f.write_str("standing"),
                    Atom::Holding(o) => write!(f, "holding {}", n(o)),
                    Atom::HandsFree => f.write_str("handsfree"),
                    Atom::Did(v, o) => write!(f, "did {} {}", v, n(o)),
                }
            }
        }
        D(self, vocab)
    }

    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let words: Vec<&str> = text.split_whitespace().collect();
        let obj = |i: usize| -> Result<ObjectLabel> {
            let w = words
                .get(i)
                .ok_or_else(|| Error::format("goal", format!("`{text}` is missing an argument")))?;
            vocab.label(w)
        };
        let atom = match words.first().copied().unwrap_or("") {
            "inside" => Atom::Inside(obj(1)?, obj(2)?),
            "on" => Atom::OnTop(obj(1)?, obj(2)?),
            "open" => Atom::Opened(obj(1)?),
            "closed" => Atom::Closed(obj(1)?),
            "powered" => Atom::Powered(obj(1)?),
            "unpowered" => Atom::Unpowered(obj(1)?),
            "sitting" => Atom::SittingOn(obj(1)?),
            "standing" => Atom::Standing,
            "holding" => Atom::Holding(obj(1)?),
            "handsfree" => Atom::HandsFree,
            "did" => {
                let verb = words
                    .get(1)
                    .ok_or_else(|| Error::format("goal", format!("`{text}` is missing a verb")))?
                    .parse()?;
                Atom::Did(verb, obj(2)?)
            }
            other => {
                return Err(Error::Vocabulary {
                    kind: "goal atom",
                    name: other.to_string(),
                })
            }
        };
        Ok(atom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub final_state: WorldState,
    pub failure: Option<Failure>,
}

impl Execution {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    /// Ran to completion and every goal atom holds.
    pub fn achieves(&self, goal: &[Atom]) -> bool {
        self.succeeded() && goal.iter().all(|a| a.holds(&self.final_state))
    }
}

/// Applies `actions` in order, stopping at the first violated precondition.
/// The returned state is the one just before the failing action.
pub fn execute(actions: &[AtomicAction], initial: &WorldState, vocab: &Vocabulary) -> Execution {
    let mut state = initial.clone();
    for (index, action) in actions.iter().enumerate() {
        if let Err(reason) = apply(&mut state, action, vocab) {
            return Execution {
                final_state: state,
                failure: Some(Failure { index, reason }),
            };
        }
    }
    Execution {
        final_state: state,
        failure: None,
    }
}

/// One step. On error `state` is untouched.
pub fn apply(state: &mut WorldState, action: &AtomicAction, vocab: &Vocabulary) -> std::result::Result<(), String> {
    let name = |o: ObjectLabel| vocab.name(o).to_string();
    let fail = |msg: String| Err(format!("precondition: {msg}"));
    if let Some(o) = action.object.into_iter().chain(action.target).find(|o| o.0 >= objects::OBJECTS.len()) {
        return fail(format!("unknown object {o}"));
    }
    let standing = state.posture == Posture::Standing;

    match (action.verb, action.object, action.target) {
        (Verb::Standup, _, _) => {
            if standing {
                return fail("not sitting".into());
            }
            state.posture = Posture::Standing;
        }
        (Verb::Walk, Some(x), _) => {
            let Some(room) = info(x).room else {
                return fail(format!("cannot walk to {}", name(x)));
            };
            if !standing {
                return fail("sitting".into());
            }
            if state.holding == Some(x) {
                return fail(format!("already holding {}", name(x)));
            }
            state.room = room;
            state.position = state.zone_of(x);
        }
        (Verb::Grab, Some(x), _) => {
            if !info(x).affordances.grabbable {
                return fail(format!("{} cannot be grabbed", name(x)));
            }
            if state.holding == Some(x) {
                return fail(format!("already holding {}", name(x)));
            }
            if let Some(h) = state.holding {
                return fail(format!("hand full with {}", name(h)));
            }
            if !state.is_near(x) {
                return fail(format!("not near {}", name(x)));
            }
            if let Some(Location::In(c)) = state.locations.get(&x) {
                if !state.open.contains(c) {
                    return fail(format!("{} is closed", name(*c)));
                }
            }
            state.holding = Some(x);
            state.locations.insert(x, Location::Held);
        }
        (Verb::Put, Some(x), Some(y)) => {
            if state.holding != Some(x) {
                return fail(format!("not holding {}", name(x)));
            }
            let aff = info(y).affordances;
            if !(aff.container || aff.surface) {
                return fail(format!("cannot put onto {}", name(y)));
            }
            if !state.is_near(y) {
                return fail(format!("not near {}", name(y)));
            }
            let loc = if aff.container {
                if !state.open.contains(&y) {
                    return fail(format!("{} is closed", name(y)));
                }
                Location::In(y)
            } else {
                Location::On(y)
            };
            state.holding = None;
            state.locations.insert(x, loc);
        }
        (Verb::Open | Verb::Close, Some(x), _) => {
            if !info(x).affordances.container {
                return fail(format!("{} cannot be opened", name(x)));
            }
            if !state.is_near(x) {
                return fail(format!("not near {}", name(x)));
            }
            let is_open = state.open.contains(&x);
            if action.verb == Verb::Open {
                if is_open {
                    return fail(format!("{} already open", name(x)));
                }
                state.open.insert(x);
            } else {
                if !is_open {
                    return fail(format!("{} already closed", name(x)));
                }
                state.open.remove(&x);
            }
        }
        (Verb::Sit, Some(x), _) => {
            if !info(x).affordances.sittable {
                return fail(format!("cannot sit on {}", name(x)));
            }
            if !standing {
                return fail("already sitting".into());
            }
            if !state.is_near(x) {
                return fail(format!("not near {}", name(x)));
            }
            state.posture = Posture::Sitting(x);
        }
        (Verb::SwitchOn | Verb::SwitchOff, Some(x), _) => {
            if !info(x).affordances.device {
                return fail(format!("{} is not a device", name(x)));
            }
            if !state.is_near(x) {
                return fail(format!("not near {}", name(x)));
            }
            let on = state.powered.contains(&x);
            if action.verb == Verb::SwitchOn {
                if on {
                    return fail(format!("{} already on", name(x)));
                }
                state.powered.insert(x);
            } else {
                if !on {
                    return fail(format!("{} already off", name(x)));
                }
                state.powered.remove(&x);
            }
        }
        (Verb::Touch, Some(x), _) => {
            if !state.is_near(x) {
                return fail(format!("not near {}", name(x)));
            }
            state.interactions.insert((Verb::Touch, x));
        }
        (Verb::Read, Some(x), _) => {
            if !info(x).affordances.readable {
                return fail(format!("{} is not readable", name(x)));
            }
            if state.holding != Some(x) {
                return fail(format!("not holding {}", name(x)));
            }
            state.interactions.insert((Verb::Read, x));
        }
        (Verb::TypeOn, Some(x), _) => {
            if !info(x).affordances.typeable {
                return fail(format!("cannot type on {}", name(x)));
            }
            if !state.is_near(x) {
                return fail(format!("not near {}", name(x)));
            }
            let computer = objects::label("computer");
            if !state.powered.contains(&computer) {
                return fail("computer is off".into());
            }
            state.interactions.insert((Verb::TypeOn, x));
        }
        _ => return fail(format!("malformed action {:?}", action)),
    }
    Ok(())
}

/// Fraction of programs that run to completion and reach their goal.
pub fn success_rate<'a>(
    runs: impl IntoIterator<Item = (&'a [AtomicAction], &'a WorldState, &'a [Atom])>,
    vocab: &Vocabulary,
) -> f64 {
    let mut total = 0usize;
    let mut ok = 0usize;
    for (actions, initial, goal) in runs {
        total += 1;
        if execute(actions, initial, vocab).achieves(goal) {
            ok += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        ok as f64 / total as f64
    }
}
