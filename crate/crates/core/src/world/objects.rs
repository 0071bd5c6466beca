//! Static facts about household objects.

use std::fmt;

use crate::vocab::{ObjectLabel, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Room {
    Kitchen,
    LivingRoom,
    Bedroom,
    Bathroom,
}

impl Room {
    pub const ALL: [Room; 4] = [Room::Kitchen, Room::LivingRoom, Room::Bedroom, Room::Bathroom];

    pub fn name(self) -> &'static str {
        match self {
            Room::Kitchen => "kitchen",
            Room::LivingRoom => "livingroom",
            Room::Bedroom => "bedroom",
            Room::Bathroom => "bathroom",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Room {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Affordances {
    pub grabbable: bool,
    /// Can be opened and closed; things can be put inside.
    pub container: bool,
    /// Things can be put on it.
    pub surface: bool,
    pub device: bool,
    pub sittable: bool,
    pub readable: bool,
    pub typeable: bool,
}

const NONE: Affordances = Affordances {
    grabbable: false,
    container: false,
    surface: false,
    device: false,
    sittable: false,
    readable: false,
    typeable: false,
};

#[derive(Debug, Clone, Copy)]
pub struct ObjectInfo {
    pub name: &'static str,
    /// `None` for the background, which belongs to every room.
    pub room: Option<Room>,
    pub affordances: Affordances,
    /// Piece of furniture the agent stands at when next to this object.
    /// Movable objects take the zone of whatever they rest on.
    pub zone: Option<&'static str>,
    /// Where a movable object starts out, `(furniture, inside)`.
    pub home: Option<(&'static str, bool)>,
}

const fn furniture(name: &'static str, room: Room, zone: &'static str, affordances: Affordances) -> ObjectInfo {
    ObjectInfo {
        name,
        room: Some(room),
        affordances,
        zone: Some(zone),
        home: None,
    }
}

const fn item(name: &'static str, room: Room, home: &'static str, inside: bool, readable: bool) -> ObjectInfo {
    ObjectInfo {
        name,
        room: Some(room),
        affordances: Affordances {
            grabbable: true,
            readable,
            ..NONE
        },
        zone: None,
        home: Some((home, inside)),
    }
}

const CONTAINER: Affordances = Affordances {
    container: true,
    ..NONE
};
const SURFACE: Affordances = Affordances {
    surface: true,
    ..NONE
};
const DEVICE: Affordances = Affordances { device: true, ..NONE };
const SEAT: Affordances = Affordances {
    sittable: true,
    ..NONE
};

use Room::*;

/// Metadata in vocabulary order (see [`crate::vocab::HOUSEHOLD_OBJECTS`]).
pub const OBJECTS: [ObjectInfo; 38] = [
    ObjectInfo {
        name: "wall",
        room: None,
        affordances: NONE,
        zone: None,
        home: None,
    },
    furniture("fridge", Kitchen, "fridge", CONTAINER),
    furniture("kitchencabinet", Kitchen, "kitchencabinet", CONTAINER),
    furniture("kitchentable", Kitchen, "kitchentable", SURFACE),
    furniture(
        "stove",
        Kitchen,
        "stove",
        Affordances {
            device: true,
            surface: true,
            ..NONE
        },
    ),
    furniture(
        "microwave",
        Kitchen,
        "microwave",
        Affordances {
            device: true,
            container: true,
            ..NONE
        },
    ),
    furniture("sink", Kitchen, "sink", SURFACE),
    item("cup", Kitchen, "kitchencabinet", true, false),
    item("glass", Kitchen, "kitchencabinet", true, false),
    item("plate", Kitchen, "kitchentable", false, false),
    item("fork", Kitchen, "kitchentable", false, false),
    item("spoon", Kitchen, "kitchentable", false, false),
    item("cereal", Kitchen, "kitchencabinet", true, false),
    item("milk", Kitchen, "fridge", true, false),
    item("juice", Kitchen, "fridge", true, false),
    item("whippedcream", Kitchen, "fridge", true, false),
    item("pan", Kitchen, "stove", false, false),
    item("bread", Kitchen, "kitchentable", false, false),
    furniture(
        "sofa",
        LivingRoom,
        "sofa",
        Affordances {
            sittable: true,
            surface: true,
            ..NONE
        },
    ),
    furniture("tv", LivingRoom, "tv", DEVICE),
    item("remotecontrol", LivingRoom, "coffeetable", false, false),
    furniture("coffeetable", LivingRoom, "sofa", SURFACE),
    item("book", LivingRoom, "coffeetable", false, true),
    furniture("lamp", LivingRoom, "lamp", DEVICE),
    item("cellphone", LivingRoom, "coffeetable", false, false),
    item("magazine", LivingRoom, "coffeetable", false, true),
    furniture(
        "bed",
        Bedroom,
        "bed",
        Affordances {
            sittable: true,
            surface: true,
            ..NONE
        },
    ),
    furniture("desk", Bedroom, "desk", SURFACE),
    furniture("chair", Bedroom, "desk", SEAT),
    furniture("computer", Bedroom, "desk", DEVICE),
    furniture(
        "keyboard",
        Bedroom,
        "desk",
        Affordances {
            typeable: true,
            ..NONE
        },
    ),
    item("mouse", Bedroom, "desk", false, false),
    item("pillow", Bedroom, "bed", false, false),
    furniture("toilet", Bathroom, "toilet", SEAT),
    item("toothbrush", Bathroom, "bathroomcabinet", true, false),
    item("towel", Bathroom, "bathroomcabinet", true, false),
    furniture("faucet", Bathroom, "faucet", DEVICE),
    furniture("bathroomcabinet", Bathroom, "bathroomcabinet", CONTAINER),
];

pub fn info(label: ObjectLabel) -> &'static ObjectInfo {
    &OBJECTS[label.0]
}

pub fn label(name: &str) -> ObjectLabel {
    OBJECTS
        .iter()
        .position(|o| o.name == name)
        .map(ObjectLabel)
        .unwrap_or_else(|| panic!("unknown household object `{name}`"))
}

pub fn room_objects(room: Room) -> impl Iterator<Item = ObjectLabel> {
    OBJECTS
        .iter()
        .enumerate()
        .filter(move |(_, o)| o.room == Some(room))
        .map(|(i, _)| ObjectLabel(i))
}

pub fn is_furniture(label: ObjectLabel) -> bool {
    info(label).zone.is_some()
}

/// Checks that the metadata table lines up with `vocab`.
pub fn matches_vocabulary(vocab: &Vocabulary) -> bool {
    vocab.len() == OBJECTS.len() && OBJECTS.iter().enumerate().all(|(i, o)| vocab.name(ObjectLabel(i)) == o.name)
}
