//! Hand-written activity templates with object variants.

use super::executor::Atom;
use super::objects::{self, info, Room};
use super::program::{AtomicAction, Verb};
use crate::vocab::ObjectLabel;

pub struct Template {
    pub name: &'static str,
    pub room: Room,
    variants: &'static [&'static [&'static str]],
    build: fn(&mut Builder, &[&str]),
}

impl Template {
    pub fn variant_count(&self) -> usize {
        self.variants.len()
    }

    /// Gold actions and goal for one variant.
    pub fn instantiate(&self, variant: usize) -> (Vec<AtomicAction>, Vec<Atom>) {
        let mut b = Builder::default();
        (self.build)(&mut b, self.variants[variant % self.variants.len()]);
        (b.actions, b.goal)
    }
}

#[derive(Default)]
pub struct Builder {
    actions: Vec<AtomicAction>,
    goal: Vec<Atom>,
}

fn l(name: &str) -> ObjectLabel {
    objects::label(name)
}

impl Builder {
    fn act(&mut self, verb: Verb, args: &[&str]) -> &mut Self {
        let args: Vec<ObjectLabel> = args.iter().map(|a| l(a)).collect();
        self.actions
            .push(AtomicAction::new(verb, &args).expect("template arity"));
        self
    }

    fn walk(&mut self, x: &str) -> &mut Self {
        self.act(Verb::Walk, &[x])
    }

    /// Walks to an item's home and picks it up, opening and closing its
    /// container if it has one.
    fn fetch(&mut self, item: &str) -> &mut Self {
        let (home, inside) = info(l(item)).home.expect("fetch needs a movable item");
        self.walk(home);
        if inside {
            self.act(Verb::Open, &[home]);
        }
        self.act(Verb::Grab, &[item]);
        if inside {
            self.act(Verb::Close, &[home]);
        }
        self
    }

    /// Carries the held item to `dest` and leaves it there.
    fn place(&mut self, item: &str, dest: &str) -> &mut Self {
        self.walk(dest);
        let container = info(l(dest)).affordances.container;
        if container {
            self.act(Verb::Open, &[dest]);
        }
        self.act(Verb::Put, &[item, dest]);
        if container {
            self.act(Verb::Close, &[dest]);
        }
        self
    }

    fn goal(&mut self, atom: Atom) -> &mut Self {
        self.goal.push(atom);
        self
    }
}

pub const TEMPLATES: [Template; 18] = [
    Template {
        name: "put_cutlery_in_cabinet",
        room: Room::Kitchen,
        variants: &[&["fork"], &["spoon"], &["plate"]],
        build: |b, v| {
            b.fetch(v[0]).place(v[0], "kitchencabinet");
            b.goal(Atom::Inside(l(v[0]), l("kitchencabinet")))
                .goal(Atom::Closed(l("kitchencabinet")));
        },
    },
    Template {
        name: "drink",
        room: Room::Kitchen,
        variants: &[&["cup", "milk"], &["glass", "juice"], &["cup", "juice"], &["glass", "milk"]],
        build: |b, v| {
            let (vessel, drink) = (v[0], v[1]);
            b.fetch(vessel).place(vessel, "kitchentable");
            b.fetch(drink).place(drink, "kitchentable");
            b.act(Verb::Grab, &[vessel]).act(Verb::Touch, &[vessel]);
            b.goal(Atom::OnTop(l(drink), l("kitchentable")))
                .goal(Atom::Did(Verb::Touch, l(vessel)));
        },
    },
    Template {
        name: "make_cereal",
        room: Room::Kitchen,
        variants: &[&["spoon"], &["fork"]],
        build: |b, v| {
            b.fetch("cereal").place("cereal", "kitchentable");
            b.fetch("milk").place("milk", "kitchentable");
            b.act(Verb::Grab, &[v[0]]).act(Verb::Touch, &["cereal"]);
            b.goal(Atom::OnTop(l("cereal"), l("kitchentable")))
                .goal(Atom::OnTop(l("milk"), l("kitchentable")))
                .goal(Atom::Did(Verb::Touch, l("cereal")));
        },
    },
    Template {
        name: "cook_on_stove",
        room: Room::Kitchen,
        variants: &[&["bread"], &["milk"], &["whippedcream"]],
        build: |b, v| {
            b.walk("stove").act(Verb::Grab, &["pan"]).place("pan", "sink");
            b.fetch(v[0]).place(v[0], "stove");
            b.act(Verb::SwitchOn, &["stove"]);
            b.goal(Atom::OnTop(l(v[0]), l("stove"))).goal(Atom::Powered(l("stove")));
        },
    },
    Template {
        name: "use_microwave",
        room: Room::Kitchen,
        variants: &[&["bread"], &["milk"], &["cup"]],
        build: |b, v| {
            b.fetch(v[0]).place(v[0], "microwave");
            b.act(Verb::SwitchOn, &["microwave"]);
            b.goal(Atom::Inside(l(v[0]), l("microwave")))
                .goal(Atom::Powered(l("microwave")));
        },
    },
    Template {
        name: "wash_dishes",
        room: Room::Kitchen,
        variants: &[&["plate"], &["cup"], &["glass"], &["pan"]],
        build: |b, v| {
            b.fetch(v[0]).place(v[0], "sink");
            b.act(Verb::Touch, &[v[0]]);
            b.goal(Atom::OnTop(l(v[0]), l("sink"))).goal(Atom::Did(Verb::Touch, l(v[0])));
        },
    },
    Template {
        name: "serve_dessert",
        room: Room::Kitchen,
        variants: &[&["whippedcream"], &["juice"]],
        build: |b, v| {
            b.walk("kitchentable").act(Verb::Touch, &["plate"]);
            b.fetch(v[0]).place(v[0], "kitchentable");
            b.act(Verb::Grab, &["plate"]).act(Verb::Put, &["plate", "kitchentable"]);
            b.goal(Atom::OnTop(l(v[0]), l("kitchentable")))
                .goal(Atom::OnTop(l("plate"), l("kitchentable")))
                .goal(Atom::Did(Verb::Touch, l("plate")));
        },
    },
    Template {
        name: "put_groceries_in_fridge",
        room: Room::Kitchen,
        variants: &[&["bread"], &["cereal"]],
        build: |b, v| {
            b.fetch(v[0]).place(v[0], "fridge");
            b.goal(Atom::Inside(l(v[0]), l("fridge"))).goal(Atom::Closed(l("fridge")));
        },
    },
    Template {
        name: "watch_tv",
        room: Room::LivingRoom,
        variants: &[&[], &["remotecontrol"]],
        build: |b, v| {
            b.walk("lamp").act(Verb::SwitchOn, &["lamp"]);
            b.walk("tv").act(Verb::SwitchOn, &["tv"]).walk("sofa");
            for item in v {
                b.act(Verb::Grab, &[item]);
            }
            b.act(Verb::Sit, &["sofa"]);
            b.goal(Atom::Powered(l("tv"))).goal(Atom::SittingOn(l("sofa")));
        },
    },
    Template {
        name: "read_book",
        room: Room::LivingRoom,
        variants: &[&["book"], &["magazine"], &["book", "lamp"], &["magazine", "lamp"]],
        build: |b, v| {
            if v.len() > 1 {
                b.walk("lamp").act(Verb::SwitchOn, &["lamp"]);
            }
            b.walk("coffeetable")
                .act(Verb::Grab, &[v[0]])
                .act(Verb::Sit, &["sofa"])
                .act(Verb::Read, &[v[0]]);
            b.goal(Atom::Did(Verb::Read, l(v[0])));
        },
    },
    Template {
        name: "use_phone",
        room: Room::LivingRoom,
        variants: &[&[], &["lamp"]],
        build: |b, v| {
            if !v.is_empty() {
                b.walk("lamp").act(Verb::SwitchOn, &["lamp"]);
            }
            b.walk("coffeetable")
                .act(Verb::Grab, &["cellphone"])
                .act(Verb::Sit, &["sofa"])
                .act(Verb::Touch, &["cellphone"]);
            b.goal(Atom::SittingOn(l("sofa")))
                .goal(Atom::Did(Verb::Touch, l("cellphone")));
        },
    },
    Template {
        name: "tidy_living_room",
        room: Room::LivingRoom,
        variants: &[&["book", "magazine"], &["remotecontrol", "cellphone"], &["magazine", "remotecontrol"]],
        build: |b, v| {
            b.walk("lamp").act(Verb::SwitchOn, &["lamp"]).walk("coffeetable");
            for item in v {
                b.act(Verb::Grab, &[item]).act(Verb::Put, &[item, "sofa"]);
            }
            for item in v {
                b.goal(Atom::OnTop(l(item), l("sofa")));
            }
        },
    },
    Template {
        name: "work_on_computer",
        room: Room::Bedroom,
        variants: &[&[], &["mouse"]],
        build: |b, v| {
            b.walk("desk").act(Verb::SwitchOn, &["computer"]).act(Verb::Sit, &["chair"]);
            for item in v {
                b.act(Verb::Touch, &[item]);
            }
            b.act(Verb::TypeOn, &["keyboard"]);
            b.goal(Atom::Powered(l("computer")))
                .goal(Atom::Did(Verb::TypeOn, l("keyboard")));
        },
    },
    Template {
        name: "go_to_sleep",
        room: Room::Bedroom,
        variants: &[&[], &["pillow"]],
        build: |b, v| {
            b.walk("desk")
                .act(Verb::SwitchOn, &["computer"])
                .act(Verb::SwitchOff, &["computer"])
                .walk("bed");
            for item in v {
                b.act(Verb::Touch, &[item]);
            }
            b.act(Verb::Sit, &["bed"]);
            b.goal(Atom::Unpowered(l("computer"))).goal(Atom::SittingOn(l("bed")));
        },
    },
    Template {
        name: "make_bed",
        room: Room::Bedroom,
        variants: &[&["bed"], &["desk"]],
        build: |b, v| {
            b.walk("bed").act(Verb::Grab, &["pillow"]);
            if v[0] != "bed" {
                b.walk(v[0]).act(Verb::Put, &["pillow", v[0]]).act(Verb::Grab, &["pillow"]).walk("bed");
            }
            b.act(Verb::Touch, &["bed"]).act(Verb::Put, &["pillow", "bed"]);
            b.goal(Atom::OnTop(l("pillow"), l("bed")))
                .goal(Atom::Did(Verb::Touch, l("bed")))
                .goal(Atom::HandsFree);
        },
    },
    Template {
        name: "brush_teeth",
        room: Room::Bathroom,
        variants: &[&[], &["towel"]],
        build: |b, v| {
            b.walk("bathroomcabinet")
                .act(Verb::Open, &["bathroomcabinet"])
                .act(Verb::Grab, &["toothbrush"]);
            for item in v {
                b.act(Verb::Touch, &[item]);
            }
            b.act(Verb::Close, &["bathroomcabinet"])
                .walk("faucet")
                .act(Verb::SwitchOn, &["faucet"])
                .act(Verb::Touch, &["toothbrush"])
                .act(Verb::SwitchOff, &["faucet"]);
            b.goal(Atom::Did(Verb::Touch, l("toothbrush")))
                .goal(Atom::Unpowered(l("faucet")));
        },
    },
    Template {
        name: "wash_hands",
        room: Room::Bathroom,
        variants: &[&[], &["towel"]],
        build: |b, v| {
            b.walk("faucet")
                .act(Verb::SwitchOn, &["faucet"])
                .act(Verb::Touch, &["faucet"])
                .act(Verb::SwitchOff, &["faucet"]);
            for item in v {
                b.fetch(item).act(Verb::Touch, &[item]);
                b.goal(Atom::Did(Verb::Touch, l(item)));
            }
            b.goal(Atom::Did(Verb::Touch, l("faucet")))
                .goal(Atom::Unpowered(l("faucet")));
        },
    },
    Template {
        name: "use_toilet",
        room: Room::Bathroom,
        variants: &[&[]],
        build: |b, _| {
            b.walk("toilet")
                .act(Verb::Touch, &["toilet"])
                .act(Verb::Sit, &["toilet"])
                .act(Verb::Standup, &[])
                .walk("faucet")
                .act(Verb::SwitchOn, &["faucet"])
                .act(Verb::SwitchOff, &["faucet"]);
            b.goal(Atom::Did(Verb::Touch, l("toilet")))
                .goal(Atom::Standing)
                .goal(Atom::Unpowered(l("faucet")));
        },
    },
];

/// Every action any template can emit plus a walk to every piece of
/// furniture (the detour actions).
pub fn all_actions() -> Vec<AtomicAction> {
    let mut out = Vec::new();
    for t in &TEMPLATES {
        for v in 0..t.variant_count() {
            out.extend(t.instantiate(v).0);
        }
    }
    for room in Room::ALL {
        out.extend(detour_targets(room).map(|f| AtomicAction::new(Verb::Walk, &[f]).expect("walk arity")));
    }
    out.sort();
    out.dedup();
    out
}

/// Furniture the agent may wander to before starting an activity.
pub fn detour_targets(room: Room) -> impl Iterator<Item = ObjectLabel> {
    objects::room_objects(room).filter(|&o| objects::is_furniture(o))
}
