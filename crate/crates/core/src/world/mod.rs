//! Synthetic household world: activity programs, a symbolic executor and
//! a generator for videos with eye-tracking traces.

pub mod executor;
pub mod generate;
pub mod objects;
pub mod program;
pub mod templates;

pub use executor::{execute, success_rate, Atom, Execution, Failure, Location, Posture, WorldState};
pub use generate::{generate_dataset, generate_video, Dataset, DatasetConfig, GazeSynthesis, Layout, SyntheticVideo};
pub use objects::Room;
pub use program::{ActionVocab, ActivityProgram, AtomicAction, Verb};
pub use templates::{Template, TEMPLATES};

/// Token vocabulary covering every action the generator can emit.
pub fn action_vocab() -> ActionVocab {
    ActionVocab::new(templates::all_actions())
}
