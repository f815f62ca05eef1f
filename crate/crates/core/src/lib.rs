pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod ground_state;
pub mod modulation;
pub mod persistence;
pub mod profiles;
pub mod radial;
