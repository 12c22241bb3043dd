//! Coarse-to-fine SQL skeleton search for text-to-SQL.

pub mod agents;
pub mod bench;
pub mod gateway;
pub mod normalize;
pub mod par;
pub mod prompt;
pub mod schema;
pub mod search;
pub mod select;
pub mod sft;
pub mod skeleton;
pub mod sql;
pub mod sqlgen;
