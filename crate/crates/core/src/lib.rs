pub mod analysis;
pub mod assign;
pub mod cli;
pub mod interaction;
pub mod lattice;
pub mod oracle;
pub mod rates;
pub mod sketch;
pub mod stats;
pub mod streams;
