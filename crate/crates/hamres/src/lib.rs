//! Constructive Hamilton cycles in pseudorandom digraphs, plus resilience
//! experiments on the random digraph process.

pub mod cert;
pub mod connector;
pub mod digraph;
pub mod division;
pub mod error;
pub mod matching;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod process;
pub mod profile;
pub mod resilience;
pub mod rng;

pub use digraph::{Digraph, DirectedPath, HamiltonCycle, Sign, Vertex};
pub use error::{Error, Result, Stage};
