//! Knowledge-graph completion recast as retrieval-augmented question
//! answering over multilingual triples.
//!
//! The crate is organised as a pipeline: [`ingestion`] reads dumps and builds
//! knowledge graphs, [`reformulation`] turns triples into questions and
//! generator prompts, [`retrieval`] supplies context, [`generation`] talks to
//! a generator backend, and [`evaluation`] scores the output. [`pipeline`]
//! ties the stages to files on disk.

pub mod config;
pub mod evaluation;
pub mod generation;
pub mod ingestion;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod reformulation;
pub mod registry;
pub mod retrieval;
