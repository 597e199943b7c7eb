pub mod corpus_io;
pub mod error;
pub mod experiments;
pub mod genre_graph;
pub mod lexstats;
pub mod mnb;
pub mod preprocess;
pub mod seed;
pub mod vectorize;

pub use error::{Error, Result};
