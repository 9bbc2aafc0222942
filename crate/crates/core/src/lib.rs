pub mod domination;
pub mod environments;
pub mod gcs;
pub mod geometry;
pub mod heuristic;
pub mod io;
mod linear;
pub mod lp;
pub mod restriction;
pub mod search;
