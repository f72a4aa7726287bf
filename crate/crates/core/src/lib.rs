//! Event-camera steering-angle regression at desk scale.
//!
//! The crate covers the whole pipeline: event streams and their on-disk
//! formats ([`events`]), a threshold-based event simulator producing
//! labelled recordings ([`sim`]), histogram and baseline inputs
//! ([`frames`]), label preprocessing ([`labels`]), a small residual CNN
//! trained from scratch ([`nn`]) and the evaluation protocols ([`eval`]).

pub mod eval;
pub mod events;
pub mod frames;
pub mod image;
pub mod labels;
pub mod nn;
pub mod sim;
