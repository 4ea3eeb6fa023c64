//! Journal recommendation for paper submissions.
//!
//! A text encoder is first fine-tuned contrastively on (paper text, journal
//! aims & scopes) pairs with in-batch negatives. A classification head over
//! journals is then trained on a chosen combination of title, abstract and
//! keywords, optionally fused with cosine features against every journal's
//! scope embedding. Models are scored with Accuracy@K.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, artifacts,
//! the CLI and the HTTP service live in the `simrec` crate.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod autograd;
pub mod contrastive;
pub mod corpus;
pub mod encoder;
mod error;
pub mod eval;
pub mod hash;
pub mod linalg;
pub mod optim;
pub mod recommender;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
