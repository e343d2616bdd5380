//! Each module below pulls one chapter of the book in as rustdoc, so
//! `cargo test --doc -p mtforge-book` compiles and runs every fenced Rust
//! snippet in `book/`. If a chapter drifts from the library API, this
//! crate stops building.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
