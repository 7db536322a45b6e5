#![allow(dead_code)]

pub mod gf2;
pub mod homology;
pub mod kuhn;
pub mod loess;
pub mod scenes;
