#![allow(dead_code)]

pub mod checks;
pub mod e2e;
pub mod features;
