// Each test binary uses a different subset of these.
#![allow(dead_code)]

pub mod lang;
pub mod tabular;
pub mod tri;
