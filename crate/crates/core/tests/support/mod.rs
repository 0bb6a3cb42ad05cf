//! Reference implementations shared by the oracle tests and the acceptance
//! report. Each check returns `Err` with a description of the first
//! mismatch instead of panicking, so the report can print it.

#![allow(dead_code)]

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub mod constraint;
pub mod gradients;
pub mod structure;
