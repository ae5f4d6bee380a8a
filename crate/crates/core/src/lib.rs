#![no_std]
extern crate alloc;

pub mod distr;
pub mod equiv;
pub mod lp;
pub mod rational;
pub mod semantics;
pub mod stability;
pub mod terms;

pub use rational::Rational;
