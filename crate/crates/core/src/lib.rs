//! Simulation of acoustic backscatter from rippled seafloor patches and
//! template-matching inversion of backscatter signals.

pub mod bessel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod library;
pub mod matcher;
pub mod microlocal;
pub mod params;
pub mod report;
pub mod solver;
pub mod wavelet;

pub use error::{Error, Result};
