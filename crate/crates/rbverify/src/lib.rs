pub mod cli;
pub mod config;
pub mod driver;
pub mod expand;
pub mod report;
pub mod interp;
pub mod smt;
pub mod syntax;
pub mod translate;
pub mod typesys;
pub mod vcgen;
