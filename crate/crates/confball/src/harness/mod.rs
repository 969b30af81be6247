pub mod config;
pub mod report;
mod run;
pub use config::*;
pub use report::*;
pub use run::*;
