pub mod assembly;
pub mod assets;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod generate;
pub mod llm;
pub mod placement;
pub mod road;
pub mod telemetry;
