//! Command-line front end for `tilegamut`: instance files in, JSON reports
//! and chromaticity plots out.

pub mod instance;
pub mod pipeline;
pub mod report;
pub mod svg;

pub use instance::{parse_instance, Instance, InstanceError, Projector, ValidationError};
pub use pipeline::{run_pipeline, Config, GamutResult, Method, PipelineError, PipelineOutput, VerifyConfig};
