//! Convenience wrappers chaining parse → transform → instrument → profile.

use crate::gsa::{instrument, InstrumentError, InstrumentedProgram};
use crate::lang::{parse, ParseError, Program};
use crate::profile::{run_suite, ProfileError, ProfileMatrix, RunConfig, TestSuite};
use crate::transform::transform_predicates;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

pub fn instrument_program(program: &Program) -> Result<InstrumentedProgram, InstrumentError> {
    let (transformed, predicates) = transform_predicates(program);
    instrument(&transformed, predicates)
}

/// Parses, transforms and instruments MIL source.
pub fn prepare(source: &str) -> Result<InstrumentedProgram, PipelineError> {
    Ok(instrument_program(&parse(source)?)?)
}

/// [`prepare`] followed by profiling over `suite`.
pub fn profile_source(source: &str, suite: &TestSuite) -> Result<(InstrumentedProgram, ProfileMatrix), PipelineError> {
    let ip = prepare(source)?;
    let m = run_suite(&ip, suite, RunConfig::default())?;
    Ok((ip, m))
}
