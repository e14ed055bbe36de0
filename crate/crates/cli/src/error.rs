use std::fmt;

/// Exit status 1 for bad input or configuration, 2 for failures while
/// doing the work.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<a3_core::ingest::IngestError> for CliError {
    fn from(e: a3_core::ingest::IngestError) -> Self {
        use a3_core::ingest::IngestError;
        match e {
            IngestError::Io { .. } => CliError::Runtime(e.to_string()),
            IngestError::Rejected(ref report) => {
                let mut msg = format!("corpus rejected with {} error(s)", report.errors.len());
                for issue in report.errors.iter().take(20) {
                    msg.push_str(&format!("\n  {issue}"));
                }
                if report.errors.len() > 20 {
                    msg.push_str(&format!("\n  ... {} more", report.errors.len() - 20));
                }
                CliError::Validation(msg)
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<a3_core::labeler::LabelError> for CliError {
    fn from(e: a3_core::labeler::LabelError) -> Self {
        use a3_core::labeler::LabelError;
        match e {
            LabelError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<a3_core::cod::CodError> for CliError {
    fn from(e: a3_core::cod::CodError) -> Self {
        use a3_core::cod::CodError;
        match e {
            CodError::UnboundPlaceholder(_)
            | CodError::Template(_)
            | CodError::InvalidConfig(_)
            | CodError::SingleClass(_)
            | CodError::MissingSplit { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<a3_core::pmi::PmiError> for CliError {
    fn from(e: a3_core::pmi::PmiError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<a3_core::synth::SynthError> for CliError {
    fn from(e: a3_core::synth::SynthError) -> Self {
        use a3_core::synth::SynthError;
        match e {
            SynthError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<a3_core::metrics::MetricError> for CliError {
    fn from(e: a3_core::metrics::MetricError) -> Self {
        CliError::Validation(e.to_string())
    }
}
