use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    MissingInput(String),
    #[error(transparent)]
    Core(#[from] encgan::Error),
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "missing_input",
            _ => "runtime",
        }
    }

    pub fn exit_code(&self) -> i32 {
        use encgan::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Core(e) => match e {
                E::InvalidConfig(_) | E::UnsupportedResolution(_) | E::ZeroCount | E::PhaseSchedule(_) | E::Json(_) => 2,
                E::MissingManifest(_) | E::EmptyFolder(_) => 3,
                E::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
                _ => 1,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorJson { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() })
            .expect("plain struct serializes")
    }
}
