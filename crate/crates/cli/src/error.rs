use serde_json::json;
use strip_radius_core::evolution::EvolutionError;
use strip_radius_core::oracles::OracleError;
use strip_radius_core::system::SystemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Usage { message: String },
    #[error("config error at `{pointer}`: {message}")]
    Config { pointer: String, message: String },
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) | CliError::Io(_) => 1,
            CliError::Usage { .. } | CliError::Config { .. } => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, pointer) = match self {
            CliError::Usage { .. } => ("usage", None),
            CliError::Config { pointer, .. } => ("config", Some(pointer.clone())),
            CliError::Numerical(_) => ("numerical", None),
            CliError::Io(_) => ("io", None),
        };
        let message = match self {
            CliError::Config { message, .. } => message.clone(),
            other => other.to_string(),
        };
        let mut body = json!({ "kind": kind, "message": message, "exit_code": self.exit_code() });
        if let Some(p) = pointer {
            body["pointer"] = json!(p);
        }
        json!({ "error": body })
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::System(SystemError::Eval { .. }) | OracleError::BadCase(_) | OracleError::InsufficientBox { .. } => {
                CliError::Config {
                    pointer: String::new(),
                    message: e.to_string(),
                }
            }
            OracleError::Evolution(EvolutionError::BadParameter(_)) => CliError::Config {
                pointer: "/solver".into(),
                message: e.to_string(),
            },
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<EvolutionError> for CliError {
    fn from(e: EvolutionError) -> Self {
        OracleError::from(e).into()
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        OracleError::from(e).into()
    }
}
