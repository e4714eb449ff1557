use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing option; `option` is the flag name without dashes.
    #[error("--{option}: {message}")]
    Config { option: String, message: String },
    #[error(transparent)]
    Run(#[from] betadyn::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn config(option: &str, message: impl Into<String>) -> Self {
        CliError::Config { option: option.to_string(), message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            _ => 1,
        }
    }

    /// Re-labels a library configuration error with the flag that controls the field.
    pub fn from_validation(err: betadyn::Error) -> Self {
        match err {
            betadyn::Error::Config(msg) => {
                let field = msg.split([' ', '(']).next().unwrap_or("");
                let option = match field {
                    "n_dim" => "n-dim",
                    "sample_stride" => "stride",
                    "n_samples" => "samples",
                    "burn_in" => "burn-in",
                    "switch_rate" => "switch-rate",
                    "c" => "c-param",
                    other => other,
                };
                CliError::config(option, msg.clone())
            }
            other => CliError::Run(other),
        }
    }
}
