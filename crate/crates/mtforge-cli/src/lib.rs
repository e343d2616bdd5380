//! Library surface of the `mtforge` command-line tool, exposed so
//! integration tests can drive commands in-process.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod offline;

use mtforge::corpus::CorpusError;
use mtforge::eval::arena::ArenaError;
use mtforge::eval::ifmt::IfmtError;
use mtforge::eval::report::ReportError;
use mtforge::gateway::GatewayError;
use mtforge::guidelines::{CatalogError, GuidelineError};
use mtforge::jsonl::JsonlError;
use mtforge::model::ModelError;
use mtforge::prefs::PrefError;
use mtforge::rewards::RewardError;
use mtforge::sft::SftError;

/// Exit code for a configuration that cannot be loaded or validated.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code for a scoring or generation service that cannot be used.
pub const EXIT_ENDPOINT: u8 = 3;
/// Exit code for unreadable or malformed input data.
pub const EXIT_DATA: u8 = 4;

/// Pulls the gateway error out of a cause, looking through the library
/// error enums whose transparent wrapper variants hide it from plain
/// chain downcasts.
fn gateway_error<'a>(cause: &'a (dyn std::error::Error + 'static)) -> Option<&'a GatewayError> {
    if let Some(gateway) = cause.downcast_ref::<GatewayError>() {
        return Some(gateway);
    }
    match cause.downcast_ref::<CorpusError>() {
        Some(CorpusError::Gateway(g)) => return Some(g),
        _ => {}
    }
    match cause.downcast_ref::<GuidelineError>() {
        Some(GuidelineError::Gateway(g)) => return Some(g),
        _ => {}
    }
    match cause.downcast_ref::<SftError>() {
        Some(SftError::Gateway(g)) => return Some(g),
        _ => {}
    }
    match cause.downcast_ref::<PrefError>() {
        Some(PrefError::Gateway(g)) => return Some(g),
        _ => {}
    }
    match cause.downcast_ref::<RewardError>() {
        Some(RewardError::Gateway(g)) => return Some(g),
        _ => {}
    }
    match cause.downcast_ref::<IfmtError>() {
        Some(IfmtError::Gateway(g)) => return Some(g),
        _ => {}
    }
    match cause.downcast_ref::<ArenaError>() {
        Some(ArenaError::Gateway(g)) => return Some(g),
        _ => {}
    }
    None
}

/// Maps an error chain to the process exit code. Configuration problems
/// win over endpoint problems, which win over data problems; anything
/// unrecognized exits 1.
pub fn classify_error(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<config::ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
    }
    for cause in err.chain() {
        if let Some(gateway) = gateway_error(cause) {
            return match gateway {
                GatewayError::EndpointUnavailable { .. }
                | GatewayError::MalformedResponse { .. }
                | GatewayError::DirectionMissing { .. } => EXIT_ENDPOINT,
                GatewayError::UnknownEndpoint(_) | GatewayError::AuthMissing { .. } => EXIT_CONFIG,
                GatewayError::CacheUnavailable(_) => 1,
            };
        }
    }
    for cause in err.chain() {
        let data_error = cause.downcast_ref::<JsonlError>().is_some()
            || cause.downcast_ref::<CorpusError>().is_some()
            || cause.downcast_ref::<CatalogError>().is_some()
            || cause.downcast_ref::<GuidelineError>().is_some()
            || cause.downcast_ref::<ModelError>().is_some()
            || cause.downcast_ref::<SftError>().is_some()
            || cause.downcast_ref::<PrefError>().is_some()
            || cause.downcast_ref::<RewardError>().is_some()
            || cause.downcast_ref::<IfmtError>().is_some()
            || cause.downcast_ref::<ArenaError>().is_some()
            || cause.downcast_ref::<ReportError>().is_some()
            || cause.downcast_ref::<serde_json::Error>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some();
        if data_error {
            return EXIT_DATA;
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gateway_outage_beats_wrapped_data_error() {
        let inner = GatewayError::EndpointUnavailable {
            endpoint: "judge".into(),
            attempts: 3,
            message: "connection refused".into(),
        };
        let err = anyhow::Error::new(SftError::from(inner)).context("curating batch");
        assert_eq!(classify_error(&err), EXIT_ENDPOINT);
    }

    #[test]
    fn config_problems_outrank_everything() {
        let err = anyhow::Error::new(config::ConfigError::MissingRole("judge".into()));
        assert_eq!(classify_error(&err), EXIT_CONFIG);
    }

    #[test]
    fn plain_io_counts_as_data() {
        let err = anyhow::Error::new(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "missing input",
        ));
        assert_eq!(classify_error(&err), EXIT_DATA);
    }

    #[test]
    fn unknown_errors_exit_one() {
        let err = anyhow::anyhow!("something else entirely");
        assert_eq!(classify_error(&err), 1);
    }
}
