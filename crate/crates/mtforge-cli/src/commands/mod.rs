//! One module per subcommand, plus the runtime shared by all of them.

pub mod arena_winrate;
pub mod build_prefs;
pub mod config_init;
pub mod corpus_prep;
pub mod curate_sft;
pub mod eval_chrf;
pub mod eval_ifmt;
pub mod gen_ifmt;
pub mod gen_verifiable;
pub mod reward_batch;

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Args;
use mtforge::gateway::transport::HttpTransport;
use mtforge::gateway::{EndpointConfig, Gateway};

use crate::config::RunConfig;
use crate::offline::OfflineTransport;

/// Flags shared by every pipeline subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Path to the run configuration (default: mtforge.toml if present)
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Use deterministic built-in stand-ins instead of live services
    #[arg(long)]
    pub offline: bool,

    /// Override the seed from the configuration
    #[arg(long)]
    pub seed: Option<u64>,

    /// Override the worker count from the configuration
    #[arg(long)]
    pub workers: Option<usize>,

    /// Abort on the first judge or metric failure instead of recording it
    #[arg(long)]
    pub strict: bool,
}

/// Resolved settings for one invocation: the file config with the
/// command-line overrides already applied.
pub struct Runtime {
    pub config: RunConfig,
    pub seed: u64,
    pub workers: usize,
    pub offline: bool,
    pub strict: bool,
}

impl Runtime {
    pub fn load(common: &CommonArgs) -> anyhow::Result<Self> {
        let config = match &common.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let default_path = PathBuf::from("mtforge.toml");
                if default_path.exists() {
                    RunConfig::load(&default_path)?
                } else {
                    RunConfig::default()
                }
            }
        };
        let offline = common.offline || config.run.offline;
        Ok(Self {
            seed: common.seed.unwrap_or(config.run.seed),
            workers: common.workers.unwrap_or(config.run.workers).max(1),
            offline,
            strict: common.strict,
            config,
        })
    }

    /// Builds a gateway serving the given roles: live endpoints from the
    /// config, or the offline transport with one synthetic endpoint per
    /// role so offline runs need no [endpoints] sections at all.
    pub fn gateway(&self, roles: &[&str]) -> anyhow::Result<Gateway> {
        let mut builder = Gateway::builder();
        if self.offline {
            builder = builder.transport(Arc::new(OfflineTransport::new()));
            for role in roles {
                builder =
                    builder.endpoint(*role, EndpointConfig::new(format!("offline://{role}")));
            }
        } else {
            builder = builder.transport(Arc::new(HttpTransport::new()));
            if let Some(dir) = &self.config.run.cache_dir {
                builder = builder.cache_dir(dir);
            }
            for role in roles {
                builder = builder.endpoint(*role, self.config.endpoint_config(role)?);
            }
        }
        Ok(builder.build()?)
    }
}

/// Reads input rows, failing with a config-style path message when the
/// file is missing so mistakes surface cleanly.
pub fn read_rows<T: serde::de::DeserializeOwned>(
    path: &PathBuf,
    what: &str,
) -> anyhow::Result<Vec<T>> {
    let rows: Vec<T> =
        mtforge::jsonl::read_all(path).with_context(|| format!("reading {what} from {}", path.display()))?;
    Ok(rows)
}
