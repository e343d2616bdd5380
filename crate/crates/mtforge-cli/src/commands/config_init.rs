//! Writes a commented starter configuration file.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;

use crate::config;

#[derive(Debug, Args)]
pub struct ConfigInitArgs {
    /// Where to write the configuration
    #[arg(long, default_value = "mtforge.toml")]
    pub output: PathBuf,

    /// Overwrite an existing file
    #[arg(long)]
    pub force: bool,
}

pub fn run(args: &ConfigInitArgs) -> anyhow::Result<()> {
    if args.output.exists() && !args.force {
        bail!("{} already exists; pass --force to overwrite", args.output.display());
    }
    std::fs::write(&args.output, config::TEMPLATE)
        .with_context(|| format!("writing {}", args.output.display()))?;
    println!("wrote {}", args.output.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_to_clobber_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mtforge.toml");
        let args = ConfigInitArgs { output: path.clone(), force: false };
        run(&args).unwrap();
        assert!(crate::config::RunConfig::load(&path).is_ok());
        assert!(run(&args).is_err());
        let forced = ConfigInitArgs { output: path, force: true };
        run(&forced).unwrap();
    }
}
