use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pvwdn::harness::ExperimentConfig;
use pvwdn::io;
use pvwdn::plant::NonlinearNetwork;

use crate::CliError;

/// Configuration file of the command-line tool. Relative paths resolve
/// against the directory of the configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Network description (JSON) replacing the built-in surrogate.
    pub network: Option<PathBuf>,
    /// Recorded PV history (`day,slot,power_kw`) replacing the generator.
    pub pv: Option<PathBuf>,
    /// Price per control step (`step,value`).
    pub price: Option<PathBuf>,
    /// Base demand per control step (`step,value`).
    pub demand: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub experiment: ExperimentConfig,
}

/// Fully loaded and validated inputs of a command.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: ExperimentConfig,
    pub out: PathBuf,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<(Self, PathBuf), CliError> {
        match path {
            None => Ok((Self::default(), PathBuf::from("."))),
            Some(path) => {
                let config = io::read_json(path).map_err(|e| CliError::io(path, e))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                Ok((config, base))
            }
        }
    }

    /// Reads every referenced file, applies overrides and validates the
    /// experiment. Nothing is written.
    pub fn resolve(
        self,
        base: &Path,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> Result<Resolved, CliError> {
        let mut experiment = self.experiment;
        if let Some(path) = &self.network {
            let path = resolve(base, path);
            experiment.network =
                io::read_json::<NonlinearNetwork>(&path).map_err(|e| CliError::io(&path, e))?;
        }
        if let Some(path) = &self.pv {
            let path = resolve(base, path);
            let slots = experiment.grid().slots_per_day();
            experiment.recorded_pv =
                Some(io::read_pv_file(&path, slots).map_err(|e| CliError::io(&path, e))?);
        }
        if let Some(path) = &self.price {
            let path = resolve(base, path);
            experiment.price = io::read_profile_file(&path).map_err(|e| CliError::io(&path, e))?;
        }
        if let Some(path) = &self.demand {
            let path = resolve(base, path);
            experiment.demand.base =
                io::read_profile_file(&path).map_err(|e| CliError::io(&path, e))?;
        }
        if let Some(seed) = seed.or(self.seed) {
            experiment.seed = seed;
            experiment.excitation.seed = seed;
        }
        experiment.validate().map_err(CliError::from)?;
        let out = out
            .or_else(|| self.out.map(|p| resolve(base, &p)))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Resolved { experiment, out })
    }
}
