use clap::{Args, ValueEnum};
use hdx_core::agreement::{corrupt, perfect_ensemble, CorruptMode, Ensemble};
use hdx_core::grassmann::{grassmann_stav, Flavor, GrassmannPoset};
use hdx_core::io::{complex_from_json, ensemble_from_json, stav_from_json};
use hdx_core::stav::{hdx_stav, neighborhood_stav, partite_ij_stav, NeighborhoodMode, StavInstance};
use hdx_core::Complex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use crate::report::RunManifest;
use crate::CliError;

pub fn read_input(path: &str, manifest: &mut RunManifest) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    manifest.record_input(path, &bytes);
    String::from_utf8(bytes).map_err(|e| CliError::Io(format!("{path}: {e}")))
}

pub fn load_complex(path: &str, manifest: &mut RunManifest) -> Result<Complex, CliError> {
    Ok(complex_from_json(&read_input(path, manifest)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StavKind {
    Hdx,
    Partite,
    Neighborhood,
    NeighborhoodComplement,
    Grassmann,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    Linear,
    Affine,
}

impl From<FlavorArg> for Flavor {
    fn from(f: FlavorArg) -> Flavor {
        match f {
            FlavorArg::Linear => Flavor::Linear,
            FlavorArg::Affine => Flavor::Affine,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StavArgs {
    /// complex JSON file
    #[arg(long)]
    pub complex: Option<String>,
    #[arg(long, value_enum, default_value = "hdx")]
    pub stav: StavKind,
    /// STAV JSON file, for --stav file
    #[arg(long)]
    pub stav_file: Option<String>,
    /// top level of the sets (defaults to the complex dimension)
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub i_colors: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub j_colors: Vec<usize>,
    /// field size, for --stav grassmann
    #[arg(long)]
    pub q: Option<usize>,
    /// ambient dimension, for --stav grassmann
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value = "linear")]
    pub flavor: FlavorArg,
}

fn need<T: Copy>(v: Option<T>, flag: &str, kind: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for --stav {kind}")))
}

impl StavArgs {
    pub fn complex(&self, manifest: &mut RunManifest) -> Result<Complex, CliError> {
        let path = self.complex.as_deref().ok_or_else(|| CliError::Usage("--complex is required".into()))?;
        load_complex(path, manifest)
    }

    pub fn build(&self, manifest: &mut RunManifest) -> Result<StavInstance, CliError> {
        Ok(match self.stav {
            StavKind::Hdx => {
                let c = self.complex(manifest)?;
                hdx_stav(&c, self.d.unwrap_or(c.d()), need(self.l, "l", "hdx")?)?
            }
            StavKind::Partite => {
                let c = self.complex(manifest)?;
                partite_ij_stav(&c, &self.i_colors, &self.j_colors, self.k.unwrap_or(c.d()))?
            }
            StavKind::Neighborhood | StavKind::NeighborhoodComplement => {
                let c = self.complex(manifest)?;
                let mode = if self.stav == StavKind::Neighborhood {
                    NeighborhoodMode::Independent
                } else {
                    NeighborhoodMode::Complement
                };
                neighborhood_stav(&c, need(self.l, "l", "neighborhood")?, need(self.k, "k", "neighborhood")?, mode)?
            }
            StavKind::Grassmann => {
                let (q, n, d) = (need(self.q, "q", "grassmann")?, need(self.n, "n", "grassmann")?, need(self.d, "d", "grassmann")?);
                let p = GrassmannPoset::new(q, n, d, self.flavor.into())?;
                grassmann_stav(&p, d, need(self.l, "l", "grassmann")?)?
            }
            StavKind::File => {
                let path = self.stav_file.as_deref().ok_or_else(|| CliError::Usage("--stav-file is required for --stav file".into()))?;
                stav_from_json(&read_input(path, manifest)?)?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorruptArg {
    FlipOne,
    ResampleSet,
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    /// ensemble JSON file
    #[arg(long, conflicts_with = "plant_seed")]
    pub ensemble: Option<String>,
    /// plant a uniformly random global assignment with this seed
    #[arg(long)]
    pub plant_seed: Option<u64>,
    #[arg(long, default_value_t = 2)]
    pub alphabet: u32,
    /// corruption rate applied to the planted ensemble
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "resample-set")]
    pub corrupt: CorruptArg,
    /// corruption seed (defaults to the plant seed)
    #[arg(long)]
    pub corrupt_seed: Option<u64>,
    /// write the ensemble that was used
    #[arg(long)]
    pub save_ensemble: Option<String>,
}

pub struct Loaded {
    pub ensemble: Ensemble,
    pub plant: Option<Vec<u32>>,
}

impl EnsembleArgs {
    pub fn load(&self, sets: &[Vec<u32>], n_points: usize, manifest: &mut RunManifest) -> Result<Loaded, CliError> {
        let loaded = match (&self.ensemble, self.plant_seed) {
            (Some(path), _) => Loaded { ensemble: ensemble_from_json(&read_input(path, manifest)?)?, plant: None },
            (None, Some(seed)) => {
                manifest.seed.get_or_insert(seed);
                if self.alphabet < 1 {
                    return Err(CliError::Usage("--alphabet must be positive".into()));
                }
                let mut rng = StdRng::seed_from_u64(seed);
                let g: Vec<u32> = (0..n_points).map(|_| rng.gen_range(0..self.alphabet)).collect();
                let perfect = perfect_ensemble(sets, &g, self.alphabet)?;
                let mode = match self.corrupt {
                    CorruptArg::FlipOne => CorruptMode::FlipOne,
                    CorruptArg::ResampleSet => CorruptMode::ResampleSet,
                };
                let ensemble = corrupt(&perfect, self.alpha, mode, self.corrupt_seed.unwrap_or(seed))?;
                Loaded { ensemble, plant: Some(g) }
            }
            (None, None) => return Err(CliError::Usage("give --ensemble FILE or --plant-seed N".into())),
        };
        if let Some(path) = &self.save_ensemble {
            std::fs::write(path, hdx_core::io::ensemble_to_json(&loaded.ensemble)).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
        }
        Ok(loaded)
    }

    pub fn describe(&self) -> Value {
        json!({
            "file": self.ensemble,
            "plant_seed": self.plant_seed,
            "alphabet": self.alphabet,
            "alpha": self.alpha,
            "corrupt": format!("{:?}", self.corrupt),
            "corrupt_seed": self.corrupt_seed.or(self.plant_seed),
        })
    }
}
