//! Run configuration: a sectioned key-value file (TOML) merged with command
//! line flags; flags win. Unknown keys are rejected at parse time.

use anyhow::{anyhow, Context};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use gchan::{ChannelConfig, ChannelSpec};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub channel: Option<ChannelConfig>,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    pub cutoff: usize,
    pub m: usize,
    pub k: u32,
    pub z_min: f64,
    pub z_max: f64,
    pub z_steps: usize,
    pub quad_radial: usize,
    pub quad_angular: usize,
    pub seed: u64,
    pub restarts: usize,
    /// Coherent amplitude used for numeric norm rows.
    pub alpha_re: f64,
    pub alpha_im: f64,
    /// Largest k·m·log_d ceiling handled by the verify suite.
    pub verify_max_k: usize,
    pub verify_max_m: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            cutoff: 40,
            m: 1,
            k: 2,
            z_min: 1.0,
            z_max: 5.0,
            z_steps: 81,
            quad_radial: 24,
            quad_angular: 32,
            seed: 7,
            restarts: 16,
            alpha_re: 0.5,
            alpha_im: 0.0,
            verify_max_k: 3,
            verify_max_m: 2,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Option<String>,
}

/// Flag overrides shared by all subcommands; every field mirrors a config key.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Path to a TOML config file.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Channel family: noise | gauss | loss | sqloss.
    #[arg(long, global = true)]
    pub channel: Option<String>,
    /// Noise / environment occupation n.
    #[arg(long, global = true)]
    pub n: Option<f64>,
    /// Gaussian weight diagonal u.
    #[arg(long, global = true)]
    pub u: Option<f64>,
    #[arg(long = "v-re", global = true)]
    pub v_re: Option<f64>,
    #[arg(long = "v-im", global = true)]
    pub v_im: Option<f64>,
    /// Beam-splitter transmissivity η.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long = "xi-re", global = true)]
    pub xi_re: Option<f64>,
    #[arg(long = "xi-im", global = true)]
    pub xi_im: Option<f64>,
    /// Norm order k (integer).
    #[arg(long, global = true)]
    pub k: Option<u32>,
    /// Number of channel uses m.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Fock cutoff d.
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    #[arg(long = "z-min", global = true)]
    pub z_min: Option<f64>,
    #[arg(long = "z-max", global = true)]
    pub z_max: Option<f64>,
    #[arg(long = "z-steps", global = true)]
    pub z_steps: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Output path (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Output format: json | csv.
    #[arg(long, global = true)]
    pub format: Option<String>,
}

impl RunConfig {
    pub fn load(overrides: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match &overrides.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {path}"))?;
                toml::from_str::<RunConfig>(&text)
                    .map_err(|e| anyhow!("config error in {path}: {e}"))?
            }
            None => RunConfig::default(),
        };
        cfg.apply_overrides(overrides)?;
        Ok(cfg)
    }

    fn apply_overrides(&mut self, ov: &Overrides) -> anyhow::Result<()> {
        if let Some(variant) = &ov.channel {
            let mut ch = self.channel.take().unwrap_or_default();
            if ch.variant != *variant {
                // switching family invalidates stale parameters from the file
                ch = ChannelConfig::default();
            }
            ch.variant = variant.clone();
            self.channel = Some(ch);
        }
        let mutate = |slot: &mut Option<f64>, val: Option<f64>| {
            if val.is_some() {
                *slot = val;
            }
        };
        if ov.n.is_some()
            || ov.u.is_some()
            || ov.v_re.is_some()
            || ov.v_im.is_some()
            || ov.eta.is_some()
            || ov.xi_re.is_some()
            || ov.xi_im.is_some()
        {
            let ch = self
                .channel
                .get_or_insert_with(ChannelConfig::default);
            mutate(&mut ch.n, ov.n);
            mutate(&mut ch.u, ov.u);
            mutate(&mut ch.v_re, ov.v_re);
            mutate(&mut ch.v_im, ov.v_im);
            mutate(&mut ch.eta, ov.eta);
            mutate(&mut ch.xi_re, ov.xi_re);
            mutate(&mut ch.xi_im, ov.xi_im);
        }
        if let Some(k) = ov.k {
            self.numeric.k = k;
        }
        if let Some(m) = ov.m {
            self.numeric.m = m;
        }
        if let Some(d) = ov.cutoff {
            self.numeric.cutoff = d;
        }
        if let Some(z) = ov.z_min {
            self.numeric.z_min = z;
        }
        if let Some(z) = ov.z_max {
            self.numeric.z_max = z;
        }
        if let Some(z) = ov.z_steps {
            self.numeric.z_steps = z;
        }
        if let Some(s) = ov.seed {
            self.numeric.seed = s;
        }
        if let Some(r) = ov.restarts {
            self.numeric.restarts = r;
        }
        if ov.out.is_some() {
            self.output.path = ov.out.clone();
        }
        if ov.format.is_some() {
            self.output.format = ov.format.clone();
        }
        Ok(())
    }

    /// The channel spec, defaulting to isotropic noise n = 0.3 when the
    /// config names none.
    pub fn channel_spec(&self) -> anyhow::Result<ChannelSpec> {
        match &self.channel {
            Some(cfg) => Ok(ChannelSpec::try_from(cfg)?),
            None => Ok(ChannelSpec::ClassicalNoise { n: 0.3 }),
        }
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.numeric.alpha_re, self.numeric.alpha_im)
    }

    pub fn format(&self) -> anyhow::Result<OutputFormat> {
        match self.output.format.as_deref() {
            None | Some("json") => Ok(OutputFormat::Json),
            Some("csv") => Ok(OutputFormat::Csv),
            Some(other) => Err(anyhow!("unknown format '{other}' (expected json|csv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Writes atomically: temp file in the target directory, then rename.
pub fn write_output(path: Option<&str>, contents: &str) -> anyhow::Result<()> {
    match path {
        None => {
            print!("{contents}");
            Ok(())
        }
        Some(path) => {
            let target = std::path::Path::new(path);
            let dir = target.parent().unwrap_or_else(|| std::path::Path::new("."));
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let tmp = dir.join(format!(
                ".{}.tmp",
                target
                    .file_name()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| "out".into())
            ));
            std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
            std::fs::rename(&tmp, target)
                .with_context(|| format!("renaming into {}", target.display()))?;
            Ok(())
        }
    }
}
