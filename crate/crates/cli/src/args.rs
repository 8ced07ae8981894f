//! Command arguments. Every struct doubles as the schema of the matching
//! `--config` JSON file; flags given on the command line win over the file.

use clap::{Args, ValueEnum};
use echochain::echo::BackwardMode;
use echochain::meanfield::SignConvention;
use echochain::noise::ProtocolKind;
use echochain::oracle::Fault;
use echochain::transfer::TransferEngine;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use std::path::{Path, PathBuf};

use crate::error::{usage, CliError};

/// Parses a value with the kebab-case names the library uses in JSON.
fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Continuous,
    MirroredPulse,
}

/// Fills every unset option of `$flags` from `$file`; boolean switches are
/// on if either side turns them on.
macro_rules! overlay {
    ($flags:ident, $file:ident; opts: $($o:ident),*; switches: $($s:ident),*) => {
        $( if $flags.$o.is_none() { $flags.$o = $file.$o; } )*
        $( $flags.$s |= $file.$s; )*
    };
}

pub trait Configurable: DeserializeOwned + Default {
    fn config_path(&self) -> Option<&Path>;
    fn overlay(&mut self, file: Self);

    fn resolve(mut self) -> Result<Self, CliError> {
        if let Some(path) = self.config_path() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            let file: Self =
                serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
            self.overlay(file);
        }
        Ok(self)
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchoArgs {
    /// Chain length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Coupling strength of every active bond.
    #[arg(long)]
    pub j: Option<f64>,
    /// Largest leg duration; the curve samples t_max·k/points for k = 1..points.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Trotter steps per leg.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Backward leg: trotterized | exact-continuous.
    #[arg(long, value_parser = kebab::<BackwardMode>)]
    pub backward: Option<BackwardMode>,
    /// Gate-noise strength.
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Add the classical mean-field curve.
    #[arg(long)]
    pub with_meanfield: bool,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleKind>,
    /// Mean-field sign of the ferromagnetic leg: hamiltonian | literal.
    #[arg(long, value_parser = kebab::<SignConvention>)]
    pub convention: Option<SignConvention>,
    /// Mean-field RK4 step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG plot here.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Allow chains longer than the desk-scale limit.
    #[arg(long)]
    pub large: bool,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Configurable for EchoArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn overlay(&mut self, file: Self) {
        let s = self;
        overlay!(s, file;
            opts: n, j, t_max, points, steps, backward, v, seed, schedule, convention, dt, out, plot;
            switches: with_meanfield, large);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// exact | trotter-direct | trotter-simfm.
    #[arg(long, value_parser = kebab::<TransferEngine>)]
    pub engine: Option<TransferEngine>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Trotter steps; calibrated from the noise-free error when omitted.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Let gate noise reach the field phases too.
    #[arg(long)]
    pub perturb_fields: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(long)]
    pub large: bool,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Configurable for TransferArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn overlay(&mut self, file: Self) {
        let s = self;
        overlay!(s, file;
            opts: n, engine, t_max, points, steps, v, seed, out, plot;
            switches: perturb_fields, large);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessArgs {
    /// echo | transfer.
    #[arg(long, value_parser = kebab::<ProtocolKind>)]
    pub protocol: Option<ProtocolKind>,
    /// Single chain length.
    #[arg(long, conflicts_with = "n_range")]
    pub n: Option<usize>,
    /// Inclusive range of chain lengths, `lo:hi`.
    #[arg(long)]
    pub n_range: Option<String>,
    #[arg(long)]
    pub v_min: Option<f64>,
    #[arg(long)]
    pub v_max: Option<f64>,
    #[arg(long)]
    pub v_points: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Protocol time (echo: per leg).
    #[arg(long)]
    pub t: Option<f64>,
    /// Trotter steps; echo defaults to 8, transfer is calibrated per n.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub perturb_fields: bool,
    /// Directory for trials.csv, stats.csv, fits.csv (and plots).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Write loglog.svg and slopes.svg next to the CSV files.
    #[arg(long)]
    pub plot: bool,
    #[arg(long)]
    pub large: bool,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Configurable for RobustnessArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn overlay(&mut self, file: Self) {
        let s = self;
        if s.n.is_some() || s.n_range.is_some() {
            // A length given on the command line replaces the file's choice.
            let mut file = file;
            file.n = None;
            file.n_range = None;
            overlay!(s, file;
                opts: protocol, n, n_range, v_min, v_max, v_points, trials, seed, t, steps, out_dir;
                switches: perturb_fields, plot, large);
        } else {
            overlay!(s, file;
                opts: protocol, n, n_range, v_min, v_max, v_points, trials, seed, t, steps, out_dir;
                switches: perturb_fields, plot, large);
        }
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleArgs {
    /// Transfer-chain length for the Trotter-scaling check.
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Comma-separated, increasing step counts.
    #[arg(long, value_delimiter = ',')]
    pub trotter_steps: Option<Vec<usize>>,
    /// Random cases for the two-spin equivalence check.
    #[arg(long)]
    pub cases: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report destination; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Harness self-test: run the suite against a deliberately broken gate.
    #[arg(long, hide = true, value_parser = kebab::<Fault>)]
    pub inject_fault: Option<Fault>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Configurable for OracleArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn overlay(&mut self, file: Self) {
        let s = self;
        overlay!(s, file;
            opts: max_n, trotter_steps, cases, seed, out, inject_fault;
            switches: );
    }
}

/// `lo:hi`, inclusive.
pub fn parse_range(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || usage(format!("expected a range lo:hi, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}
