use echochain::echo::{echo_fidelity_curve, BackwardMode, EchoConfig};
use echochain::meanfield::{run_meanfield_echo, IntegratorConfig, Schedule, SignConvention};
use echochain::noise::{
    log_grid, slope_vs_n, split_by_parity, NoiseModel, ProtocolKind, ProtocolTemplate, SlopePoint, MIN_R_SQUARED,
};
use echochain::oracle::{run_oracle_checks, OracleConfig};
use echochain::transfer::{calibrate_steps, transfer_fidelity_curve, TransferConfig, TransferEngine, TRANSFER_TIME};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::args::{parse_range, EchoArgs, OracleArgs, RobustnessArgs, ScheduleKind, TransferArgs};
use crate::error::{usage, CliError};
use crate::plot;

/// Longest chain accepted without `--large` (4096 amplitudes).
const DESK_MAX_SITES: usize = 12;
/// Noise-free Trotter infidelity targeted by the transfer step calibration.
const CALIBRATION_TARGET: f64 = 1e-4;
const DEFAULT_ECHO_STEPS: usize = 8;

fn check_size(n: usize, large: bool) -> Result<(), CliError> {
    if n > DESK_MAX_SITES && !large {
        return Err(usage(format!("n = {n} exceeds {DESK_MAX_SITES}; pass --large to allow it")));
    }
    Ok(())
}

/// `t_max·k/points` for `k = 1..=points`.
fn time_grid(t_max: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points == 0 {
        return Err(usage("--points must be at least 1"));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(usage(format!("--t-max must be finite and nonnegative, got {t_max}")));
    }
    Ok((1..=points).map(|k| t_max * k as f64 / points as f64).collect())
}

fn noise_model(v: f64, perturb_fields: bool) -> Result<Option<NoiseModel>, CliError> {
    Ok(if v == 0.0 && !perturb_fields {
        None
    } else {
        Some(NoiseModel::new(v)?.with_field_noise(perturb_fields))
    })
}

fn write_csv<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EchoRow {
    pub series: &'static str,
    pub n: usize,
    pub j: f64,
    pub t: f64,
    #[serde(rename = "N")]
    pub steps: Option<usize>,
    pub mode: String,
    pub v: Option<f64>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub f_ec: f64,
    #[serde(rename = "I_ec")]
    pub i_ec: f64,
}

pub fn echo(args: EchoArgs) -> Result<(), CliError> {
    let n = args.n.unwrap_or(10);
    check_size(n, args.large)?;
    let j = args.j.unwrap_or(1.0);
    let grid = time_grid(args.t_max.unwrap_or(3.0), args.points.unwrap_or(60))?;
    let steps = args.steps.unwrap_or(16);
    let v = args.v.unwrap_or(0.0);
    let seed = args.seed.unwrap_or(0);
    let backward = args.backward.unwrap_or(BackwardMode::Trotterized);

    let config = EchoConfig {
        n,
        j,
        t: 0.0,
        n_steps: steps,
        backward,
        noise: noise_model(v, false)?,
        seed,
    };
    config.validate()?;
    let mut rows: Vec<EchoRow> = echo_fidelity_curve(&config, &grid)?
        .into_iter()
        .map(|r| EchoRow {
            series: "quantum",
            n,
            j,
            t: r.config.t,
            steps: Some(steps),
            mode: backward.to_string(),
            v: Some(v),
            seed: Some(r.config.seed),
            dt: None,
            f_ec: r.fidelity,
            i_ec: r.infidelity,
        })
        .collect();

    if args.with_meanfield {
        let schedule = match args.schedule.unwrap_or(ScheduleKind::Continuous) {
            ScheduleKind::Continuous => Schedule::Continuous,
            ScheduleKind::MirroredPulse => Schedule::MirroredPulse { steps },
        };
        let convention = args.convention.unwrap_or(SignConvention::Hamiltonian);
        let integrator = IntegratorConfig {
            dt: args.dt.unwrap_or(IntegratorConfig::default().dt),
        };
        let mode = match schedule {
            Schedule::Continuous => format!("{schedule}:{convention}"),
            Schedule::MirroredPulse { .. } => schedule.to_string(),
        };
        let classical = grid
            .par_iter()
            .map(|&t| run_meanfield_echo(n, j, t, integrator, schedule, convention))
            .collect::<echochain::Result<Vec<_>>>()?;
        rows.extend(classical.into_iter().map(|r| EchoRow {
            series: "meanfield",
            n,
            j,
            t: r.t,
            steps: matches!(schedule, Schedule::MirroredPulse { .. }).then_some(steps),
            mode: mode.clone(),
            v: None,
            seed: None,
            dt: Some(r.dt),
            f_ec: r.fidelity,
            i_ec: r.infidelity,
        }));
    }

    write_csv(args.out.as_deref(), &rows)?;
    if let Some(path) = &args.plot {
        plot::echo_curves(path, &rows)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct TransferRow {
    pub n: usize,
    pub t: f64,
    #[serde(rename = "N")]
    pub steps: Option<usize>,
    pub engine: TransferEngine,
    pub v: f64,
    pub seed: u64,
    pub f_tr: f64,
    #[serde(rename = "I_tr")]
    pub i_tr: f64,
}

pub fn transfer(args: TransferArgs) -> Result<(), CliError> {
    let n = args.n.unwrap_or(6);
    check_size(n, args.large)?;
    let engine = args.engine.unwrap_or(TransferEngine::Exact);
    let grid = time_grid(args.t_max.unwrap_or(TRANSFER_TIME), args.points.unwrap_or(50))?;
    let v = args.v.unwrap_or(0.0);
    let seed = args.seed.unwrap_or(0);
    let steps = match (engine, args.steps) {
        (TransferEngine::Exact, _) => None,
        (_, Some(s)) => Some(s),
        (_, None) => Some(calibrate_steps(n, TRANSFER_TIME, CALIBRATION_TARGET)?),
    };
    let config = TransferConfig {
        n,
        t: 0.0,
        n_steps: steps.unwrap_or(1),
        engine,
        noise: noise_model(v, args.perturb_fields)?,
        seed,
    };
    let rows: Vec<TransferRow> = transfer_fidelity_curve(&config, &grid)?
        .into_iter()
        .map(|r| TransferRow {
            n,
            t: r.config.t,
            steps,
            engine,
            v,
            seed: r.config.seed,
            f_tr: r.fidelity,
            i_tr: r.infidelity,
        })
        .collect();
    write_csv(args.out.as_deref(), &rows)?;
    if let Some(path) = &args.plot {
        plot::transfer_curve(path, &rows)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct TrialRow {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub t: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub v: f64,
    pub trial: u64,
    pub seed: u64,
    pub infidelity: f64,
}

#[derive(Debug, Serialize)]
pub struct StatsRow {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub t: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub v: f64,
    pub trials: usize,
    pub mean_infidelity: f64,
    pub std_infidelity: f64,
}

#[derive(Debug, Serialize)]
pub struct FitRow {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub r_squared: Option<f64>,
    pub points: usize,
}

pub fn robustness(args: RobustnessArgs) -> Result<(), CliError> {
    let protocol = args.protocol.unwrap_or(ProtocolKind::Echo);
    let n_values = match (&args.n_range, args.n) {
        (Some(range), _) => parse_range(range)?,
        (None, Some(n)) => vec![n],
        (None, None) => vec![10],
    };
    for &n in &n_values {
        check_size(n, args.large)?;
    }
    let trials = args.trials.unwrap_or(100);
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let v_grid = log_grid(
        args.v_min.unwrap_or(1e-3),
        args.v_max.unwrap_or(1e-1),
        args.v_points.unwrap_or(8),
    )?;
    let seed = args.seed.unwrap_or(0);
    let t = args.t.unwrap_or(FRAC_PI_2);
    let noise = noise_model(0.0, args.perturb_fields)?;

    // Resolve step counts up front so a bad length fails before any trials run.
    let steps_for: Vec<(usize, usize)> = n_values
        .iter()
        .map(|&n| {
            let steps = match (protocol, args.steps) {
                (_, Some(s)) => s,
                (ProtocolKind::Echo, None) => DEFAULT_ECHO_STEPS,
                (ProtocolKind::Transfer, None) => calibrate_steps(n, t, CALIBRATION_TARGET)?,
            };
            Ok((n, steps))
        })
        .collect::<Result<_, CliError>>()?;
    let steps_of = |n: usize| steps_for.iter().find(|(m, _)| *m == n).map(|p| p.1).unwrap_or(1);

    let template_for = |n: usize| -> echochain::Result<ProtocolTemplate> {
        let n_steps = steps_of(n);
        Ok(match protocol {
            ProtocolKind::Echo => {
                let config = EchoConfig {
                    noise,
                    ..EchoConfig::noise_free(n, 1.0, t, n_steps)
                };
                config.validate()?;
                ProtocolTemplate::Echo(config)
            }
            ProtocolKind::Transfer => {
                let config = TransferConfig {
                    noise,
                    ..TransferConfig::noise_free(n, t, n_steps, TransferEngine::TrotterSimulatedFm)
                };
                config.validate()?;
                ProtocolTemplate::Transfer(config)
            }
        })
    };
    let points = slope_vs_n(template_for, &n_values, &v_grid, trials, seed)?;

    let out_dir = args.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let mut trial_rows = Vec::new();
    let mut stats_rows = Vec::new();
    for point in &points {
        let steps = steps_of(point.n);
        for set in &point.sweep {
            stats_rows.push(StatsRow {
                protocol,
                n: point.n,
                t,
                steps,
                v: set.stats.v,
                trials: set.stats.trials,
                mean_infidelity: set.stats.mean_infidelity,
                std_infidelity: set.stats.std_infidelity,
            });
            trial_rows.extend(set.records.iter().map(|r| TrialRow {
                protocol,
                n: point.n,
                t,
                steps,
                v: set.stats.v,
                trial: r.trial,
                seed: r.seed,
                infidelity: r.infidelity,
            }));
        }
    }
    let fit_rows: Vec<FitRow> = points.iter().map(|p| fit_row(protocol, p)).collect();
    write_csv(Some(&out_dir.join("trials.csv")), &trial_rows)?;
    write_csv(Some(&out_dir.join("stats.csv")), &stats_rows)?;
    write_csv(Some(&out_dir.join("fits.csv")), &fit_rows)?;
    report_fits(protocol, &points);

    if args.plot {
        plot::loglog(&out_dir.join("loglog.svg"), &stats_rows, &fit_rows)?;
        plot::slopes(&out_dir.join("slopes.svg"), &fit_rows, protocol == ProtocolKind::Transfer)?;
    }
    Ok(())
}

fn fit_row(protocol: ProtocolKind, point: &SlopePoint) -> FitRow {
    FitRow {
        protocol,
        n: point.n,
        a: point.fit.as_ref().map(|f| f.a),
        b: point.fit.as_ref().map(|f| f.b),
        r_squared: point.fit.as_ref().map(|f| f.r_squared),
        points: point.fit_points().len(),
    }
}

fn report_fits(protocol: ProtocolKind, points: &[SlopePoint]) {
    for p in points {
        match &p.fit {
            Some(f) if f.is_reliable() => {
                eprintln!("{protocol} n={}: b = {:.4} (r^2 = {:.4})", p.n, f.b, f.r_squared)
            }
            Some(f) => eprintln!(
                "{protocol} n={}: b = {:.4} flagged, r^2 = {:.4} < {MIN_R_SQUARED}",
                p.n, f.b, f.r_squared
            ),
            None => eprintln!("{protocol} n={}: too few positive points to fit", p.n),
        }
    }
    if protocol == ProtocolKind::Transfer {
        let (even, odd) = split_by_parity(points);
        let list = |ps: &[&SlopePoint]| {
            ps.iter()
                .filter_map(|p| p.fit.as_ref().map(|f| format!("{}:{:.3}", p.n, f.b)))
                .collect::<Vec<_>>()
                .join(" ")
        };
        eprintln!("even n slopes: {}", list(&even));
        eprintln!("odd n slopes: {}", list(&odd));
    }
}

pub fn oracle_check(args: OracleArgs) -> Result<(), CliError> {
    let defaults = OracleConfig::default();
    let config = OracleConfig {
        max_n: args.max_n.unwrap_or(defaults.max_n),
        trotter_steps: args.trotter_steps.clone().unwrap_or(defaults.trotter_steps),
        equivalence_cases: args.cases.unwrap_or(defaults.equivalence_cases),
        seed: args.seed.unwrap_or(defaults.seed),
        fault: args.inject_fault,
    };
    let report = run_oracle_checks(&config)?;
    let json = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    for check in &report.checks {
        eprintln!(
            "{} {}: max error {:.3e} (tolerance {:.1e})",
            if check.passed { "pass" } else { "FAIL" },
            check.name,
            check.max_error,
            check.tolerance
        );
    }
    if report.passed {
        Ok(())
    } else {
        let names: Vec<&str> = report.failed_checks().map(|c| c.name.as_str()).collect();
        Err(CliError::Runtime(anyhow::anyhow!("failed checks: {}", names.join(", "))))
    }
}
