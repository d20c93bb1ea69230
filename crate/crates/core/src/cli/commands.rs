use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::estimators::{
    analyze_dichotomic_point, analyze_lg_point, position_distribution_sigmas, ArmCounts,
};
use crate::experiment::{
    mix_seed, read_records, sample_campaign, theory_band, write_records, ArmSlot, CampaignConfig,
    CampaignKind, ReadError, ShotRecord,
};
use crate::metrics::{finite_round_power, repeated_trial_power, single_trial_figures};
use crate::protocols::{
    calibrate_phase, run_mz_bomb_test, run_repeated_bomb_test, run_zeno_shot,
    zeno_success_probability, BombTestConfig, MzOutcome, RamseyConfig, RepeatedOutcome,
};

use super::config::RunConfig;
use super::format::{opt_sig9, sig9};
use super::{BombArgs, CliError, RunArgs, VerifyArgs};

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

pub const LG_SUMMARY_HEADER: &str =
    "wait_us,K,sigma_bootstrap,sigma_mc,C,W,significance,K_theory_low,K_theory_high";
pub const DICHOTOMIC_SUMMARY_HEADER: &str =
    "wait_us,q2q1,q2q1_sigma,q3q2,q3q2_sigma,q3q1,q3q1_sigma,K,sigma_bootstrap,sigma_mc,significance";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    LgSweep,
    Dichotomic,
}

impl RunKind {
    fn campaign_kind(self) -> CampaignKind {
        match self {
            RunKind::LgSweep => CampaignKind::LeggettGarg,
            RunKind::Dichotomic => CampaignKind::Dichotomic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmEntry {
    pub slot: String,
    pub d1: u64,
    pub d2: u64,
    pub removed: u64,
    /// Clopper-Pearson 1σ errors of the D1, D2 and Removed fractions.
    pub fraction_sigmas: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub wait_us: f64,
    pub k: f64,
    pub sigma_bootstrap: f64,
    pub sigma_mc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast_clamped: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_theory_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_theory_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlators: Option<[f64; 3]>,
    pub arms: Vec<ArmEntry>,
}

/// Everything needed to reproduce a run, plus its per-wait results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: RunKind,
    pub seed: u64,
    /// Second-pulse phase actually used, after optional calibration.
    pub pulse_phi: f64,
    pub records: u64,
    pub config: RunConfig,
    pub points: Vec<PointEntry>,
}

fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    RunConfig::parse(&text)
}

fn campaign_config(kind: RunKind, cfg: &RunConfig) -> Result<CampaignConfig, CliError> {
    let coherence = cfg.coherence;
    let template = match kind {
        RunKind::LgSweep => RamseyConfig::half_pi(0.0, coherence),
        RunKind::Dichotomic => RamseyConfig::third_pi(0.0, coherence),
    };
    let mut ramsey = RamseyConfig {
        pulse_phi: cfg.pulses.pulse_phi,
        phase_offset: cfg.pulses.phase_offset,
        t1_us: cfg.imperfections.t1_us,
        wait_us: cfg.wait_grid_us[0],
        ..template
    };
    if cfg.pulses.calibrate {
        ramsey.pulse_phi = calibrate_phase(&ramsey).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let campaign = CampaignConfig {
        kind: kind.campaign_kind(),
        ramsey,
        imperfections: cfg.imperfection_model(),
        shots_per_arm: cfg.shots_per_arm,
        seed: cfg.seed,
        wait_grid: cfg.wait_grid_us.clone(),
    };
    campaign
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(campaign)
}

fn arm_entries(counts: &[(ArmSlot, ArmCounts)]) -> Result<Vec<ArmEntry>, CliError> {
    counts
        .iter()
        .map(|(slot, c)| {
            Ok(ArmEntry {
                slot: slot.to_string(),
                d1: c.d1,
                d2: c.d2,
                removed: c.removed,
                fraction_sigmas: position_distribution_sigmas(c)
                    .map_err(|e| CliError::Invariant(e.to_string()))?,
            })
        })
        .collect()
}

/// Summary table and manifest recomputed from raw records. Shared by the run
/// commands and `verify`, so both produce byte-identical text.
pub fn analyze_run(
    kind: RunKind,
    cfg: &RunConfig,
    pulse_phi: f64,
    records: &[ShotRecord],
) -> Result<(String, RunManifest), CliError> {
    let slots = kind.campaign_kind().slots();
    let expected = cfg.shots_per_arm * slots.len() as u64;
    let band = theory_band(
        &cfg.wait_grid_us,
        cfg.theory_band.tau_low_us,
        cfg.theory_band.tau_high_us,
        cfg.coherence.shape,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let mut summary = String::new();
    summary.push_str(match kind {
        RunKind::LgSweep => LG_SUMMARY_HEADER,
        RunKind::Dichotomic => DICHOTOMIC_SUMMARY_HEADER,
    });
    summary.push('\n');
    let mut points = Vec::new();
    for (i, &wait) in cfg.wait_grid_us.iter().enumerate() {
        let group: Vec<&ShotRecord> = records
            .iter()
            .filter(|r| r.wait_us.to_bits() == wait.to_bits() && slots.contains(&r.slot()))
            .collect();
        if group.len() as u64 != expected {
            return Err(CliError::Invariant(format!(
                "wait {wait} us: expected {expected} records, found {}",
                group.len()
            )));
        }
        let seed = mix_seed(cfg.seed, i as u64);
        let invariant = |e: crate::Error| CliError::Invariant(format!("wait {wait} us: {e}"));
        match kind {
            RunKind::LgSweep => {
                let p = analyze_lg_point(&group, cfg.resamples, seed).map_err(invariant)?;
                let (lo, hi) = band[i];
                writeln!(
                    summary,
                    "{},{},{},{},{},{},{},{},{}",
                    sig9(wait),
                    sig9(p.k),
                    sig9(p.sigma_bootstrap),
                    sig9(p.sigma_mc),
                    sig9(p.contrast.estimate.value),
                    sig9(p.witness),
                    opt_sig9(p.significance),
                    sig9(lo),
                    sig9(hi)
                )
                .expect("write to string");
                points.push(PointEntry {
                    wait_us: wait,
                    k: p.k,
                    sigma_bootstrap: p.sigma_bootstrap,
                    sigma_mc: p.sigma_mc,
                    significance: p.significance,
                    contrast: Some(p.contrast.estimate.value),
                    contrast_clamped: Some(p.contrast.clamped),
                    witness: Some(p.witness),
                    k_theory_low: Some(lo),
                    k_theory_high: Some(hi),
                    correlators: None,
                    arms: arm_entries(&p.counts)?,
                });
            }
            RunKind::Dichotomic => {
                let p = analyze_dichotomic_point(&group, cfg.resamples, seed).map_err(invariant)?;
                let c = &p.correlators;
                writeln!(
                    summary,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    sig9(wait),
                    sig9(c.q2q1.value),
                    sig9(c.q2q1.sigma),
                    sig9(c.q3q2.value),
                    sig9(c.q3q2.sigma),
                    sig9(c.q3q1.value),
                    sig9(c.q3q1.sigma),
                    sig9(p.k),
                    sig9(p.sigma_bootstrap),
                    sig9(p.sigma_mc),
                    opt_sig9(p.significance)
                )
                .expect("write to string");
                points.push(PointEntry {
                    wait_us: wait,
                    k: p.k,
                    sigma_bootstrap: p.sigma_bootstrap,
                    sigma_mc: p.sigma_mc,
                    significance: p.significance,
                    contrast: None,
                    contrast_clamped: None,
                    witness: None,
                    k_theory_low: None,
                    k_theory_high: None,
                    correlators: Some([c.q2q1.value, c.q3q2.value, c.q3q1.value]),
                    arms: arm_entries(&p.counts)?,
                });
            }
        }
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: kind,
        seed: cfg.seed,
        pulse_phi,
        records: records.len() as u64,
        config: cfg.clone(),
        points,
    };
    Ok((summary, manifest))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn cmd_run(kind: RunKind, args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(shots) = args.shots {
        cfg.shots_per_arm = shots;
    }
    cfg.validate()?;
    let campaign = campaign_config(kind, &cfg)?;
    let records = sample_campaign(&campaign).map_err(|e| CliError::Invariant(e.to_string()))?;
    let (summary, manifest) = analyze_run(kind, &cfg, campaign.ramsey.pulse_phi, &records)?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::io(format!("creating {}", args.out_dir.display()), e))?;
    let records_path = args.out_dir.join(RECORDS_FILE);
    let file = fs::File::create(&records_path)
        .map_err(|e| CliError::io(format!("writing {}", records_path.display()), e))?;
    write_records(BufWriter::new(file), &records)
        .map_err(|e| CliError::io(format!("writing {}", records_path.display()), e))?;
    write_file(&args.out_dir.join(SUMMARY_FILE), &summary)?;
    let manifest_text =
        toml::to_string(&manifest).map_err(|e| CliError::Invariant(e.to_string()))?;
    write_file(&args.out_dir.join(MANIFEST_FILE), &manifest_text)?;
    print!("{summary}");
    Ok(())
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let manifest_path = args.out_dir.join(MANIFEST_FILE);
    let manifest_text = fs::read_to_string(&manifest_path)
        .map_err(|e| CliError::io(format!("reading {}", manifest_path.display()), e))?;
    let manifest: RunManifest = toml::from_str(&manifest_text)
        .map_err(|e| CliError::Config(format!("invalid manifest: {e}")))?;
    manifest.config.validate()?;
    let records_path = args.out_dir.join(RECORDS_FILE);
    let file = fs::File::open(&records_path)
        .map_err(|e| CliError::io(format!("reading {}", records_path.display()), e))?;
    let records = read_records(BufReader::new(file)).map_err(|e| match e {
        ReadError::Io(e) => CliError::io(format!("reading {}", records_path.display()), e),
        ReadError::Format(e) => CliError::Invariant(format!("{}: {e}", records_path.display())),
    })?;
    let summary_path = args.out_dir.join(SUMMARY_FILE);
    let stored = fs::read_to_string(&summary_path)
        .map_err(|e| CliError::io(format!("reading {}", summary_path.display()), e))?;
    let (summary, recomputed) = analyze_run(
        manifest.command,
        &manifest.config,
        manifest.pulse_phi,
        &records,
    )?;
    if summary != stored {
        let row = summary
            .lines()
            .zip(stored.lines())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| summary.lines().count().min(stored.lines().count()));
        return Err(CliError::Invariant(format!(
            "summary row {row} does not match the raw records"
        )));
    }
    if recomputed != manifest {
        return Err(CliError::Invariant(
            "manifest results do not match the raw records".into(),
        ));
    }
    println!(
        "verified {} records, {} summary rows",
        records.len(),
        manifest.points.len()
    );
    Ok(())
}

struct McColumn {
    value: f64,
    stderr: f64,
}

fn frequency(hits: u64, shots: u64) -> McColumn {
    let p = hits as f64 / shots as f64;
    McColumn {
        value: p,
        stderr: (p * (1.0 - p) / shots as f64).sqrt(),
    }
}

fn flag(name: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("flag `--{name}`: {reason}"))
}

pub const BOMBTEST_HEADER: &str = "quantity,closed_form,monte_carlo,mc_stderr";

pub fn cmd_bombtest(args: &BombArgs) -> Result<(), CliError> {
    if !(args.split > 0.0 && args.split < 1.0) {
        return Err(flag("split", "must lie in (0, 1)"));
    }
    if !(0.0..=1.0).contains(&args.contrast) {
        return Err(flag("contrast", "must lie in [0, 1]"));
    }
    if args.rounds == 0 {
        return Err(flag("rounds", "must be >= 1"));
    }
    if args.zeno == 0 {
        return Err(flag("zeno", "must be >= 1"));
    }
    if args.shots == 0 {
        return Err(flag("shots", "must be >= 1"));
    }
    let internal = |e: crate::Error| CliError::Invariant(e.to_string());
    let stream = |id: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        rng.set_stream(id);
        rng
    };
    let live = BombTestConfig {
        bomb_present: true,
        branch_b_probability: args.split,
        contrast: args.contrast,
    };
    let dud = BombTestConfig {
        bomb_present: false,
        ..live
    };
    let closed = single_trial_figures(args.split, args.contrast).map_err(internal)?;

    let mut rng = stream(0);
    let (mut d1, mut exploded) = (0, 0);
    for _ in 0..args.shots {
        match run_mz_bomb_test(&live, &mut rng).map_err(internal)? {
            MzOutcome::D1 => d1 += 1,
            MzOutcome::Exploded => exploded += 1,
            MzOutcome::D2 => {}
        }
    }
    let mut rng = stream(1);
    let mut false_pos = 0;
    for _ in 0..args.shots {
        if run_mz_bomb_test(&dud, &mut rng).map_err(internal)? == MzOutcome::D1 {
            false_pos += 1;
        }
    }
    let mut rng = stream(2);
    let mut rescued = 0;
    for _ in 0..args.shots {
        if run_repeated_bomb_test(&live, args.rounds, &mut rng).map_err(internal)?
            == RepeatedOutcome::Rescued
        {
            rescued += 1;
        }
    }
    let mut rng = stream(3);
    let mut zeno_hits = 0;
    for _ in 0..args.shots {
        if run_zeno_shot(args.zeno, &mut rng).map_err(internal)? {
            zeno_hits += 1;
        }
    }

    let rescue = frequency(rescued, args.shots);
    let rows: Vec<(String, f64, Option<McColumn>)> = vec![
        (
            "power".into(),
            closed.power,
            Some(frequency(d1, args.shots)),
        ),
        (
            "explode".into(),
            closed.explode_prob,
            Some(frequency(exploded, args.shots)),
        ),
        (
            "alpha".into(),
            closed.alpha,
            Some(frequency(false_pos, args.shots)),
        ),
        (
            format!("rescue_{}_rounds", args.rounds),
            finite_round_power(args.split, args.rounds).map_err(internal)?,
            Some(rescue),
        ),
        (
            "rescue_unlimited".into(),
            repeated_trial_power(args.split).map_err(internal)?,
            None,
        ),
        (
            format!("zeno_{}_cycles", args.zeno),
            zeno_success_probability(args.zeno).map_err(internal)?,
            Some(frequency(zeno_hits, args.shots)),
        ),
    ];
    let mut table = format!("{BOMBTEST_HEADER}\n");
    for (name, closed, mc) in rows {
        let (v, se) = mc.map_or((String::new(), String::new()), |m| {
            (sig9(m.value), sig9(m.stderr))
        });
        writeln!(table, "{name},{},{v},{se}", sig9(closed)).expect("write to string");
    }
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        write_file(&dir.join("bombtest.csv"), &table)?;
    }
    print!("{table}");
    Ok(())
}
