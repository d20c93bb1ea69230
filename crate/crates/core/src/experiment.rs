//! Seeded shot campaigns.
//!
//! Every shot draws from its own ChaCha stream keyed by the campaign seed and
//! addressed by `(wait_index, slot, shot_index)`, so records do not depend on
//! evaluation order, thread count or sharding.

use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::protocols::{
    distribution_from, first_pulse_distribution_from, first_pulse_shot_from, ramsey_shot_from,
    OutcomeDistribution, RamseyConfig, ShotOutcome,
};
use crate::qubit::{pure_state, Branch, CoherenceModel, DecayShape};

/// Preparation, readout and T₁ imperfections applied on top of the ideal
/// protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImperfectionModel {
    /// Probability of starting in `|↓⟩` instead of `|↑⟩`.
    pub prep_error: f64,
    /// Probability of swapping the reported D1/D2 label.
    pub readout_error: f64,
    pub t1_us: f64,
}

impl Default for ImperfectionModel {
    fn default() -> Self {
        Self {
            prep_error: 0.01,
            readout_error: 0.01,
            t1_us: f64::INFINITY,
        }
    }
}

impl ImperfectionModel {
    pub fn ideal() -> Self {
        Self {
            prep_error: 0.0,
            readout_error: 0.0,
            t1_us: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("prep_error", self.prep_error),
            ("readout_error", self.readout_error),
        ] {
            if !(0.0..0.5).contains(&p) {
                return Err(Error::param(name, format!("must lie in [0, 0.5), got {p}")));
            }
        }
        crate::qubit::check_t1(self.t1_us)
    }
}

/// Which sequence a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolId {
    /// π/2 Leggett-Garg sequence with constant `Q(t₂) = +1`.
    LeggettGarg,
    /// π/3 sequence read out right after the first pulse.
    DichQ2Q1,
    /// π/3 sequence without the intermediate measurement.
    DichQ3Q1,
    /// π/3 sequence with the negative measurement at `t₂`.
    DichQ3Q2,
}

impl ProtocolId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolId::LeggettGarg => "lg",
            ProtocolId::DichQ2Q1 => "dich-q2q1",
            ProtocolId::DichQ3Q1 => "dich-q3q1",
            ProtocolId::DichQ3Q2 => "dich-q3q2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lg" => Some(ProtocolId::LeggettGarg),
            "dich-q2q1" => Some(ProtocolId::DichQ2Q1),
            "dich-q3q1" => Some(ProtocolId::DichQ3Q1),
            "dich-q3q2" => Some(ProtocolId::DichQ3Q2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    WithoutQ2,
    InterceptUp,
    InterceptDown,
}

impl Arm {
    pub fn intercept(self) -> Option<Branch> {
        match self {
            Arm::WithoutQ2 => None,
            Arm::InterceptUp => Some(Branch::Up),
            Arm::InterceptDown => Some(Branch::Down),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::WithoutQ2 => "without_q2",
            Arm::InterceptUp => "intercept_up",
            Arm::InterceptDown => "intercept_down",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "without_q2" => Some(Arm::WithoutQ2),
            "intercept_up" => Some(Arm::InterceptUp),
            "intercept_down" => Some(Arm::InterceptDown),
            _ => None,
        }
    }
}

/// A `(protocol, arm)` combination that a campaign samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArmSlot {
    pub protocol: ProtocolId,
    pub arm: Arm,
}

impl ArmSlot {
    pub const fn new(protocol: ProtocolId, arm: Arm) -> Self {
        Self { protocol, arm }
    }

    /// Dense index used for seed derivation.
    pub fn index(self) -> Result<u64> {
        use Arm::*;
        use ProtocolId::*;
        let idx = match (self.protocol, self.arm) {
            (LeggettGarg, WithoutQ2) => 0,
            (LeggettGarg, InterceptUp) => 1,
            (LeggettGarg, InterceptDown) => 2,
            (DichQ2Q1, WithoutQ2) => 3,
            (DichQ3Q1, WithoutQ2) => 4,
            (DichQ3Q2, InterceptUp) => 5,
            (DichQ3Q2, InterceptDown) => 6,
            _ => {
                return Err(Error::param(
                    "arm",
                    format!(
                        "{} has no arm {}",
                        self.protocol.as_str(),
                        self.arm.as_str()
                    ),
                ))
            }
        };
        Ok(idx)
    }
}

impl fmt::Display for ArmSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.protocol.as_str(), self.arm.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CampaignKind {
    #[default]
    LeggettGarg,
    Dichotomic,
}

impl CampaignKind {
    pub fn slots(self) -> &'static [ArmSlot] {
        const LG: [ArmSlot; 3] = [
            ArmSlot::new(ProtocolId::LeggettGarg, Arm::WithoutQ2),
            ArmSlot::new(ProtocolId::LeggettGarg, Arm::InterceptUp),
            ArmSlot::new(ProtocolId::LeggettGarg, Arm::InterceptDown),
        ];
        const DICH: [ArmSlot; 4] = [
            ArmSlot::new(ProtocolId::DichQ2Q1, Arm::WithoutQ2),
            ArmSlot::new(ProtocolId::DichQ3Q1, Arm::WithoutQ2),
            ArmSlot::new(ProtocolId::DichQ3Q2, Arm::InterceptUp),
            ArmSlot::new(ProtocolId::DichQ3Q2, Arm::InterceptDown),
        ];
        match self {
            CampaignKind::LeggettGarg => &LG,
            CampaignKind::Dichotomic => &DICH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotRecord {
    pub protocol: ProtocolId,
    pub arm: Arm,
    pub wait_us: f64,
    pub outcome: ShotOutcome,
    pub shot_index: u64,
}

impl ShotRecord {
    pub fn slot(&self) -> ArmSlot {
        ArmSlot::new(self.protocol, self.arm)
    }
}

/// Default number of shots per arm and wait time.
pub const DEFAULT_SHOTS_PER_ARM: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub kind: CampaignKind,
    /// Template sequence; `wait_us`, `intercept` and `t1_us` are set per shot.
    pub ramsey: RamseyConfig,
    pub imperfections: ImperfectionModel,
    pub shots_per_arm: u64,
    pub seed: u64,
    pub wait_grid: Vec<f64>,
}

const WAIT_BITS: u32 = 20;
const SLOT_BITS: u32 = 4;
const SHOT_BITS: u32 = 40;

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots_per_arm == 0 {
            return Err(Error::param("shots_per_arm", "must be >= 1"));
        }
        if self.shots_per_arm > 1 << SHOT_BITS {
            return Err(Error::param(
                "shots_per_arm",
                format!("must be <= 2^{SHOT_BITS}"),
            ));
        }
        if self.wait_grid.is_empty() {
            return Err(Error::param("wait_grid", "must not be empty"));
        }
        if self.wait_grid.len() > 1 << WAIT_BITS {
            return Err(Error::param(
                "wait_grid",
                format!("at most 2^{WAIT_BITS} entries"),
            ));
        }
        for w in &self.wait_grid {
            if w.is_nan() || *w < 0.0 {
                return Err(Error::param(
                    "wait_grid",
                    format!("entries must be >= 0, got {w}"),
                ));
            }
        }
        if self.wait_grid.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::param("wait_grid", "must be strictly increasing"));
        }
        self.imperfections.validate()?;
        for (i, _) in self.wait_grid.iter().enumerate() {
            for slot in self.kind.slots() {
                self.shot_config(i, *slot).validate()?;
            }
        }
        if self.kind == CampaignKind::Dichotomic
            && (self.ramsey.pulse_theta - std::f64::consts::FRAC_PI_3).abs() > 1e-12
        {
            return Err(Error::param(
                "pulse_theta",
                "dichotomic campaigns need pi/3 pulses",
            ));
        }
        Ok(())
    }

    /// Sequence used for one slot at one wait time.
    pub fn shot_config(&self, wait_index: usize, slot: ArmSlot) -> RamseyConfig {
        RamseyConfig {
            wait_us: self.wait_grid[wait_index],
            t1_us: self.imperfections.t1_us,
            intercept: slot.arm.intercept(),
            ..self.ramsey
        }
    }

    pub fn total_records(&self) -> u64 {
        self.wait_grid.len() as u64 * self.kind.slots().len() as u64 * self.shots_per_arm
    }
}

/// Key and stream number of one shot's ChaCha generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed {
    pub key: u64,
    pub stream: u64,
}

impl StreamSeed {
    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(self.stream);
        rng
    }
}

/// Packs `(wait_index, slot, shot_index)` into the 64-bit ChaCha stream id.
/// The packing is injective for `wait_index < 2^20` and `shot_index < 2^40`.
pub fn derive_arm_seed(
    seed: u64,
    wait_index: usize,
    slot: ArmSlot,
    shot_index: u64,
) -> Result<StreamSeed> {
    let wait_index = wait_index as u64;
    if wait_index >= 1 << WAIT_BITS {
        return Err(Error::param(
            "wait_index",
            format!("must be < 2^{WAIT_BITS}"),
        ));
    }
    if shot_index >= 1 << SHOT_BITS {
        return Err(Error::param(
            "shot_index",
            format!("must be < 2^{SHOT_BITS}"),
        ));
    }
    let stream =
        (wait_index << (SLOT_BITS + SHOT_BITS)) | (slot.index()? << SHOT_BITS) | shot_index;
    Ok(StreamSeed { key: seed, stream })
}

/// Independent stream for auxiliary purposes (resampling), outside the range
/// used by shot streams.
pub fn derive_aux_seed(seed: u64, purpose: u64, index: u64) -> StreamSeed {
    // slot indices 7..15 are never used by shots
    let tag = 8 + (purpose & 0x7);
    StreamSeed {
        key: seed,
        stream: ((purpose >> 3) << (SLOT_BITS + SHOT_BITS))
            | (tag << SHOT_BITS)
            | (index & ((1 << SHOT_BITS) - 1)),
    }
}

/// SplitMix64 mix of a base seed with an index, for per-point seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn flip(outcome: ShotOutcome) -> ShotOutcome {
    match outcome {
        ShotOutcome::D1 => ShotOutcome::D2,
        ShotOutcome::D2 => ShotOutcome::D1,
        ShotOutcome::Removed => ShotOutcome::Removed,
    }
}

/// Samples one record. Variates are drawn in a fixed order: preparation,
/// protocol, readout.
pub fn sample_shot(
    config: &CampaignConfig,
    wait_index: usize,
    slot: ArmSlot,
    shot_index: u64,
) -> Result<ShotRecord> {
    let mut rng = derive_arm_seed(config.seed, wait_index, slot, shot_index)?.rng();
    let imp = &config.imperfections;
    let initial = if rng.random::<f64>() < imp.prep_error {
        pure_state(Branch::Down)
    } else {
        pure_state(Branch::Up)
    };
    let seq = config.shot_config(wait_index, slot);
    let raw = match slot.protocol {
        ProtocolId::DichQ2Q1 => first_pulse_shot_from(&seq, &initial, &mut rng),
        _ => ramsey_shot_from(&seq, &initial, &mut rng),
    };
    let outcome = if rng.random::<f64>() < imp.readout_error {
        flip(raw)
    } else {
        raw
    };
    Ok(ShotRecord {
        protocol: slot.protocol,
        arm: slot.arm,
        wait_us: seq.wait_us,
        outcome,
        shot_index,
    })
}

fn locate(config: &CampaignConfig, flat: u64) -> (usize, ArmSlot, u64) {
    let slots = config.kind.slots();
    let per_wait = slots.len() as u64 * config.shots_per_arm;
    let wait_index = (flat / per_wait) as usize;
    let rem = flat % per_wait;
    (
        wait_index,
        slots[(rem / config.shots_per_arm) as usize],
        rem % config.shots_per_arm,
    )
}

/// All records of a campaign, ordered by wait time, slot and shot index.
pub fn sample_campaign(config: &CampaignConfig) -> Result<Vec<ShotRecord>> {
    config.validate()?;
    (0..config.total_records())
        .into_par_iter()
        .map(|flat| {
            let (w, slot, shot) = locate(config, flat);
            sample_shot(config, w, slot, shot)
        })
        .collect()
}

/// Same as [`sample_campaign`], computed as `shards` interleaved pieces that
/// are sampled independently and merged by index.
pub fn sample_campaign_sharded(config: &CampaignConfig, shards: usize) -> Result<Vec<ShotRecord>> {
    config.validate()?;
    if shards == 0 {
        return Err(Error::param("shards", "must be >= 1"));
    }
    let total = config.total_records();
    let pieces: Vec<Vec<(u64, ShotRecord)>> = (0..shards as u64)
        .into_par_iter()
        .map(|shard| {
            let indices: Vec<u64> = (shard..total).step_by(shards).collect();
            // walk each shard backwards to exercise order independence
            indices
                .into_iter()
                .rev()
                .map(|flat| {
                    let (w, slot, shot) = locate(config, flat);
                    sample_shot(config, w, slot, shot).map(|r| (flat, r))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut merged: Vec<(u64, ShotRecord)> = pieces.into_iter().flatten().collect();
    merged.sort_unstable_by_key(|(flat, _)| *flat);
    Ok(merged.into_iter().map(|(_, r)| r).collect())
}

/// Exact outcome distribution of one slot including every imperfection.
pub fn exact_slot_distribution(
    config: &CampaignConfig,
    wait_index: usize,
    slot: ArmSlot,
) -> Result<OutcomeDistribution> {
    config.validate()?;
    let seq = config.shot_config(wait_index, slot);
    let from = |branch| match slot.protocol {
        ProtocolId::DichQ2Q1 => first_pulse_distribution_from(&seq, &pure_state(branch)),
        _ => distribution_from(&seq, &pure_state(branch)),
    };
    let imp = &config.imperfections;
    let prepared = from(Branch::Up).mix(&from(Branch::Down), 1.0 - imp.prep_error);
    let e = imp.readout_error;
    Ok(OutcomeDistribution {
        p_d1: (1.0 - e) * prepared.p_d1 + e * prepared.p_d2,
        p_d2: (1.0 - e) * prepared.p_d2 + e * prepared.p_d1,
        p_removed: prepared.p_removed,
    })
}

/// `K(t) = 1 + c(t)` at the two ends of a coherence-time interval.
pub fn theory_band(
    wait_grid: &[f64],
    tau_low_us: f64,
    tau_high_us: f64,
    shape: DecayShape,
) -> Result<Vec<(f64, f64)>> {
    let low = CoherenceModel::new(shape, tau_low_us)?;
    let high = CoherenceModel::new(shape, tau_high_us)?;
    if !(tau_low_us < tau_high_us) {
        return Err(Error::param(
            "tau_low_us",
            "must be smaller than tau_high_us",
        ));
    }
    wait_grid
        .iter()
        .map(|&w| {
            crate::qubit::check_wait(w)?;
            Ok((1.0 + low.factor(w), 1.0 + high.factor(w)))
        })
        .collect()
}

pub const RECORD_HEADER: &str = "protocol_id,arm,wait_us,outcome,shot_index";

/// Writes records as comma-separated lines under [`RECORD_HEADER`]. Wait
/// times use the shortest representation that parses back to the same `f64`.
pub fn write_records<W: Write>(mut out: W, records: &[ShotRecord]) -> std::io::Result<()> {
    writeln!(out, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{:?},{},{}",
            r.protocol.as_str(),
            r.arm.as_str(),
            r.wait_us,
            r.outcome.as_str(),
            r.shot_index
        )?;
    }
    out.flush()
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] Error),
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<ShotRecord>, ReadError> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?;
    match header {
        Some(h) if h.trim_end() == RECORD_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header `{RECORD_HEADER}`"),
            }
            .into())
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line).map_err(|reason| Error::Parse {
            line: i + 2,
            reason,
        })?);
    }
    Ok(records)
}

fn parse_record(line: &str) -> Result<ShotRecord, String> {
    let fields: Vec<&str> = line.trim_end().split(',').collect();
    let [protocol, arm, wait, outcome, shot] = fields[..] else {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    };
    let protocol =
        ProtocolId::parse(protocol).ok_or_else(|| format!("unknown protocol `{protocol}`"))?;
    let arm = Arm::parse(arm).ok_or_else(|| format!("unknown arm `{arm}`"))?;
    let wait_us: f64 = wait.parse().map_err(|_| format!("bad wait_us `{wait}`"))?;
    let outcome =
        ShotOutcome::parse(outcome).ok_or_else(|| format!("unknown outcome `{outcome}`"))?;
    let shot_index = shot
        .parse()
        .map_err(|_| format!("bad shot_index `{shot}`"))?;
    let record = ShotRecord {
        protocol,
        arm,
        wait_us,
        outcome,
        shot_index,
    };
    record.slot().index().map_err(|e| e.to_string())?;
    if arm == Arm::WithoutQ2 && outcome == ShotOutcome::Removed {
        return Err("Removed outcome in an arm without interception".into());
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;
    use std::f64::consts::FRAC_PI_2;

    use proptest::prelude::*;

    use super::*;

    fn lg_config(shots: u64, waits: Vec<f64>, imp: ImperfectionModel) -> CampaignConfig {
        CampaignConfig {
            kind: CampaignKind::LeggettGarg,
            ramsey: RamseyConfig::half_pi(0.0, CoherenceModel::exponential(130.0).unwrap()),
            imperfections: imp,
            shots_per_arm: shots,
            seed: 2024,
            wait_grid: waits,
        }
    }

    #[test]
    fn record_count() {
        let cfg = lg_config(2000, vec![5.0], ImperfectionModel::default());
        assert_eq!(sample_campaign(&cfg).unwrap().len(), 6000);
    }

    #[test]
    fn ideal_without_q2_all_d2() {
        let cfg = lg_config(2000, vec![0.0], ImperfectionModel::ideal());
        let recs = sample_campaign(&cfg).unwrap();
        assert!(recs
            .iter()
            .filter(|r| r.arm == Arm::WithoutQ2)
            .all(|r| r.outcome == ShotOutcome::D2));
    }

    #[test]
    fn intercept_up_removes_half() {
        let cfg = lg_config(2000, vec![0.0], ImperfectionModel::ideal());
        let recs = sample_campaign(&cfg).unwrap();
        let up: Vec<_> = recs.iter().filter(|r| r.arm == Arm::InterceptUp).collect();
        let removed = up
            .iter()
            .filter(|r| r.outcome == ShotOutcome::Removed)
            .count();
        assert!((removed as f64 / 2000.0 - 0.5).abs() < 5.0 / 2000f64.sqrt());
    }

    #[test]
    fn never_removed_without_interception() {
        let cfg = lg_config(
            3000,
            vec![0.0, 100.0],
            ImperfectionModel {
                t1_us: 200.0,
                ..Default::default()
            },
        );
        for r in sample_campaign(&cfg).unwrap() {
            if r.arm == Arm::WithoutQ2 {
                assert_ne!(r.outcome, ShotOutcome::Removed);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = lg_config(0, vec![0.0], ImperfectionModel::ideal());
        assert!(sample_campaign(&cfg).is_err());
        cfg.shots_per_arm = 10;
        cfg.wait_grid = vec![];
        assert!(sample_campaign(&cfg).is_err());
        cfg.wait_grid = vec![5.0, 5.0];
        assert!(sample_campaign(&cfg).is_err());
        cfg.wait_grid = vec![-1.0];
        assert!(sample_campaign(&cfg).is_err());
        cfg.wait_grid = vec![1.0];
        cfg.imperfections.readout_error = 0.5;
        assert!(sample_campaign(&cfg).is_err());
        cfg.imperfections = ImperfectionModel::ideal();
        cfg.kind = CampaignKind::Dichotomic;
        assert!(sample_campaign(&cfg).is_err());
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let slot = CampaignKind::LeggettGarg.slots()[1];
        assert_eq!(
            derive_arm_seed(9, 3, slot, 77).unwrap(),
            derive_arm_seed(9, 3, slot, 77).unwrap()
        );
        let mut seen = HashSet::new();
        for w in 0..4 {
            for s in CampaignKind::LeggettGarg
                .slots()
                .iter()
                .chain(CampaignKind::Dichotomic.slots())
            {
                for shot in 0..35_715u64 {
                    assert!(seen.insert(derive_arm_seed(1, w, *s, shot).unwrap()));
                }
            }
        }
        assert!(seen.len() >= 1_000_000);
        assert!(derive_arm_seed(1, 1 << 20, slot, 0).is_err());
        assert!(derive_arm_seed(1, 0, slot, 1 << 40).is_err());
        assert!(ArmSlot::new(ProtocolId::DichQ2Q1, Arm::InterceptUp)
            .index()
            .is_err());
    }

    #[test]
    fn aux_streams_never_collide_with_shots() {
        let shot_tags: HashSet<u64> = CampaignKind::LeggettGarg
            .slots()
            .iter()
            .chain(CampaignKind::Dichotomic.slots())
            .map(|s| s.index().unwrap())
            .collect();
        for purpose in 0..64 {
            let tag = (derive_aux_seed(0, purpose, 5).stream >> SHOT_BITS) & 0xF;
            assert!(!shot_tags.contains(&tag));
        }
    }

    #[test]
    fn sharding_does_not_change_records() {
        let cfg = lg_config(500, vec![0.0, 40.0, 300.0], ImperfectionModel::default());
        let serial = sample_campaign(&cfg).unwrap();
        for shards in [1, 3, 8] {
            assert_eq!(sample_campaign_sharded(&cfg, shards).unwrap(), serial);
        }
    }

    #[test]
    fn readout_error_linear_response() {
        // exact mixture vs first-order formula p -> p(1-2e) + e
        for e in [0.001, 0.005, 0.01] {
            let ideal = lg_config(1, vec![60.0], ImperfectionModel::ideal());
            let noisy = lg_config(
                1,
                vec![60.0],
                ImperfectionModel {
                    readout_error: e,
                    ..ImperfectionModel::ideal()
                },
            );
            let slot = CampaignKind::LeggettGarg.slots()[0];
            let p = exact_slot_distribution(&ideal, 0, slot).unwrap().p_d1;
            let q = exact_slot_distribution(&noisy, 0, slot).unwrap().p_d1;
            assert!((q - (p * (1.0 - 2.0 * e) + e)).abs() < 1e-3);
        }
    }

    #[test]
    fn marginals_match_exact_distribution() {
        let cfg = lg_config(
            20_000,
            vec![80.0],
            ImperfectionModel {
                t1_us: 500.0,
                ..Default::default()
            },
        );
        let recs = sample_campaign(&cfg).unwrap();
        for slot in cfg.kind.slots() {
            let d = exact_slot_distribution(&cfg, 0, *slot).unwrap();
            let arm: Vec<_> = recs.iter().filter(|r| r.slot() == *slot).collect();
            let n = arm.len() as f64;
            for o in [ShotOutcome::D1, ShotOutcome::D2, ShotOutcome::Removed] {
                let p = d.probability(o);
                let freq = arm.iter().filter(|r| r.outcome == o).count() as f64 / n;
                let se = (p * (1.0 - p) / n).sqrt();
                assert!(
                    (freq - p).abs() <= 5.0 * se + 1e-12,
                    "{slot} {o:?}: {freq} vs {p}"
                );
            }
        }
    }

    #[test]
    fn theory_band_values() {
        let band = theory_band(
            &[0.0, 100.0, f64::INFINITY],
            100.0,
            200.0,
            DecayShape::Exponential,
        )
        .unwrap();
        assert_eq!(band[0], (2.0, 2.0));
        assert!((band[1].0 - 1.367_879_441_171_442_3).abs() < 1e-15);
        assert_eq!(band[2], (1.0, 1.0));
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 20.0).collect();
        let band = theory_band(&grid, 75.0, 200.0, DecayShape::Gaussian).unwrap();
        for pair in band.windows(2) {
            assert!(pair[1].0 <= pair[0].0 && pair[1].1 <= pair[0].1);
        }
        assert!(theory_band(&grid, 200.0, 75.0, DecayShape::Exponential).is_err());
    }

    #[test]
    fn dataset_rejects_malformed_lines() {
        let bad = format!("{RECORD_HEADER}\nlg,without_q2,5.0,Removed,0\n");
        assert!(read_records(bad.as_bytes()).is_err());
        let bad = format!("{RECORD_HEADER}\nlg,sideways,5.0,D1,0\n");
        assert!(read_records(bad.as_bytes()).is_err());
        assert!(read_records("nope\n".as_bytes()).is_err());
    }

    fn arb_record() -> impl Strategy<Value = ShotRecord> {
        let slots: Vec<ArmSlot> = CampaignKind::LeggettGarg
            .slots()
            .iter()
            .chain(CampaignKind::Dichotomic.slots())
            .copied()
            .collect();
        (
            proptest::sample::select(slots),
            0usize..3,
            any::<f64>(),
            any::<u64>(),
        )
            .prop_map(|(slot, o, w, shot)| {
                let mut outcome = [ShotOutcome::D1, ShotOutcome::D2, ShotOutcome::Removed][o];
                if slot.arm == Arm::WithoutQ2 {
                    outcome = ShotOutcome::D1;
                }
                ShotRecord {
                    protocol: slot.protocol,
                    arm: slot.arm,
                    wait_us: if w.is_nan() { 0.0 } else { w.abs() },
                    outcome,
                    shot_index: shot,
                }
            })
    }

    proptest! {
        #[test]
        fn dataset_round_trip(records in proptest::collection::vec(arb_record(), 0..50)) {
            let mut buf = Vec::new();
            write_records(&mut buf, &records).unwrap();
            let back = read_records(buf.as_slice()).unwrap();
            prop_assert_eq!(back, records);
        }
    }

    #[test]
    fn half_pi_template_is_used() {
        let cfg = lg_config(1, vec![7.0], ImperfectionModel::default());
        let seq = cfg.shot_config(0, CampaignKind::LeggettGarg.slots()[2]);
        assert_eq!(seq.pulse_theta, FRAC_PI_2);
        assert_eq!(seq.wait_us, 7.0);
        assert_eq!(seq.intercept, Some(Branch::Down));
    }
}
