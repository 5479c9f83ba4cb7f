//! Multi-RAT selection: per-technology expected cost, argmin selection,
//! fragmentation and the confirmed-delivery ladder.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::duty::DutyCycleLedger;
use crate::model::{PayloadBucket, Scenario, Technology, MAX_PAYLOAD_BYTES};
use crate::models::{ModelError, Models};
use crate::pdr::PdrMode;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("{0} cannot carry {1} bytes")]
    Unsupported(Technology, u32),
    #[error("no data for {0} at {1} bytes")]
    Unavailable(Technology, u32),
    #[error("no technology can deliver a {payload_bytes} byte message under this policy")]
    NoFeasibleTechnology { payload_bytes: u32 },
    #[error("invalid message: {0}")]
    InvalidMessage(&'static str),
    #[error("invalid policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("invalid context: {0}")]
    InvalidContext(&'static str),
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for PolicyError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Unsupported(t, n) => PolicyError::Unsupported(t, n),
            ModelError::Unavailable(t, n, _) => PolicyError::Unavailable(t, n),
            e => PolicyError::Model(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageSpec {
    pub payload_bytes: u32,
    /// Requires confirmed delivery.
    #[serde(default)]
    pub critical: bool,
    #[serde(default)]
    pub deadline_ms: Option<u64>,
}

impl MessageSpec {
    pub fn new(payload_bytes: u32) -> Self {
        MessageSpec { payload_bytes, critical: false, deadline_ms: None }
    }

    pub fn critical(payload_bytes: u32) -> Self {
        MessageSpec { payload_bytes, critical: true, deadline_ms: None }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(1..=MAX_PAYLOAD_BYTES).contains(&self.payload_bytes) {
            return Err(PolicyError::InvalidMessage("payload must be within [1, 1547] bytes"));
        }
        Ok(())
    }
}

/// Duty-cycle ledgers of the license-exempt radios.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DutyLedgers {
    pub lorawan: DutyCycleLedger,
    pub sigfox: DutyCycleLedger,
}

impl DutyLedgers {
    pub fn get(&self, tech: Technology) -> Option<&DutyCycleLedger> {
        match tech {
            Technology::LoRaWAN => Some(&self.lorawan),
            Technology::Sigfox => Some(&self.sigfox),
            Technology::NBIoT => None,
        }
    }

    pub fn get_mut(&mut self, tech: Technology) -> Option<&mut DutyCycleLedger> {
        match tech {
            Technology::LoRaWAN => Some(&mut self.lorawan),
            Technology::Sigfox => Some(&mut self.sigfox),
            Technology::NBIoT => None,
        }
    }
}

fn default_sf() -> u8 {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub scenario: Scenario,
    #[serde(default)]
    pub speed_kmh: f64,
    #[serde(default = "default_sf")]
    pub lorawan_sf: u8,
    #[serde(default)]
    pub nbiot_ce: u8,
    #[serde(default)]
    pub pdr_mode: PdrMode,
    #[serde(default)]
    pub ledgers: DutyLedgers,
}

impl Context {
    pub fn new(scenario: Scenario, speed_kmh: f64) -> Self {
        Context {
            scenario,
            speed_kmh,
            lorawan_sf: 12,
            nbiot_ce: 0,
            pdr_mode: PdrMode::Auto,
            ledgers: DutyLedgers::default(),
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        self.scenario.validate().map_err(|_| PolicyError::InvalidContext("indoor mobile is not a valid scenario"))?;
        if !(self.speed_kmh.is_finite() && self.speed_kmh >= 0.0) {
            return Err(PolicyError::InvalidContext("speed must be a non-negative number"));
        }
        if !(7..=12).contains(&self.lorawan_sf) {
            return Err(PolicyError::InvalidContext("spreading factor must be within [7, 12]"));
        }
        if self.nbiot_ce > 2 {
            return Err(PolicyError::InvalidContext("CE level must be 0, 1 or 2"));
        }
        Ok(())
    }

    /// Model bundle with this context's spreading factor and CE level
    /// applied to the link timing.
    pub fn apply(&self, models: &Models) -> Models {
        let mut m = models.clone();
        m.link.lorawan_sf = self.lorawan_sf;
        m.link.nbiot_ce_level = self.nbiot_ce;
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    MinEnergyPerDeliveredByte,
    MinEnergyPerByte,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rung {
    pub tech: Technology,
    /// Attempts on this rung.
    #[serde(default = "one")]
    pub retries: u32,
    #[serde(default = "yes")]
    pub confirmed: bool,
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

fn all_technologies() -> Vec<Technology> {
    Technology::ALL.to_vec()
}

fn default_max_retries() -> u32 {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub pdr_floor: f64,
    #[serde(default)]
    pub allow_fragmentation: bool,
    /// Technologies the node may use.
    #[serde(default = "all_technologies")]
    pub technologies: Vec<Technology>,
    #[serde(default)]
    pub ladder: Vec<Rung>,
    #[serde(default = "default_max_retries")]
    pub max_ladder_retries_per_rung: u32,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            objective: Objective::default(),
            pdr_floor: 0.0,
            allow_fragmentation: false,
            technologies: all_technologies(),
            ladder: Vec::new(),
            max_ladder_retries_per_rung: default_max_retries(),
        }
    }
}

impl Policy {
    pub fn min_energy_per_byte() -> Self {
        Policy { objective: Objective::MinEnergyPerByte, ..Policy::default() }
    }

    /// Restrict to a single technology.
    pub fn only(tech: Technology) -> Self {
        Policy { technologies: alloc::vec![tech], ..Policy::default() }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(0.0..=1.0).contains(&self.pdr_floor) {
            return Err(PolicyError::InvalidPolicy("pdr_floor must be within [0, 1]"));
        }
        if self.technologies.is_empty() {
            return Err(PolicyError::InvalidPolicy("at least one technology must be allowed"));
        }
        if self.max_ladder_retries_per_rung == 0 || self.ladder.iter().any(|r| r.retries == 0) {
            return Err(PolicyError::InvalidPolicy("ladder rungs need at least one attempt"));
        }
        Ok(())
    }

    pub fn allows(&self, tech: Technology) -> bool {
        self.technologies.contains(&tech)
    }
}

/// Expected per-message figures for one technology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub technology: Technology,
    pub energy_uwh: f64,
    /// Probability that the whole message arrives.
    pub pdr: f64,
    pub uwh_per_byte: f64,
    /// Infinite when `pdr` is 0.
    pub uwh_per_delivered_byte: f64,
    pub fragments: u32,
    /// Set when a model cell had no data and a lower bucket was used.
    pub fallback: Option<PayloadBucket>,
}

impl CostEstimate {
    pub fn objective(&self, objective: Objective) -> f64 {
        match objective {
            Objective::MinEnergyPerByte => self.uwh_per_byte,
            Objective::MinEnergyPerDeliveredByte => self.uwh_per_delivered_byte,
        }
    }
}

/// Fragment payload sizes: all but the last at the technology maximum.
pub fn fragment_sizes(payload_bytes: u32, tech: Technology) -> Vec<u32> {
    let max = tech.max_payload();
    let mut out = Vec::with_capacity(payload_bytes.div_ceil(max) as usize);
    let mut left = payload_bytes;
    while left > 0 {
        let n = left.min(max);
        out.push(n);
        left -= n;
    }
    out
}

/// Energy and delivery probability of one uplink of `n` bytes.
fn single(
    tech: Technology,
    n: u32,
    ctx: &Context,
    models: &Models,
) -> Result<(f64, f64, Option<PayloadBucket>), PolicyError> {
    let e = models.transaction_energy(tech, n, ctx.scenario)?;
    let p = models.delivery_probability(tech, n, ctx.scenario, ctx.speed_kmh, ctx.pdr_mode)?;
    Ok((e.value, p.value, e.fallback.or(p.fallback)))
}

/// Expected energy, delivery probability and cost of sending `msg` over
/// `tech`. With `fragmentation` a payload above the technology maximum is
/// split; the message arrives only if every fragment does.
pub fn expected_cost(
    tech: Technology,
    msg: &MessageSpec,
    ctx: &Context,
    models: &Models,
    fragmentation: bool,
) -> Result<CostEstimate, PolicyError> {
    msg.validate()?;
    let n = msg.payload_bytes;
    if n > tech.max_payload() && !fragmentation {
        return Err(PolicyError::Unsupported(tech, n));
    }
    let sizes = fragment_sizes(n, tech);
    let (mut energy, mut pdr, mut fallback) = (0.0, 1.0, None);
    for &size in &sizes {
        let (e, p, fb) = single(tech, size, ctx, models)?;
        energy += e;
        pdr *= p;
        fallback = fallback.or(fb);
    }
    let uwh_per_byte = energy / n as f64;
    let uwh_per_delivered_byte = if pdr > 0.0 { energy / (pdr * n as f64) } else { f64::INFINITY };
    Ok(CostEstimate {
        technology: tech,
        energy_uwh: energy,
        pdr,
        uwh_per_byte,
        uwh_per_delivered_byte,
        fragments: sizes.len() as u32,
        fallback,
    })
}

/// Every allowed technology's estimate, or the reason it is out.
pub fn candidate_costs(
    policy: &Policy,
    msg: &MessageSpec,
    ctx: &Context,
    models: &Models,
) -> Vec<(Technology, Result<CostEstimate, PolicyError>)> {
    Technology::ALL
        .into_iter()
        .filter(|t| policy.allows(*t))
        .map(|t| (t, expected_cost(t, msg, ctx, models, policy.allow_fragmentation)))
        .collect()
}

/// Cheapest feasible technology under the policy objective. Ties go to the
/// earlier of LoRaWAN, Sigfox, NB-IoT.
pub fn select_rat_with_cost(
    policy: &Policy,
    msg: &MessageSpec,
    ctx: &Context,
    models: &Models,
) -> Result<CostEstimate, PolicyError> {
    policy.validate()?;
    msg.validate()?;
    let mut best: Option<CostEstimate> = None;
    for (_, cost) in candidate_costs(policy, msg, ctx, models) {
        let Ok(c) = cost else { continue };
        if c.pdr < policy.pdr_floor {
            continue;
        }
        let v = c.objective(policy.objective);
        if best.is_none_or(|b| v < b.objective(policy.objective)) {
            best = Some(c);
        }
    }
    best.ok_or(PolicyError::NoFeasibleTechnology { payload_bytes: msg.payload_bytes })
}

pub fn select_rat(
    policy: &Policy,
    msg: &MessageSpec,
    ctx: &Context,
    models: &Models,
) -> Result<Technology, PolicyError> {
    select_rat_with_cost(policy, msg, ctx, models).map(|c| c.technology)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Direct,
    Fragmented,
    Ladder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedTx {
    pub technology: Technology,
    pub payload_bytes: u32,
    pub confirmed: bool,
    /// Attempts budgeted for this step (ladder rungs); 1 otherwise.
    pub attempts: u32,
    /// Earliest start relative to the plan start, including duty-cycle waits.
    pub start_offset_ms: u64,
    pub on_air_ms: f64,
    /// Full transaction length (all radio phases).
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxPlan {
    pub kind: PlanKind,
    pub steps: Vec<PlannedTx>,
    pub expected_energy_uwh: f64,
    pub expected_delivery_probability: f64,
    /// End of the last step when every step runs.
    pub duration_ms: u64,
    /// `Some(false)` when the message deadline is shorter than `duration_ms`.
    pub meets_deadline: Option<bool>,
}

impl TxPlan {
    pub fn total_payload(&self) -> u32 {
        self.steps.iter().map(|s| s.payload_bytes).sum()
    }
}

/// Lays steps out back to back, each waiting for its duty-cycle budget.
/// `ledgers` are advanced as if every step (and every attempt) ran.
fn schedule(steps: &mut [PlannedTx], ledgers: &mut DutyLedgers) -> u64 {
    let mut t = 0u64;
    for s in steps.iter_mut() {
        let mut first = None;
        for _ in 0..s.attempts.max(1) {
            let start = match ledgers.get_mut(s.technology) {
                // Entries are non-overlapping and ordered, so recording at
                // the allowed time cannot fail.
                Some(l) => l.transmit(t, s.on_air_ms).unwrap_or(t),
                None => t,
            };
            first.get_or_insert(start);
            t = start + libm::ceil(s.duration_ms) as u64;
        }
        s.start_offset_ms = first.unwrap_or(t);
    }
    t
}

fn step(tech: Technology, n: u32, confirmed: bool, attempts: u32, models: &Models) -> Result<PlannedTx, PolicyError> {
    let profile = models.transaction(tech, n)?;
    Ok(PlannedTx {
        technology: tech,
        payload_bytes: n,
        confirmed,
        attempts,
        start_offset_ms: 0,
        on_air_ms: profile.total_on_air_ms,
        duration_ms: profile.total_duration_ms(),
    })
}

fn deadline(msg: Option<&MessageSpec>, duration_ms: u64) -> Option<bool> {
    msg.and_then(|m| m.deadline_ms).map(|d| duration_ms <= d)
}

/// Splits `payload_bytes` over `tech` and schedules the fragments from the
/// context's duty ledgers (which are not modified).
pub fn fragmentation_plan(
    payload_bytes: u32,
    tech: Technology,
    ctx: &Context,
    models: &Models,
) -> Result<TxPlan, PolicyError> {
    if payload_bytes == 0 {
        return Err(PolicyError::InvalidMessage("payload must be at least one byte"));
    }
    let models = ctx.apply(models);
    let mut steps = Vec::new();
    let (mut energy, mut pdr) = (0.0, 1.0);
    for n in fragment_sizes(payload_bytes, tech) {
        let (e, p, _) = single(tech, n, ctx, &models)?;
        energy += e;
        pdr *= p;
        steps.push(step(tech, n, false, 1, &models)?);
    }
    let duration_ms = schedule(&mut steps, &mut ctx.ledgers.clone());
    let kind = if steps.len() > 1 { PlanKind::Fragmented } else { PlanKind::Direct };
    Ok(TxPlan {
        kind,
        steps,
        expected_energy_uwh: energy,
        expected_delivery_probability: pdr,
        duration_ms,
        meets_deadline: None,
    })
}

/// Single-technology plan for a non-critical message.
pub fn direct_plan(
    tech: Technology,
    msg: &MessageSpec,
    ctx: &Context,
    models: &Models,
    fragmentation: bool,
) -> Result<TxPlan, PolicyError> {
    if msg.payload_bytes > tech.max_payload() && !fragmentation {
        return Err(PolicyError::Unsupported(tech, msg.payload_bytes));
    }
    let mut plan = fragmentation_plan(msg.payload_bytes, tech, ctx, models)?;
    plan.meets_deadline = deadline(Some(msg), plan.duration_ms);
    Ok(plan)
}

/// One rung as priced by the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RungCost {
    pub rung: Rung,
    pub attempts: u32,
    /// Energy of one attempt, acknowledgement included.
    pub attempt_energy_uwh: f64,
    pub pdr: f64,
}

/// Prices the ladder rungs that can carry the payload. Rungs whose
/// technology cannot carry it, or has no delivery data, are skipped.
pub fn ladder_rungs(
    policy: &Policy,
    msg: &MessageSpec,
    ctx: &Context,
    models: &Models,
) -> Result<Vec<RungCost>, PolicyError> {
    let models = ctx.apply(models);
    let mut out = Vec::new();
    for &rung in &policy.ladder {
        if !policy.allows(rung.tech) {
            continue;
        }
        match single(rung.tech, msg.payload_bytes, ctx, &models) {
            Ok((e, p, _)) => {
                let ack = if rung.confirmed { models.ack.energy_uwh(rung.tech) } else { 0.0 };
                let attempts = rung.retries.min(policy.max_ladder_retries_per_rung);
                out.push(RungCost { rung, attempts, attempt_energy_uwh: e + ack, pdr: p });
            }
            Err(PolicyError::Unsupported(..) | PolicyError::Unavailable(..)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Closed-form expectation over priced rungs: `(energy, delivery)`.
///
/// A confirmed rung stops at the first acknowledged attempt, so given that it
/// is reached it spends `Σ_{k<r} (1-p)^k` attempts and fails with `(1-p)^r`.
/// An unconfirmed rung sends all `r` copies blind; the sender cannot tell
/// whether they arrived, so the ladder ends there.
pub fn ladder_expectation(rungs: &[RungCost]) -> (f64, f64) {
    let (mut reach, mut energy, mut fail) = (1.0, 0.0, 1.0);
    for r in rungs {
        let q = 1.0 - r.pdr;
        if r.rung.confirmed {
            let mut expected_attempts = 0.0;
            let mut qk = 1.0;
            for _ in 0..r.attempts {
                expected_attempts += qk;
                qk *= q;
            }
            energy += reach * r.attempt_energy_uwh * expected_attempts;
            reach *= qk;
            fail *= qk;
        } else {
            energy += reach * r.attempt_energy_uwh * r.attempts as f64;
            fail *= libm::pow(q, r.attempts as f64);
            break;
        }
    }
    (energy, 1.0 - fail)
}

pub fn confirmed_ladder_plan(
    policy: &Policy,
    msg: &MessageSpec,
    ctx: &Context,
    models: &Models,
) -> Result<TxPlan, PolicyError> {
    policy.validate()?;
    msg.validate()?;
    if policy.ladder.is_empty() {
        return Err(PolicyError::InvalidPolicy("critical messages need a non-empty ladder"));
    }
    let rungs = ladder_rungs(policy, msg, ctx, models)?;
    if rungs.is_empty() {
        return Err(PolicyError::NoFeasibleTechnology { payload_bytes: msg.payload_bytes });
    }
    let (energy, delivery) = ladder_expectation(&rungs);
    let applied = ctx.apply(models);
    let mut steps = Vec::with_capacity(rungs.len());
    for r in &rungs {
        steps.push(step(r.rung.tech, msg.payload_bytes, r.rung.confirmed, r.attempts, &applied)?);
        if !r.rung.confirmed {
            break;
        }
    }
    let duration_ms = schedule(&mut steps, &mut ctx.ledgers.clone());
    Ok(TxPlan {
        kind: PlanKind::Ladder,
        steps,
        expected_energy_uwh: energy,
        expected_delivery_probability: delivery,
        duration_ms,
        meets_deadline: deadline(Some(msg), duration_ms),
    })
}
