//! Deterministic discrete-event simulation.
//!
//! `run_campaign` replays the monitoring loop: every cycle sends one packet
//! per enabled technology with a random payload, then uploads the cycle's
//! records over NB-IoT (an overhead packet kept out of the per-technology
//! figures). `run_workload` routes application messages through a policy.
//!
//! Time is integer milliseconds since the simulation epoch. Randomness comes
//! from one `rng::stream` per (cycle, technology) or per message, so runs are
//! reproducible and adding a technology never shifts another's draws.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::duty::DutyCycleLedger;
use crate::model::{
    MeasurementRecord, PayloadBucket, Scenario, TechParams, Technology, ValidationError, MAX_PAYLOAD_BYTES,
};
use crate::models::{ModelError, Models};
use crate::pdr::{sample_delivery, PdrMode};
use crate::policy::{fragment_sizes, ladder_rungs, select_rat, Context, MessageSpec, Policy, PolicyError};
use crate::rng::{stream, uniform_inclusive, Stream};
use crate::HOUR_MS;

/// Stream lanes; technology lanes add `Technology::index`.
const LANE_CAMPAIGN: u64 = 0x10;
const LANE_WORKLOAD: u64 = 0x20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("message template {template}: {source}")]
    Policy { template: usize, source: PolicyError },
    #[error("generated record failed validation: {0}")]
    Record(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PayloadSampling {
    /// Uniform over `[1, max_payload]`.
    #[default]
    Uniform,
    /// Uniform bucket among those the technology covers, then uniform
    /// within the bucket. Gives every bucket comparable sample counts.
    BucketStratified,
    /// Uniform over `[min, max]`, capped at each technology's maximum.
    Range { min: u32, max: u32 },
}

fn all_technologies() -> Vec<Technology> {
    Technology::ALL.to_vec()
}

fn sigfox_dbm() -> i32 {
    14
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    #[serde(default = "all_technologies")]
    pub technologies: Vec<Technology>,
    pub cycles: u32,
    #[serde(default)]
    pub payload_sampling: PayloadSampling,
    #[serde(default = "sigfox_dbm")]
    pub sigfox_tx_power_dbm: i32,
    pub scenario: Scenario,
    #[serde(default)]
    pub speed_kmh: f64,
    #[serde(default)]
    pub pdr_mode: PdrMode,
    #[serde(default)]
    pub seed: u64,
    /// UTC milliseconds of simulation time zero.
    #[serde(default)]
    pub epoch_ms: i64,
    /// Minimum spacing of cycle starts; duty-cycle waits may stretch it.
    #[serde(default)]
    pub cycle_interval_ms: u64,
    /// Upload each cycle's records over NB-IoT.
    #[serde(default = "yes")]
    pub report: bool,
}

impl CampaignConfig {
    pub fn new(scenario: Scenario, cycles: u32, seed: u64) -> Self {
        CampaignConfig {
            technologies: all_technologies(),
            cycles,
            payload_sampling: PayloadSampling::Uniform,
            sigfox_tx_power_dbm: 14,
            scenario,
            speed_kmh: if scenario.is_mobile() { 20.0 } else { 0.0 },
            pdr_mode: PdrMode::Auto,
            seed,
            epoch_ms: 0,
            cycle_interval_ms: 0,
            report: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.cycles == 0 {
            return Err(SimError::ConfigInvalid("cycles must be at least 1"));
        }
        if self.technologies.is_empty() {
            return Err(SimError::ConfigInvalid("no technology enabled"));
        }
        if let PayloadSampling::Range { min, max } = self.payload_sampling {
            if min == 0 || min > max {
                return Err(SimError::ConfigInvalid("payload range must satisfy 1 <= min <= max"));
            }
        }
        if self.sigfox_tx_power_dbm != 14 {
            return Err(SimError::ConfigInvalid("Sigfox transmit power is fixed at 14 dBm"));
        }
        self.scenario.validate().map_err(|_| SimError::ConfigInvalid("indoor mobile is not a valid scenario"))?;
        if !(self.speed_kmh.is_finite() && self.speed_kmh >= 0.0) {
            return Err(SimError::ConfigInvalid("speed must be a non-negative number"));
        }
        if self.scenario.is_mobile() != (self.speed_kmh > 0.0) {
            return Err(SimError::ConfigInvalid("mobile scenarios need a positive speed, static ones zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Measured uplink.
    Tx,
    /// Results upload; its energy is overhead.
    Report,
    /// Workload message handed to the radio layer.
    Message,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDetails {
    pub technology: Technology,
    pub payload_bytes: u32,
    pub on_air_ms: f64,
    pub duration_ms: f64,
    pub energy_uwh: f64,
    /// Time spent waiting for duty-cycle budget or a busy radio.
    pub waited_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivered: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t_ms: i64,
    pub event_type: EventKind,
    pub details: EventDetails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignOutput {
    pub records: Vec<MeasurementRecord>,
    pub events: Vec<SimEvent>,
    pub overhead_energy_uwh: f64,
}

fn sample_payload(rng: &mut Stream, tech: Technology, rule: PayloadSampling) -> u32 {
    match rule {
        PayloadSampling::Uniform => uniform_inclusive(rng, 1, tech.max_payload()),
        PayloadSampling::BucketStratified => {
            let covered: Vec<(u32, u32)> = PayloadBucket::ALL.iter().filter_map(|b| b.range_for(tech)).collect();
            let (lo, hi) = covered[uniform_inclusive(rng, 0, covered.len() as u32 - 1) as usize];
            uniform_inclusive(rng, lo, hi)
        }
        PayloadSampling::Range { min, max } => {
            let hi = max.min(tech.max_payload());
            uniform_inclusive(rng, min.min(hi), hi)
        }
    }
}

fn tech_params(tech: Technology, models: &Models) -> TechParams {
    match tech {
        Technology::LoRaWAN => TechParams::LoRaWAN { sf: models.link.lorawan_sf, adr_enabled: false },
        Technology::Sigfox => TechParams::Sigfox { estimated_region: None },
        Technology::NBIoT => TechParams::NBIoT {
            ce_level: models.link.nbiot_ce_level,
            rsrp_dbm: None,
            sinr_db: None,
            rsrq_db: None,
            edrx_s: models.link.nbiot.edrx_cycle_ms.map(|ms| ms / 1000.0),
            psm_tau_s: None,
        },
    }
}

/// Radio timing shared by campaign and workload runs.
struct Radios {
    ledgers: [DutyCycleLedger; 2],
    busy_until: [u64; 3],
}

impl Radios {
    fn new(lorawan: DutyCycleLedger, sigfox: DutyCycleLedger) -> Self {
        Radios { ledgers: [lorawan, sigfox], busy_until: [0; 3] }
    }

    /// Starts a transmission no earlier than `now`, after the radio is free
    /// and the duty budget allows; returns the start time.
    fn start(&mut self, tech: Technology, now: u64, on_air_ms: f64, duration_ms: f64) -> u64 {
        let ready = now.max(self.busy_until[tech.index()]);
        let start = match tech {
            Technology::LoRaWAN | Technology::Sigfox => {
                let l = &mut self.ledgers[tech.index()];
                // Ordered, non-overlapping by construction.
                l.transmit(ready, on_air_ms).unwrap_or(ready)
            }
            Technology::NBIoT => ready,
        };
        self.busy_until[tech.index()] = start + libm::ceil(duration_ms) as u64;
        start
    }
}

pub fn run_campaign(cfg: &CampaignConfig, models: &Models) -> Result<CampaignOutput, SimError> {
    cfg.validate()?;
    let mut models = models.clone();
    models.link.sigfox_tx_power_dbm = cfg.sigfox_tx_power_dbm;

    let mut radios = Radios::new(DutyCycleLedger::default(), DutyCycleLedger::default());
    let mut records = Vec::with_capacity(cfg.cycles as usize * cfg.technologies.len());
    let mut events = Vec::new();
    let mut overhead = 0.0;
    let mut t = 0u64;

    for cycle in 0..cfg.cycles {
        t = t.max(cycle as u64 * cfg.cycle_interval_ms);
        let first = records.len();
        for tech in Technology::ALL.into_iter().filter(|x| cfg.technologies.contains(x)) {
            let mut rng = stream(cfg.seed, LANE_CAMPAIGN + tech.index() as u64, cycle as u64);
            let n = sample_payload(&mut rng, tech, cfg.payload_sampling);
            let profile = models.transaction(tech, n)?;
            let energy = models.transaction_energy(tech, n, cfg.scenario)?.value;
            let p = models.delivery_probability(tech, n, cfg.scenario, cfg.speed_kmh, cfg.pdr_mode)?.value;
            let delivered = sample_delivery(&mut rng, p).map_err(ModelError::from)?;

            let start = radios.start(tech, t, profile.total_on_air_ms, profile.total_duration_ms());
            let tx_at = cfg.epoch_ms + start as i64;
            let record_id = format!("{:016x}-{}-{}", cfg.seed, cycle, tech.as_str());
            let record = MeasurementRecord {
                record_id: record_id.clone(),
                technology: tech,
                scenario: cfg.scenario,
                timestamp_tx: tx_at,
                timestamp_rx: delivered.then(|| tx_at + libm::ceil(profile.total_on_air_ms) as i64),
                payload_bytes: n,
                tx_power_dbm: models.link.tx_power_dbm(tech),
                energy_uwh: energy,
                delivered,
                rssi_dbm: None,
                snr_db: None,
                position: None,
                speed_kmh: cfg.speed_kmh,
                gateway_positions: Vec::new(),
                tech_params: tech_params(tech, &models),
            };
            crate::model::validate_record(&record)?;
            records.push(record);
            events.push(SimEvent {
                t_ms: tx_at,
                event_type: EventKind::Tx,
                details: EventDetails {
                    technology: tech,
                    payload_bytes: n,
                    on_air_ms: profile.total_on_air_ms,
                    duration_ms: profile.total_duration_ms(),
                    energy_uwh: energy,
                    waited_ms: start - t,
                    delivered: Some(delivered),
                    record_id: Some(record_id),
                    template: None,
                },
            });
            t = start + libm::ceil(profile.total_duration_ms()) as u64;
        }

        if cfg.report {
            let size = serde_json::to_vec(&records[first..]).map_or(MAX_PAYLOAD_BYTES, |v| v.len() as u32);
            let n = size.clamp(1, MAX_PAYLOAD_BYTES);
            let tech = Technology::NBIoT;
            let profile = models.transaction(tech, n)?;
            let energy = models.transaction_energy(tech, n, cfg.scenario)?.value;
            let start = radios.start(tech, t, profile.total_on_air_ms, profile.total_duration_ms());
            overhead += energy;
            events.push(SimEvent {
                t_ms: cfg.epoch_ms + start as i64,
                event_type: EventKind::Report,
                details: EventDetails {
                    technology: tech,
                    payload_bytes: n,
                    on_air_ms: profile.total_on_air_ms,
                    duration_ms: profile.total_duration_ms(),
                    energy_uwh: energy,
                    waited_ms: start - t,
                    delivered: None,
                    record_id: None,
                    template: None,
                },
            });
            t = start + libm::ceil(profile.total_duration_ms()) as u64;
        }
    }
    Ok(CampaignOutput { records, events, overhead_energy_uwh: overhead })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadItem {
    pub message: MessageSpec,
    /// Messages per hour.
    pub rate_per_h: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Periodic message templates. Each template fires every `1/rate` hours from
/// time zero; weights describe the mix and must sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub templates: Vec<WorkloadItem>,
    pub duration_h: f64,
    pub context: Context,
}

impl WorkloadSpec {
    /// `rate_per_h` messages of `payload_bytes` for `duration_h` hours.
    pub fn periodic(payload_bytes: u32, rate_per_h: f64, duration_h: f64, context: Context) -> Self {
        WorkloadSpec {
            templates: alloc::vec![WorkloadItem { message: MessageSpec::new(payload_bytes), rate_per_h, weight: 1.0 }],
            duration_h,
            context,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration_h.is_finite() && self.duration_h >= 0.0) {
            return Err(SimError::ConfigInvalid("duration must be a non-negative number of hours"));
        }
        if self.templates.is_empty() {
            return Err(SimError::ConfigInvalid("workload has no message templates"));
        }
        if self.templates.iter().any(|t| !(t.rate_per_h.is_finite() && t.rate_per_h > 0.0)) {
            return Err(SimError::ConfigInvalid("rates must be positive"));
        }
        if self.templates.iter().any(|t| t.weight.is_nan() || t.weight < 0.0) {
            return Err(SimError::ConfigInvalid("weights must be non-negative"));
        }
        let w: f64 = self.templates.iter().map(|t| t.weight).sum();
        if (w - 1.0).abs() > 1e-9 {
            return Err(SimError::ConfigInvalid("weights must sum to 1"));
        }
        for (i, t) in self.templates.iter().enumerate() {
            t.message.validate().map_err(|source| SimError::Policy { template: i, source })?;
        }
        self.context.validate().map_err(|source| SimError::Policy { template: 0, source })?;
        Ok(())
    }

    /// Arrival times (ms) and template indices, ordered by time then template.
    pub fn arrivals(&self) -> Vec<(u64, usize)> {
        let end = self.duration_h * HOUR_MS as f64;
        let mut out = Vec::new();
        for (i, t) in self.templates.iter().enumerate() {
            let period = HOUR_MS as f64 / t.rate_per_h;
            let mut k = 0u64;
            loop {
                let at = k as f64 * period;
                if at >= end {
                    break;
                }
                out.push((libm::round(at) as u64, i));
                k += 1;
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TechTotals {
    pub energy_uwh: f64,
    pub bytes_sent: u64,
    pub bytes_delivered: u64,
    pub n_sent: u64,
    pub n_delivered: u64,
}

impl TechTotals {
    fn add(&mut self, other: &TechTotals) {
        self.energy_uwh += other.energy_uwh;
        self.bytes_sent += other.bytes_sent;
        self.bytes_delivered += other.bytes_delivered;
        self.n_sent += other.n_sent;
        self.n_delivered += other.n_delivered;
    }

    pub fn eb_uwh_per_byte(&self) -> Option<f64> {
        (self.bytes_sent > 0).then(|| self.energy_uwh / self.bytes_sent as f64)
    }

    pub fn pdr(&self) -> Option<f64> {
        (self.n_sent > 0).then(|| self.n_delivered as f64 / self.n_sent as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechSummary {
    pub technology: Technology,
    #[serde(flatten)]
    pub totals: TechTotals,
    pub eb_uwh_per_byte: Option<f64>,
    pub pdr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub per_technology: Vec<TechSummary>,
    pub total: TechTotals,
    pub eb_uwh_per_byte: Option<f64>,
    pub pdr: Option<f64>,
    pub n_messages: u64,
    pub n_messages_delivered: u64,
    pub deadline_misses: u64,
    pub events: Vec<SimEvent>,
}

impl SimSummary {
    fn from_parts(
        per: [TechTotals; 3],
        n_messages: u64,
        n_messages_delivered: u64,
        deadline_misses: u64,
        events: Vec<SimEvent>,
    ) -> Self {
        let mut total = TechTotals::default();
        let mut per_technology = Vec::new();
        for tech in Technology::ALL {
            let t = per[tech.index()];
            total.add(&t);
            if t.n_sent > 0 {
                per_technology.push(TechSummary {
                    technology: tech,
                    totals: t,
                    eb_uwh_per_byte: t.eb_uwh_per_byte(),
                    pdr: t.pdr(),
                });
            }
        }
        SimSummary {
            per_technology,
            eb_uwh_per_byte: total.eb_uwh_per_byte(),
            pdr: total.pdr(),
            total,
            n_messages,
            n_messages_delivered,
            deadline_misses,
            events,
        }
    }
}

/// One uplink inside a workload run.
struct Attempt<'a> {
    tech: Technology,
    n: u32,
    confirmed: bool,
    template: usize,
    models: &'a Models,
    ctx: &'a Context,
}

struct WorkloadState {
    radios: Radios,
    per: [TechTotals; 3],
    events: Vec<SimEvent>,
}

impl WorkloadState {
    /// Sends one uplink; returns (delivered, end time).
    fn send(&mut self, a: &Attempt<'_>, now: u64, rng: &mut Stream) -> Result<(bool, u64), SimError> {
        let err = |e: ModelError| SimError::Policy { template: a.template, source: e.into() };
        let profile = a.models.transaction(a.tech, a.n).map_err(err)?;
        let mut energy = a.models.transaction_energy(a.tech, a.n, a.ctx.scenario).map_err(err)?.value;
        if a.confirmed {
            energy += a.models.ack.energy_uwh(a.tech);
        }
        let p = a
            .models
            .delivery_probability(a.tech, a.n, a.ctx.scenario, a.ctx.speed_kmh, a.ctx.pdr_mode)
            .map_err(err)?
            .value;
        let delivered = sample_delivery(rng, p).map_err(|e| err(e.into()))?;
        let start = self.radios.start(a.tech, now, profile.total_on_air_ms, profile.total_duration_ms());

        let t = &mut self.per[a.tech.index()];
        t.energy_uwh += energy;
        t.n_sent += 1;
        t.bytes_sent += a.n as u64;
        if delivered {
            t.n_delivered += 1;
            t.bytes_delivered += a.n as u64;
        }
        self.events.push(SimEvent {
            t_ms: start as i64,
            event_type: EventKind::Message,
            details: EventDetails {
                technology: a.tech,
                payload_bytes: a.n,
                on_air_ms: profile.total_on_air_ms,
                duration_ms: profile.total_duration_ms(),
                energy_uwh: energy,
                waited_ms: start - now,
                delivered: Some(delivered),
                record_id: None,
                template: Some(a.template),
            },
        });
        Ok((delivered, start + libm::ceil(profile.total_duration_ms()) as u64))
    }
}

/// Runs every arrival of `w` through `policy`. Critical messages walk the
/// ladder when the policy has one; everything else goes over the selected
/// technology, fragmented if the policy allows it. Delivery draws come from
/// one stream per message, so two policies see common random numbers.
pub fn run_workload(w: &WorkloadSpec, policy: &Policy, models: &Models, seed: u64) -> Result<SimSummary, SimError> {
    w.validate()?;
    policy.validate().map_err(|source| SimError::Policy { template: 0, source })?;
    let ctx = &w.context;
    let applied = ctx.apply(models);

    // Selection ignores ledgers, so it is fixed per template.
    let mut routes = Vec::with_capacity(w.templates.len());
    for (i, t) in w.templates.iter().enumerate() {
        let route = if t.message.critical && !policy.ladder.is_empty() {
            let rungs = ladder_rungs(policy, &t.message, ctx, models)
                .map_err(|source| SimError::Policy { template: i, source })?;
            if rungs.is_empty() {
                return Err(SimError::Policy {
                    template: i,
                    source: PolicyError::NoFeasibleTechnology { payload_bytes: t.message.payload_bytes },
                });
            }
            Route::Ladder(rungs.iter().map(|r| (r.rung.tech, r.attempts, r.rung.confirmed)).collect())
        } else {
            let tech = select_rat(policy, &t.message, ctx, models)
                .map_err(|source| SimError::Policy { template: i, source })?;
            Route::Direct(tech, fragment_sizes(t.message.payload_bytes, tech))
        };
        routes.push(route);
    }

    let mut st = WorkloadState {
        radios: Radios::new(ctx.ledgers.lorawan.clone(), ctx.ledgers.sigfox.clone()),
        per: [TechTotals::default(); 3],
        events: Vec::new(),
    };
    let (mut n_messages, mut n_ok, mut misses) = (0u64, 0u64, 0u64);
    for (seq, (at, i)) in w.arrivals().into_iter().enumerate() {
        let mut rng = stream(seed, LANE_WORKLOAD, seq as u64);
        let msg = &w.templates[i].message;
        let mut now = at;
        let delivered = match &routes[i] {
            Route::Direct(tech, sizes) => {
                let mut all = true;
                for &n in sizes {
                    let a = Attempt { tech: *tech, n, confirmed: false, template: i, models: &applied, ctx };
                    let (ok, end) = st.send(&a, now, &mut rng)?;
                    all &= ok;
                    now = end;
                }
                all
            }
            Route::Ladder(rungs) => {
                let mut done = false;
                'ladder: for &(tech, attempts, confirmed) in rungs {
                    let a = Attempt { tech, n: msg.payload_bytes, confirmed, template: i, models: &applied, ctx };
                    for _ in 0..attempts {
                        let (ok, end) = st.send(&a, now, &mut rng)?;
                        now = end;
                        done |= ok;
                        if ok && confirmed {
                            break 'ladder;
                        }
                    }
                    if !confirmed {
                        break;
                    }
                }
                done
            }
        };
        n_messages += 1;
        n_ok += delivered as u64;
        if msg.deadline_ms.is_some_and(|d| now - at > d) {
            misses += 1;
        }
    }
    Ok(SimSummary::from_parts(st.per, n_messages, n_ok, misses, st.events))
}

enum Route {
    Direct(Technology, Vec<u32>),
    Ladder(Vec<(Technology, u32, bool)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub summary_a: SimSummary,
    pub summary_b: SimSummary,
    /// `energy(b) / energy(a)`; 1 when both are zero.
    pub savings_factor: f64,
}

pub fn compare_policies(
    w: &WorkloadSpec,
    a: &Policy,
    b: &Policy,
    models: &Models,
    seed: u64,
) -> Result<Comparison, SimError> {
    let summary_a = run_workload(w, a, models, seed)?;
    let summary_b = run_workload(w, b, models, seed)?;
    let (ea, eb) = (summary_a.total.energy_uwh, summary_b.total.energy_uwh);
    let savings_factor = if ea == eb {
        1.0
    } else if ea == 0.0 {
        f64::INFINITY
    } else {
        eb / ea
    };
    Ok(Comparison { summary_a, summary_b, savings_factor })
}
