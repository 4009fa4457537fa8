//! Seeded Poisson packet-arrival network model with a piecewise-constant
//! mean-rate schedule. Downloads are serial; completion times are a pure
//! function of (profile, seed, start time, size).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PACKET_SIZE_BITS: f64 = 12_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub start_s: f64,
    pub mean_rate_bps: f64,
}

/// Deterministic mean-rate schedule plus the packet model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    /// Sorted by start time; the first entry must start at 0.
    pub schedule: Vec<SchedulePoint>,
    /// When set, the schedule repeats with this period.
    #[serde(default)]
    pub repeat_s: Option<f64>,
    #[serde(default = "default_packet_size")]
    pub packet_size_bits: f64,
    /// Fixed per-request round trip time; zero by default.
    #[serde(default)]
    pub rtt_s: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_packet_size() -> f64 {
    DEFAULT_PACKET_SIZE_BITS
}

impl NetworkProfile {
    pub fn constant(rate_bps: f64, seed: u64) -> Self {
        NetworkProfile {
            schedule: vec![SchedulePoint {
                start_s: 0.0,
                mean_rate_bps: rate_bps,
            }],
            repeat_s: None,
            packet_size_bits: DEFAULT_PACKET_SIZE_BITS,
            rtt_s: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::Config("network schedule is empty".into()));
        }
        if self.schedule[0].start_s != 0.0 {
            return Err(Error::Config("network schedule must start at t=0".into()));
        }
        if self
            .schedule
            .windows(2)
            .any(|w| w[1].start_s <= w[0].start_s)
        {
            return Err(Error::Config("network schedule times must increase".into()));
        }
        if self.schedule.iter().any(|p| p.mean_rate_bps < 0.0) {
            return Err(Error::Config("mean rates must be non-negative".into()));
        }
        if self.packet_size_bits <= 0.0 {
            return Err(Error::Config("packet size must be positive".into()));
        }
        if let Some(p) = self.repeat_s {
            if p <= self.schedule.last().unwrap().start_s {
                return Err(Error::Config(
                    "repeat period must cover the whole schedule".into(),
                ));
            }
        }
        Ok(())
    }

    /// Mean rate in effect at simulation time `t`.
    pub fn mean_rate(&self, t: f64) -> f64 {
        let t = match self.repeat_s {
            Some(p) => t.rem_euclid(p),
            None => t,
        };
        let mut rate = self.schedule[0].mean_rate_bps;
        for p in &self.schedule {
            if p.start_s <= t {
                rate = p.mean_rate_bps;
            } else {
                break;
            }
        }
        rate
    }

    /// The next instant after `t` at which the mean rate may change.
    fn next_boundary(&self, t: f64) -> Option<f64> {
        match self.repeat_s {
            None => self
                .schedule
                .iter()
                .map(|p| p.start_s)
                .find(|&s| s > t + 1e-12),
            Some(period) => {
                let cycle = (t / period).floor();
                for k in [cycle, cycle + 1.0] {
                    for p in &self.schedule {
                        let s = k * period + p.start_s;
                        if s > t + 1e-12 {
                            return Some(s);
                        }
                    }
                }
                None
            }
        }
    }

    fn all_rates_zero(&self) -> bool {
        self.schedule.iter().all(|p| p.mean_rate_bps == 0.0)
    }

    /// Seconds until `bits` have arrived for a download starting at
    /// `t_start`. Returns infinity when the remaining schedule can never
    /// deliver them. Deterministic in (seed, t_start, bits).
    pub fn download_time(&self, bits: f64, t_start: f64) -> f64 {
        if bits <= 0.0 {
            return 0.0;
        }
        if self.all_rates_zero() {
            return f64::INFINITY;
        }
        let packets = (bits / self.packet_size_bits).ceil() as u64;
        // One arrival stream per request: packet times depend only on
        // (seed, t_start), so larger downloads strictly extend smaller ones.
        let mut rng = ChaCha12Rng::seed_from_u64(mix(self.seed, t_start.to_bits()));
        let mut t = t_start + self.rtt_s;
        for _ in 0..packets {
            // Unit-rate exponential work, consumed at the instantaneous
            // packet rate across schedule epochs.
            let mut work = -(1.0 - rng.random::<f64>()).ln();
            loop {
                let rate = self.mean_rate(t) / self.packet_size_bits;
                let boundary = self.next_boundary(t);
                if rate <= 0.0 {
                    match boundary {
                        Some(b) => {
                            t = b;
                            continue;
                        }
                        None => return f64::INFINITY,
                    }
                }
                let need = work / rate;
                match boundary {
                    Some(b) if t + need > b => {
                        work -= rate * (b - t);
                        t = b;
                    }
                    _ => {
                        t += need;
                        break;
                    }
                }
            }
        }
        t - t_start
    }
}

/// The two reference conditions: a steady link and a strongly varying one.
pub fn preset(name: &str) -> Result<NetworkProfile> {
    match name {
        "stable" => Ok(NetworkProfile::constant(18e6, 0)),
        "variable" => Ok(NetworkProfile {
            schedule: [20e6, 6e6, 14e6, 3e6, 18e6]
                .iter()
                .enumerate()
                .map(|(i, &r)| SchedulePoint {
                    start_s: 5.0 * i as f64,
                    mean_rate_bps: r,
                })
                .collect(),
            repeat_s: Some(25.0),
            packet_size_bits: DEFAULT_PACKET_SIZE_BITS,
            rtt_s: 0.0,
            seed: 0,
        }),
        other => Err(Error::Config(format!(
            "unknown network preset {other:?}; expected \"stable\" or \"variable\""
        ))),
    }
}

/// Parse a rate trace: CSV rows of `t_start_s, mean_rate_bps`.
pub fn parse_rate_trace(text: &str) -> Result<NetworkProfile> {
    let mut schedule = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if ln == 0 && fields[0].parse::<f64>().is_err() {
            continue; // header
        }
        if fields.len() != 2 {
            return Err(Error::Config(format!(
                "rate trace line {}: expected 2 columns",
                ln + 1
            )));
        }
        let start_s = fields[0]
            .parse()
            .map_err(|_| Error::Config(format!("rate trace line {}: bad time", ln + 1)))?;
        let mean_rate_bps = fields[1]
            .parse()
            .map_err(|_| Error::Config(format!("rate trace line {}: bad rate", ln + 1)))?;
        schedule.push(SchedulePoint {
            start_s,
            mean_rate_bps,
        });
    }
    let profile = NetworkProfile {
        schedule,
        repeat_s: None,
        packet_size_bits: DEFAULT_PACKET_SIZE_BITS,
        rtt_s: 0.0,
        seed: 0,
    };
    profile.validate()?;
    Ok(profile)
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 over the pair keeps per-request streams independent.
    let mut x = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
