//! Device resource budgets and rate constants.
//!
//! A [`HardwareProfile`] captures everything the cost model needs: array
//! size and per-core MAC rate, stream-port and RAM-bank budgets, clock
//! frequencies, off-chip bandwidth, and the fabric DSP cost of each
//! nonlinear engine. Profiles are immutable after load and round-trip
//! through JSON bit-identically.

use crate::error::{Error, Result};
use crate::graph::LayerKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Bytes of one large RAM bank (the deep-block equivalent of eight small
/// banks on the reference device).
pub const URAM_BANK_BYTES: u64 = 36_864;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    #[serde(default)]
    pub name: String,
    /// Total vector cores in the array.
    pub aie_total: u64,
    /// Stream ports between the array and the fabric.
    pub plio_budget: u64,
    /// Small RAM banks (`bank_bytes` each).
    pub bram_total: u64,
    /// Large RAM banks ([`URAM_BANK_BYTES`] each).
    pub uram_total: u64,
    pub dsp_total: u64,
    /// Local data memory per vector core, in bytes.
    pub aie_local_mem_bytes: u64,
    /// INT8 multiply-accumulates per core per cycle.
    pub mac_per_aie_per_cycle: u64,
    pub freq_aie_hz: f64,
    pub freq_pl_hz: f64,
    pub offchip_bw_bytes_per_s: f64,
    /// Bytes of one small RAM bank.
    pub bank_bytes: u64,
    /// Fraction of the peak per-core MAC rate a kernel sustains.
    pub eff: f64,
    /// Fabric DSP cost of one nonlinear engine instance, per kind.
    pub nonlinear_dsp_cost: BTreeMap<LayerKind, u64>,
}

impl HardwareProfile {
    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, u64); 6] = [
            ("aie_total", self.aie_total),
            ("plio_budget", self.plio_budget),
            ("bram_total", self.bram_total),
            ("aie_local_mem_bytes", self.aie_local_mem_bytes),
            ("mac_per_aie_per_cycle", self.mac_per_aie_per_cycle),
            ("bank_bytes", self.bank_bytes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidProfile(format!("{name} must be positive")));
            }
        }
        let positive_rate = |v: f64| v.is_finite() && v > 0.0;
        if !positive_rate(self.freq_aie_hz) || !positive_rate(self.freq_pl_hz) {
            return Err(Error::InvalidProfile("frequencies must be positive".into()));
        }
        if !positive_rate(self.offchip_bw_bytes_per_s) {
            return Err(Error::InvalidProfile(
                "offchip bandwidth must be positive".into(),
            ));
        }
        if !positive_rate(self.eff) || self.eff > 1.0 {
            return Err(Error::InvalidProfile(format!(
                "eff must lie in (0, 1], got {}",
                self.eff
            )));
        }
        Ok(())
    }

    /// Device RAM capacity expressed in small-bank units.
    pub fn ram_bank_budget(&self) -> u64 {
        self.bram_total + self.uram_total * (URAM_BANK_BYTES / self.bank_bytes)
    }

    /// DSP cost of one engine instance for `kind` (zero when unlisted).
    pub fn dsp_cost(&self, kind: LayerKind) -> u64 {
        self.nonlinear_dsp_cost.get(&kind).copied().unwrap_or(0)
    }

    /// The reference array device: 400 cores at 128 INT8 MACs and 1 GHz
    /// (102.4 INT8 TOPS peak), 25.6 GB/s off-chip, 230 MHz fabric.
    ///
    /// The stream-port budget defaults to 220: achieved designs route 199
    /// ports alongside 394 cores, and the true ceiling is set by
    /// routability rather than a published constant, so the default must
    /// admit that design. RAM and DSP budgets match the device totals the
    /// same designs report usage against. Nonlinear engine costs are
    /// calibration-grade defaults derived from a one-block spatial design
    /// (two norm engines at 1024 DSP total, one softmax engine at 336) and
    /// can be overridden in a profile file.
    pub fn vck190() -> Self {
        let mut nl = BTreeMap::new();
        nl.insert(LayerKind::LayerNorm, 512);
        nl.insert(LayerKind::Softmax, 336);
        nl.insert(LayerKind::GeLU, 0);
        nl.insert(LayerKind::Transpose, 0);
        nl.insert(LayerKind::Reformat, 0);
        nl.insert(LayerKind::VectorAdd, 0);
        Self {
            name: "vck190".into(),
            aie_total: 400,
            plio_budget: 220,
            bram_total: 967,
            uram_total: 462,
            dsp_total: 1968,
            aie_local_mem_bytes: 32_768,
            mac_per_aie_per_cycle: 128,
            freq_aie_hz: 1.0e9,
            freq_pl_hz: 230.0e6,
            offchip_bw_bytes_per_s: 25.6e9,
            bank_bytes: 4608,
            eff: 0.8,
            nonlinear_dsp_cost: nl,
        }
    }

    /// An alternate tensor-block FPGA: 3960 AI blocks at 30 INT8 MACs and
    /// 600 MHz (142.56 INT8 TOPS peak, 143 nominal), roughly 16 MB of
    /// on-chip RAM, and 512 GB/s memory bandwidth. Nonlinear kernels run
    /// in soft logic; the engine-cost defaults carry over.
    pub fn stratix10nx() -> Self {
        let mut nl = BTreeMap::new();
        nl.insert(LayerKind::LayerNorm, 512);
        nl.insert(LayerKind::Softmax, 336);
        nl.insert(LayerKind::GeLU, 0);
        nl.insert(LayerKind::Transpose, 0);
        nl.insert(LayerKind::Reformat, 0);
        nl.insert(LayerKind::VectorAdd, 0);
        Self {
            name: "stratix10nx".into(),
            aie_total: 3960,
            plio_budget: 4000,
            bram_total: 6400,
            uram_total: 0,
            dsp_total: 3960,
            aie_local_mem_bytes: 20_480,
            mac_per_aie_per_cycle: 30,
            freq_aie_hz: 600.0e6,
            freq_pl_hz: 250.0e6,
            offchip_bw_bytes_per_s: 512.0e9,
            bank_bytes: 2560,
            eff: 0.6,
            nonlinear_dsp_cost: nl,
        }
    }
}

/// Loads a profile by built-in name (`vck190`, `stratix10nx`) or from a
/// JSON file path. The result is validated.
pub fn load_profile(name_or_path: &str) -> Result<HardwareProfile> {
    let profile = match name_or_path.to_ascii_lowercase().as_str() {
        "vck190" => HardwareProfile::vck190(),
        "stratix10nx" => HardwareProfile::stratix10nx(),
        _ => {
            let path = Path::new(name_or_path);
            if !path.exists() {
                return Err(Error::UnknownBuiltin(name_or_path.to_string()));
            }
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)?
        }
    };
    profile.validate()?;
    Ok(profile)
}

/// Peak INT8 rate in ops/s: `aie_total * mac_per_aie * 2 * freq_aie`.
pub fn peak_tops(p: &HardwareProfile) -> f64 {
    p.aie_total as f64 * p.mac_per_aie_per_cycle as f64 * 2.0 * p.freq_aie_hz
}
