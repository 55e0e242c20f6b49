use serde::{Deserialize, Serialize};

use super::SimError;
use crate::mapping::{AffineLatency, CostModelParams};

fn default_jitter() -> f64 {
    0.05
}

/// Bandwidth and latency parameters of the simulated SoC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformModel {
    /// Shared memory port of the hardware threads.
    pub memif_bandwidth_bytes_per_s: f64,
    /// Per-subscriber hardware streaming channel.
    pub hmt_bandwidth_bytes_per_s: f64,
    /// Fixed latency of one hardware-topic stream.
    pub hmt_setup_us: f64,
    /// Hardware thread ↔ delegate request/response.
    pub osif_roundtrip_us: f64,
    /// Delegate-side cost of publishing into the software DDS.
    pub delegate_publish_us: f64,
    /// Per-message cost of the gateway core before a transfer.
    pub gateway_overhead_us: f64,
    /// Software DDS delivery latency to a single reader.
    pub sw_dds_latency: AffineLatency,
    /// Copy bandwidth shared by the extra readers of one DDS publication.
    pub sw_copy_bandwidth_bytes_per_s: f64,
    /// Half-width of the uniform relative jitter on delegate latencies.
    #[serde(default = "default_jitter")]
    pub delegate_jitter: f64,
}

impl Default for PlatformModel {
    fn default() -> Self {
        Self::from_json(include_str!("../../data/platform_default.json")).expect("bundled platform parses")
    }
}

impl PlatformModel {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let model: PlatformModel = serde_json::from_str(text).map_err(|e| SimError::InvalidPlatform(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("platform serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("memif_bandwidth_bytes_per_s", self.memif_bandwidth_bytes_per_s),
            ("hmt_bandwidth_bytes_per_s", self.hmt_bandwidth_bytes_per_s),
            ("hmt_setup_us", self.hmt_setup_us),
            ("osif_roundtrip_us", self.osif_roundtrip_us),
            ("delegate_publish_us", self.delegate_publish_us),
            ("gateway_overhead_us", self.gateway_overhead_us),
            ("sw_dds_latency.intercept_us", self.sw_dds_latency.intercept_us),
            ("sw_dds_latency.us_per_byte", self.sw_dds_latency.us_per_byte),
            ("sw_copy_bandwidth_bytes_per_s", self.sw_copy_bandwidth_bytes_per_s),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidPlatform(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.delegate_jitter) {
            return Err(SimError::InvalidPlatform("delegate_jitter must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Time until all `readers` of one software DDS publication hold a copy.
    /// A single reader sees exactly `sw_dds_latency(size)`; every additional
    /// reader adds one copy through the shared copy bandwidth.
    pub fn dds_delivery_us(&self, size_bytes: u64, readers: usize) -> f64 {
        let extra = readers.saturating_sub(1) as f64;
        self.sw_dds_latency.at(size_bytes) + extra * size_bytes as f64 * 1e6 / self.sw_copy_bandwidth_bytes_per_s
    }

    pub fn hmt_stream_us(&self, size_bytes: u64) -> f64 {
        size_bytes as f64 * 1e6 / self.hmt_bandwidth_bytes_per_s
    }

    /// Cost-model view of this platform for the mapping engine.
    ///
    /// The cost model requires hmt ≥ memif bandwidth; a slower calibrated
    /// HMT is clamped up to the memory-port bandwidth.
    pub fn to_cost_params(&self) -> CostModelParams {
        CostModelParams {
            memif_bandwidth_bytes_per_s: self.memif_bandwidth_bytes_per_s,
            hmt_bandwidth_bytes_per_s: self.hmt_bandwidth_bytes_per_s.max(self.memif_bandwidth_bytes_per_s),
            gateway_fixed_overhead_us: self.hmt_setup_us + self.gateway_overhead_us + self.osif_roundtrip_us,
            delegate_roundtrip_us: self.delegate_publish_us + self.osif_roundtrip_us,
            sw_dds_latency: self.sw_dds_latency,
        }
    }

    pub(crate) fn without_jitter(mut self) -> Self {
        self.delegate_jitter = 0.0;
        self
    }
}
