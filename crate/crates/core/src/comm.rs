//! Wireless link model: channel gain and Shannon-rate transmission latency.
//!
//! The achievable rate is `B * log2(1 + 10^((P + G - w0)/10))` bits per
//! step. Base-2 log is the standard Shannon-Hartley statement; switching to
//! a natural log would be a one-constant change here.

use crate::domain::{GainModel, NodeId};
use crate::error::{Result, SimError};

/// Assembled link budget for one transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub source: NodeId,
    pub target: NodeId,
    pub bits: f64,
    /// P + G - w0, dB.
    pub snr_db: f64,
    /// Bits per time step.
    pub rate: f64,
    /// Transmission latency, steps (fractional).
    pub time: f64,
}

/// Gain between two positions under the configured model, dB.
pub fn channel_gain(pos_i: (f64, f64), pos_j: (f64, f64), model: GainModel) -> Result<f64> {
    match model {
        GainModel::Constant { gain_db } => Ok(gain_db),
        GainModel::FreeSpace { reference_db } => {
            let dx = pos_i.0 - pos_j.0;
            let dy = pos_i.1 - pos_j.1;
            let distance = (dx * dx + dy * dy).sqrt();
            if distance == 0.0 {
                return Err(SimError::DegenerateDistance);
            }
            Ok(reference_db - 20.0 * distance.log10())
        }
    }
}

/// Time to push `bits` through the channel, in (fractional) steps.
///
/// Zero bits cost zero time on any channel. An SNR low enough that the
/// rate underflows to zero makes the channel unusable.
pub fn transmission_time(
    bits: f64,
    bandwidth_hz: f64,
    power_dbm: f64,
    gain_db: f64,
    noise_dbm: f64,
) -> Result<f64> {
    debug_assert!(bits >= 0.0 && bandwidth_hz > 0.0);
    if bits == 0.0 {
        return Ok(0.0);
    }
    let snr_db = power_dbm + gain_db - noise_dbm;
    let rate = bandwidth_hz * (1.0 + 10f64.powf(snr_db / 10.0)).log2();
    if rate <= 0.0 {
        return Err(SimError::UnusableChannel { snr_db });
    }
    Ok(bits / rate)
}

/// Convenience constructor carrying the intermediate quantities.
pub fn link_budget(
    source: NodeId,
    target: NodeId,
    bits: f64,
    bandwidth_hz: f64,
    power_dbm: f64,
    gain_db: f64,
    noise_dbm: f64,
) -> Result<LinkBudget> {
    let snr_db = power_dbm + gain_db - noise_dbm;
    let time = transmission_time(bits, bandwidth_hz, power_dbm, gain_db, noise_dbm)?;
    let rate = if bits == 0.0 {
        bandwidth_hz * (1.0 + 10f64.powf(snr_db / 10.0)).log2()
    } else {
        bits / time
    };
    Ok(LinkBudget {
        source,
        target,
        bits,
        snr_db,
        rate,
        time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_gain_ignores_positions() {
        let g = channel_gain(
            (0.0, 0.0),
            (123.0, -42.0),
            GainModel::Constant { gain_db: -30.0 },
        )
        .unwrap();
        assert_eq!(g, -30.0);
    }

    #[test]
    fn free_space_reference_distance() {
        let g = channel_gain(
            (0.0, 0.0),
            (1.0, 0.0),
            GainModel::FreeSpace { reference_db: 0.0 },
        )
        .unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn free_space_ten_meters_loses_twenty_db() {
        let g = channel_gain(
            (0.0, 0.0),
            (10.0, 0.0),
            GainModel::FreeSpace { reference_db: 0.0 },
        )
        .unwrap();
        assert!((g - (-20.0)).abs() < 1e-12);
    }

    #[test]
    fn free_space_coincident_positions_fail() {
        let err = channel_gain(
            (5.0, 5.0),
            (5.0, 5.0),
            GainModel::FreeSpace { reference_db: 0.0 },
        );
        assert!(matches!(err, Err(SimError::DegenerateDistance)));
    }

    #[test]
    fn zero_bits_cost_nothing() {
        assert_eq!(transmission_time(0.0, 1.0, -300.0, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_db_snr_gives_unit_rate() {
        // SNR 0 dB -> rate = log2(2) = 1 bit/step, so time equals the payload.
        let t = transmission_time(8.0, 1.0, -30.0, 0.0, -30.0).unwrap();
        assert_eq!(t, 8.0);
    }

    #[test]
    fn table_sized_payload_takes_22_point_58_steps() {
        // 150 Mbytes over B = 2 MHz at P = 20 dBm, G = -30 dB, w0 = -90 dBm.
        let t = transmission_time(1.2e9, 2e6, 20.0, -30.0, -90.0).unwrap();
        assert!((t - 22.577249662542123).abs() < 1e-9, "got {t}");
    }

    #[test]
    fn shifting_power_and_noise_together_is_invariant() {
        let a = transmission_time(1e6, 2e6, 20.0, -30.0, -90.0).unwrap();
        let b = transmission_time(1e6, 2e6, 30.0, -30.0, -80.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn time_scales_linearly_in_bits() {
        let one = transmission_time(1e5, 2e6, 20.0, -30.0, -90.0).unwrap();
        let three = transmission_time(3e5, 2e6, 20.0, -30.0, -90.0).unwrap();
        assert!((three - 3.0 * one).abs() < 1e-12);
    }

    #[test]
    fn more_bandwidth_is_strictly_faster() {
        let slow = transmission_time(1e6, 1e6, 20.0, -30.0, -90.0).unwrap();
        let fast = transmission_time(1e6, 4e6, 20.0, -30.0, -90.0).unwrap();
        assert!(fast < slow);
    }

    #[test]
    fn hopeless_snr_is_unusable() {
        let err = transmission_time(1.0, 1.0, -4000.0, 0.0, 0.0);
        assert!(matches!(err, Err(SimError::UnusableChannel { .. })));
    }
}
