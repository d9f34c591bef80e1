//! Image-to-spike encoders and the non-STDP time controller.
//!
//! Black pixels fire at a shorter period than white ones under both
//! schemes. The STDP encoder varies only frequency; the non-STDP encoder
//! also gives black pixels the higher amplitude.

use crate::device::Pulse;
use crate::error::{Error, Result};
use crate::patterns::BinaryImage;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingParams {
    pub window: f64,
    pub black_period: f64,
    pub white_period: f64,
    pub v_black: f64,
    pub v_white: f64,
    pub v_mid: f64,
    pub pulse_width: f64,
}

impl Default for EncodingParams {
    fn default() -> Self {
        EncodingParams {
            window: 64.0,
            black_period: 8.0,
            white_period: 32.0,
            v_black: 1.0,
            v_white: 0.25,
            v_mid: 0.5,
            pulse_width: 1.0,
        }
    }
}

impl EncodingParams {
    /// Timing constraints shared by both encoders.
    pub fn validate_timing(&self) -> Result<()> {
        let all = [
            self.window,
            self.black_period,
            self.white_period,
            self.v_black,
            self.v_white,
            self.v_mid,
            self.pulse_width,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encoding parameters"));
        }
        if !(self.pulse_width > 0.0 && self.black_period > 0.0) {
            return Err(Error::InvalidParams(
                "pulse width and periods must be positive".into(),
            ));
        }
        if self.black_period >= self.white_period {
            return Err(Error::InvalidParams(format!(
                "black period {} must be shorter than white period {}",
                self.black_period, self.white_period
            )));
        }
        if self.pulse_width >= self.black_period {
            return Err(Error::InvalidParams(
                "pulse width must be shorter than the black period".into(),
            ));
        }
        if self.window < 2.0 * self.white_period {
            return Err(Error::InvalidParams(
                "window must span at least two white periods".into(),
            ));
        }
        Ok(())
    }

    /// Timing plus the amplitude ordering `v_white < v_mid < v_black`.
    pub fn validate_nonstdp(&self) -> Result<()> {
        self.validate_timing()?;
        if !(self.v_white < self.v_mid && self.v_mid < self.v_black) {
            return Err(Error::InvalidParams(format!(
                "need v_white < v_mid < v_black, got {} / {} / {}",
                self.v_white, self.v_mid, self.v_black
            )));
        }
        Ok(())
    }

    pub fn period(&self, black: bool) -> f64 {
        if black {
            self.black_period
        } else {
            self.white_period
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub pulses: Vec<Pulse>,
    pub window: f64,
}

impl SpikeTrain {
    pub fn new(pulses: Vec<Pulse>, window: f64) -> Result<Self> {
        let train = SpikeTrain { pulses, window };
        train.validate()?;
        Ok(train)
    }

    pub fn empty(window: f64) -> Self {
        SpikeTrain {
            pulses: Vec::new(),
            window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.pulses {
            p.validate()?;
            if p.start < 0.0 || p.start >= self.window {
                return Err(Error::InvalidTrain(format!(
                    "pulse at {} outside [0, {})",
                    p.start, self.window
                )));
            }
        }
        for w in self.pulses.windows(2) {
            if w[1].start < w[0].start {
                return Err(Error::InvalidTrain("pulses not sorted by start".into()));
            }
            if w[1].start < w[0].end() {
                return Err(Error::OverlappingPulses(w[1].start));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn spike_times(&self) -> Vec<f64> {
        self.pulses.iter().map(|p| p.start).collect()
    }
}

/// Periodic train starting at t = 0.
pub fn periodic_train(period: f64, amplitude: f64, width: f64, window: f64) -> SpikeTrain {
    let mut pulses = Vec::new();
    let mut k = 0u32;
    loop {
        let start = period * k as f64;
        if start >= window {
            break;
        }
        pulses.push(Pulse {
            amplitude_v: amplitude,
            width,
            start,
        });
        k += 1;
    }
    SpikeTrain { pulses, window }
}

/// Frequency coding: every pixel uses amplitude `v_black`; black pixels fire
/// every `black_period`, white ones every `white_period`.
pub fn encode_stdp(image: &BinaryImage, params: &EncodingParams) -> Result<Vec<SpikeTrain>> {
    params.validate_timing()?;
    Ok(image
        .pixels()
        .iter()
        .map(|&black| {
            periodic_train(
                params.period(black),
                params.v_black,
                params.pulse_width,
                params.window,
            )
        })
        .collect())
}

/// Amplitude and frequency coding: black pixels get `v_black` at the black
/// period, white pixels `v_white` at the white period.
pub fn encode_nonstdp(image: &BinaryImage, params: &EncodingParams) -> Result<Vec<SpikeTrain>> {
    params.validate_nonstdp()?;
    Ok(image
        .pixels()
        .iter()
        .map(|&black| {
            let amp = if black {
                params.v_black
            } else {
                params.v_white
            };
            periodic_train(params.period(black), amp, params.pulse_width, params.window)
        })
        .collect())
}

/// Mirrors the input's timing on the output electrode at `v_mid`.
pub fn time_controller(input: &SpikeTrain, v_mid: f64) -> SpikeTrain {
    SpikeTrain {
        pulses: input
            .pulses
            .iter()
            .map(|p| Pulse {
                amplitude_v: v_mid,
                ..*p
            })
            .collect(),
        window: input.window,
    }
}
