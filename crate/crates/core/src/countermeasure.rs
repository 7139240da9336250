//! Watchdog optical power meter at Bob's entrance.
//!
//! Legitimate single-photon signals average picowatts or less, while any
//! blinding attack must deliver at least the blinding power in CW light, so
//! a classical threshold between the two separates the sessions cleanly.

use serde::{Deserialize, Serialize};

use crate::optics::OpticalFrame;

const PLANCK: f64 = 6.626_070_15e-34;
const LIGHT_SPEED: f64 = 2.997_924_58e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WatchdogConfig {
    /// Alarm threshold on the windowed mean power, watts.
    pub threshold_power: f64,
    /// Averaging window, in slots.
    pub integration_window: usize,
    /// Wavelength used to convert photon numbers to energy, nm.
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
    /// Optional additive reading floor of the meter, watts; defaults off.
    #[serde(default)]
    pub noise_floor: Option<f64>,
}

fn default_wavelength() -> f64 {
    1550.0
}

impl Default for WatchdogConfig {
    fn default() -> Self {
        Self {
            threshold_power: 1e-6,
            integration_window: 100,
            wavelength_nm: 1550.0,
            noise_floor: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    /// Last slot of the window that tripped the alarm.
    pub slot_index: u64,
    /// Windowed mean power, watts.
    pub measured_power: f64,
}

/// Slot-averaged incident power of one frame: CW background, the duty-cycle
/// weighted pulse, and the photon-energy equivalent of quantum signals.
pub fn slot_average_power(frame: &OpticalFrame, slot_period_ns: f64, wavelength_nm: f64) -> f64 {
    let pulse = frame.pulse_peak_power * frame.pulse_duration_ns / slot_period_ns;
    let photon_energy = PLANCK * LIGHT_SPEED / (wavelength_nm * 1e-9);
    let quantum = frame.mean_photon_number * photon_energy / (slot_period_ns * 1e-9);
    frame.cw_power + pulse + quantum
}

/// Streaming watchdog; feed every frame that enters Bob in slot order.
#[derive(Debug, Clone)]
pub struct Watchdog {
    pub config: WatchdogConfig,
    slot_period_ns: f64,
    acc: f64,
    count: usize,
    last_slot: u64,
    alarms: Vec<Alarm>,
}

impl Watchdog {
    pub fn new(config: WatchdogConfig, slot_period_ns: f64) -> Self {
        Self { config, slot_period_ns, acc: 0.0, count: 0, last_slot: 0, alarms: Vec::new() }
    }

    pub fn observe(&mut self, frame: &OpticalFrame) {
        let mut power = slot_average_power(frame, self.slot_period_ns, self.config.wavelength_nm);
        if let Some(floor) = self.config.noise_floor {
            power += floor;
        }
        self.acc += power;
        self.count += 1;
        self.last_slot = frame.slot_index;
        if self.count == self.config.integration_window.max(1) {
            let mean = self.acc / self.count as f64;
            if mean > self.config.threshold_power {
                self.alarms.push(Alarm { slot_index: self.last_slot, measured_power: mean });
            }
            self.acc = 0.0;
            self.count = 0;
        }
    }

    pub fn alarms(&self) -> &[Alarm] {
        &self.alarms
    }

    pub fn into_alarms(self) -> Vec<Alarm> {
        self.alarms
    }
}

/// Run the watchdog over a finished frame stream (trailing partial windows
/// are not evaluated).
pub fn monitor<'a, I>(frames: I, slot_period_ns: f64, config: &WatchdogConfig) -> Vec<Alarm>
where
    I: IntoIterator<Item = &'a OpticalFrame>,
{
    let mut dog = Watchdog::new(*config, slot_period_ns);
    for frame in frames {
        dog.observe(frame);
    }
    dog.into_alarms()
}
