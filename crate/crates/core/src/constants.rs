//! CODATA 2018 physical constants (SI).

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Bohr magneton divided by Planck's constant, in Hz/T.
pub const BOHR_MAGNETON_HZ_PER_T: f64 = 1.399_624_493_61e10;
pub const TORR_TO_PA: f64 = 101_325.0 / 760.0;

pub fn celsius_to_kelvin(t_c: f64) -> f64 {
    t_c + 273.15
}
