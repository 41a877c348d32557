//! Ribbons, crossing signals and the adjusted indicators.

mod adjusted;
mod extrema;
mod ribbon;

pub use adjusted::{
    adcptra, adcptra_causal, adcptra_ribbon, adcptra_with, adjusted_derivative, adjusted_label, AdCptra,
    AdCptraOptions, DERIVATIVE_LONG_PERIOD, DERIVATIVE_SHORT_PERIOD,
};
pub use extrema::{
    fit_line, monotonic_yearly_maxima, monotonic_yearly_maxima_from, yearly_minima, yearly_minima_from, ExtremumEvent,
    RegressionLine, FIRST_EXTREMUM_YEAR,
};
pub use ribbon::{
    build_ribbon, build_ribbon_with, detect_crossings, sign_changes, Convention, Crossing, Direction, Ribbon,
    DEFAULT_LONG_PERIOD, DEFAULT_SHORT_PERIOD,
};
