//! Whiteness diagnostics for innovation sequences: lagged sample
//! autocorrelation, the whiteness cost, the Bartlett band, and the
//! steady-state innovation spectrum with its inverse.

mod autocorr;
mod psd;

pub use autocorr::{
    empirical_autocorrelation, empirical_autocorrelation_with, lagged_covariance, whiteness_bound,
    whiteness_cost, AutocorrEstimate, AutocorrOptions, InnovationsLog, DEFAULT_MAX_LAG,
};
pub use psd::{
    frequency_grid, innovations_psd_theoretical, recover_phi_v, welch_psd, NoiseSpectrum, PsdCurve,
};
