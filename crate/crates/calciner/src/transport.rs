//! Transport closures: suspension density, viscosity models, the
//! pressure-drop velocity law, and interface species fluxes.

use thiserror::Error;

use crate::diag::Diagnostics;

/// Ratio of specific heats used in the Mach-number guard.
const MACH_GAMMA: f64 = 1.4;
/// Specific gas constant of air, J/(kg K), used in the Mach-number guard.
const MACH_SPECIFIC_GAS_CONSTANT: f64 = 287.0;
/// The incompressible momentum closure is considered unreliable above this.
pub const MACH_WARN_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransportError {
    #[error("temperature {0} K must be finite and positive")]
    InvalidTemperature(f64),
    #[error("{name} must be finite and positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("expected {expected} values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("mole fractions sum to {0}, expected 1")]
    MoleFractionSum(f64),
    #[error("negative mole fraction {0}")]
    NegativeMoleFraction(f64),
    #[error("solid volume fraction {0} is too close to the packing limit 0.5")]
    SolidFractionTooHigh(f64),
    #[error("pressure drop {0} Pa must be finite")]
    InvalidPressureDrop(f64),
}

fn check_positive(name: &'static str, value: f64) -> Result<(), TransportError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(TransportError::NonPositive { name, value })
    }
}

/// Sutherland's law parameters for a pure gas.
#[derive(Debug, Clone)]
pub struct SutherlandParams {
    /// mu0, Pa s.
    pub reference_viscosity: f64,
    /// T0, K.
    pub reference_temperature: f64,
    /// S, K.
    pub sutherland_constant: f64,
}

/// Suspension mass density sum(M_i c_i), kg/m^3.
pub fn mixture_density(c: &[f64], molar_mass: &[f64]) -> Result<f64, TransportError> {
    if c.len() != molar_mass.len() {
        return Err(TransportError::ValueCount {
            expected: molar_mass.len(),
            got: c.len(),
        });
    }
    let mut rho = 0.0;
    for (ci, mi) in c.iter().zip(molar_mass) {
        rho += ci * mi;
    }
    Ok(rho)
}

/// Sutherland's law: mu(T) = mu0 (T/T0)^(3/2) (T0 + S)/(T + S).
pub fn sutherland_viscosity(params: &SutherlandParams, t: f64) -> Result<f64, TransportError> {
    if !(t.is_finite() && t > 0.0) {
        return Err(TransportError::InvalidTemperature(t));
    }
    let t0 = params.reference_temperature;
    let s = params.sutherland_constant;
    Ok(params.reference_viscosity * (t / t0).powf(1.5) * (t0 + s) / (t + s))
}

/// Wilke's mixing rule for the viscosity of a gas mixture.
///
/// `x` are mole fractions (must sum to 1 within 1e-9; values below -1e-9 are
/// rejected, round-off negatives are treated as zero), `mu` the pure-component
/// viscosities, `m` the molar masses.
pub fn wilke_viscosity(x: &[f64], mu: &[f64], m: &[f64]) -> Result<f64, TransportError> {
    let n = x.len();
    if mu.len() != n || m.len() != n {
        return Err(TransportError::ValueCount {
            expected: n,
            got: mu.len().min(m.len()),
        });
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(TransportError::MoleFractionSum(sum));
    }
    for &xi in x {
        if xi < -1e-9 {
            return Err(TransportError::NegativeMoleFraction(xi));
        }
    }
    for &v in mu {
        check_positive("component viscosity", v)?;
    }
    for &v in m {
        check_positive("component molar mass", v)?;
    }
    let mut out = 0.0;
    for i in 0..n {
        let xi = x[i].max(0.0);
        if xi == 0.0 {
            continue;
        }
        let mut denom = 0.0;
        for j in 0..n {
            let phi = (1.0 + (mu[i] / mu[j]).sqrt() * (m[j] / m[i]).powf(0.25)).powi(2)
                / (8.0 * (1.0 + m[i] / m[j])).sqrt();
            denom += x[j].max(0.0) * phi;
        }
        out += xi * mu[i] / denom;
    }
    Ok(out)
}

/// Einstein-style correction for a dilute solid suspension:
/// mu = mu_gas (1 + v_s/2) / (1 - 2 v_s). Valid only for v_s < 0.5.
pub fn suspension_viscosity(gas_viscosity: f64, solid_fraction: f64) -> Result<f64, TransportError> {
    check_positive("gas viscosity", gas_viscosity)?;
    if !solid_fraction.is_finite() || solid_fraction >= 0.5 {
        return Err(TransportError::SolidFractionTooHigh(solid_fraction));
    }
    Ok(gas_viscosity * (1.0 + solid_fraction / 2.0) / (1.0 - 2.0 * solid_fraction))
}

/// Interface velocity from the pressure drop across a cell interface,
/// inverting the Darcy-Weisbach relation with the Blasius friction factor.
///
/// `pressure_drop` is upstream minus downstream pressure; a positive drop
/// drives positive (downstream) flow and the law is odd in the drop.
pub fn darcy_weisbach_velocity(
    pressure_drop: f64,
    dz: f64,
    diameter: f64,
    viscosity: f64,
    density: f64,
) -> Result<f64, TransportError> {
    if !pressure_drop.is_finite() {
        return Err(TransportError::InvalidPressureDrop(pressure_drop));
    }
    check_positive("interface spacing", dz)?;
    check_positive("diameter", diameter)?;
    check_positive("viscosity", viscosity)?;
    check_positive("density", density)?;
    if pressure_drop == 0.0 {
        return Ok(0.0);
    }
    let magnitude = ((2.0 / 0.316)
        * (diameter.powi(5) / (viscosity * density.powi(3))).powf(0.25)
        * pressure_drop.abs()
        / dz)
        .powf(4.0 / 7.0);
    Ok(magnitude * pressure_drop.signum())
}

/// Mach number of an interface velocity against the ideal-gas sound speed.
pub fn mach_number(velocity: f64, t_gas: f64) -> f64 {
    velocity.abs() / (MACH_GAMMA * MACH_SPECIFIC_GAS_CONSTANT * t_gas).sqrt()
}

/// Counts a warning when the velocity leaves the incompressible regime.
/// Never fails: a high Mach number degrades accuracy but the model still
/// evaluates.
pub fn check_mach(velocity: f64, t_gas: f64, interface: usize, diag: &Diagnostics) -> f64 {
    let mach = mach_number(velocity, t_gas);
    if mach >= MACH_WARN_THRESHOLD {
        diag.record_mach_exceedance(mach, interface);
    }
    mach
}

/// Interface species fluxes: advection of the left-cell state plus Fickian
/// diffusion down the concentration gradient,
/// N_k = v c_left,k - D_k (c_right,k - c_left,k)/dz.
///
/// The advected state is always the left cell; under backflow this
/// approximation is flagged elsewhere rather than switching stencils.
pub fn species_flux(
    v: f64,
    c_left: &[f64],
    c_right: &[f64],
    diffusion: &[f64],
    dz: f64,
    out: &mut [f64],
) {
    debug_assert_eq!(c_left.len(), c_right.len());
    debug_assert_eq!(c_left.len(), diffusion.len());
    debug_assert_eq!(c_left.len(), out.len());
    for k in 0..c_left.len() {
        out[k] = v * c_left[k] - diffusion[k] * (c_right[k] - c_left[k]) / dz;
    }
}
