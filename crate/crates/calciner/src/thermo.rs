//! Thermophysical property models: heat capacities, enthalpies, molar
//! volumes, and mixture closures.
//!
//! Solid species use a six-term empirical heat-capacity polynomial, gases and
//! quartz use piecewise Shomate correlations, and gas blends average their
//! component curves by mole fraction. Enthalpies are formation enthalpy plus
//! the integral of cp from 298.15 K. Outside a correlation's fitted range the
//! heat capacity is clamped to the nearest endpoint and the enthalpy
//! continues linearly, so h(T) stays continuous and strictly increasing;
//! every clamped evaluation is reported through [`Diagnostics`].
//!
//! Molar volumes are linear in temperature for solids and ideal-gas for
//! gases. Internal energies are u = h - P v.

use thiserror::Error;

use crate::diag::Diagnostics;

/// Universal gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314;

/// Reference temperature for enthalpy integrals, K.
pub const REFERENCE_TEMPERATURE: f64 = 298.15;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ThermoError {
    #[error("temperature {0} K must be finite and positive")]
    InvalidTemperature(f64),
    #[error("pressure {0} Pa must be finite and positive")]
    InvalidPressure(f64),
    #[error("negative concentration {value} mol/m^3 for {species}")]
    NegativeConcentration { species: String, value: f64 },
    #[error("expected {expected} species values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("invalid property definition: {0}")]
    InvalidDefinition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Solid,
    Gas,
}

/// A heat-capacity evaluation plus whether the query was outside the fitted
/// range (and therefore clamped).
#[derive(Debug, Clone, Copy)]
pub struct CpSample {
    pub value: f64,
    pub out_of_range: bool,
}

fn check_temperature(t: f64) -> Result<(), ThermoError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(ThermoError::InvalidTemperature(t))
    }
}

fn check_pressure(p: f64) -> Result<(), ThermoError> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(ThermoError::InvalidPressure(p))
    }
}

/// cp(T) = k1 + k2 T + k3 T^2 + k4/T + k5/T^2 + k6/sqrt(T), J/(mol K).
#[derive(Debug, Clone)]
pub struct PolynomialCp {
    coefficients: [f64; 6],
    t_min: f64,
    t_max: f64,
}

impl PolynomialCp {
    pub fn new(coefficients: [f64; 6], t_min: f64, t_max: f64) -> Result<Self, ThermoError> {
        if !coefficients.iter().all(|k| k.is_finite()) {
            return Err(ThermoError::InvalidDefinition(
                "polynomial heat-capacity coefficients must be finite".into(),
            ));
        }
        if !(t_min.is_finite() && t_max.is_finite() && 0.0 < t_min && t_min < t_max) {
            return Err(ThermoError::InvalidDefinition(format!(
                "polynomial heat-capacity range [{t_min}, {t_max}] K is not a positive interval"
            )));
        }
        Ok(Self {
            coefficients,
            t_min,
            t_max,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    fn cp_at(&self, t: f64) -> f64 {
        let [k1, k2, k3, k4, k5, k6] = self.coefficients;
        k1 + k2 * t + k3 * t * t + k4 / t + k5 / (t * t) + k6 / t.sqrt()
    }

    fn antiderivative(&self, t: f64) -> f64 {
        let [k1, k2, k3, k4, k5, k6] = self.coefficients;
        k1 * t + k2 * t * t / 2.0 + k3 * t.powi(3) / 3.0 + k4 * t.ln() - k5 / t
            + 2.0 * k6 * t.sqrt()
    }

    /// Antiderivative of the endpoint-clamped cp; linear outside the range.
    fn extended_antiderivative(&self, t: f64) -> f64 {
        if t < self.t_min {
            self.antiderivative(self.t_min) + self.cp_at(self.t_min) * (t - self.t_min)
        } else if t > self.t_max {
            self.antiderivative(self.t_max) + self.cp_at(self.t_max) * (t - self.t_max)
        } else {
            self.antiderivative(t)
        }
    }

    pub fn evaluate(&self, t: f64) -> CpSample {
        let out_of_range = t < self.t_min || t > self.t_max;
        CpSample {
            value: self.cp_at(t.clamp(self.t_min, self.t_max)),
            out_of_range,
        }
    }

    pub fn integral_from_reference(&self, t: f64) -> (f64, bool) {
        let value =
            self.extended_antiderivative(t) - self.extended_antiderivative(REFERENCE_TEMPERATURE);
        (value, t < self.t_min || t > self.t_max)
    }
}

/// One Shomate piece: cp(T) = A + B t + C t^2 + D t^3 + E/t^2 with t = T/1000.
#[derive(Debug, Clone)]
pub struct ShomatePiece {
    pub t_min: f64,
    pub t_max: f64,
    pub coefficients: [f64; 5],
}

impl ShomatePiece {
    fn cp_at(&self, t: f64) -> f64 {
        let [a, b, c, d, e] = self.coefficients;
        let x = t / 1000.0;
        a + b * x + c * x * x + d * x.powi(3) + e / (x * x)
    }

    fn antiderivative(&self, t: f64) -> f64 {
        let [a, b, c, d, e] = self.coefficients;
        let x = t / 1000.0;
        1000.0 * (a * x + b * x * x / 2.0 + c * x.powi(3) / 3.0 + d * x.powi(4) / 4.0 - e / x)
    }
}

/// Contiguous sequence of Shomate pieces forming one cp(T) curve.
#[derive(Debug, Clone)]
pub struct ShomateCurve {
    pieces: Vec<ShomatePiece>,
    /// Integral of cp from the curve start to the start of each piece.
    offsets: Vec<f64>,
    /// Integral of cp over the whole fitted range.
    total: f64,
}

impl ShomateCurve {
    pub fn new(pieces: Vec<ShomatePiece>) -> Result<Self, ThermoError> {
        if pieces.is_empty() {
            return Err(ThermoError::InvalidDefinition(
                "Shomate curve needs at least one piece".into(),
            ));
        }
        for p in &pieces {
            if !p.coefficients.iter().all(|c| c.is_finite()) {
                return Err(ThermoError::InvalidDefinition(
                    "Shomate coefficients must be finite".into(),
                ));
            }
            if !(p.t_min.is_finite() && p.t_max.is_finite() && 0.0 < p.t_min && p.t_min < p.t_max)
            {
                return Err(ThermoError::InvalidDefinition(format!(
                    "Shomate piece range [{}, {}] K is not a positive interval",
                    p.t_min, p.t_max
                )));
            }
        }
        for w in pieces.windows(2) {
            let gap = (w[1].t_min - w[0].t_max).abs();
            if gap > 1e-9 * w[0].t_max {
                return Err(ThermoError::InvalidDefinition(format!(
                    "Shomate pieces are not contiguous: piece ends at {} K, next starts at {} K",
                    w[0].t_max, w[1].t_min
                )));
            }
        }
        let mut offsets = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for p in &pieces {
            offsets.push(acc);
            acc += p.antiderivative(p.t_max) - p.antiderivative(p.t_min);
        }
        Ok(Self {
            pieces,
            offsets,
            total: acc,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.pieces[0].t_min, self.pieces[self.pieces.len() - 1].t_max)
    }

    fn piece_index(&self, t: f64) -> usize {
        for (i, p) in self.pieces.iter().enumerate() {
            if t <= p.t_max {
                return i;
            }
        }
        self.pieces.len() - 1
    }

    pub fn evaluate(&self, t: f64) -> CpSample {
        let (lo, hi) = self.range();
        let tc = t.clamp(lo, hi);
        let piece = &self.pieces[self.piece_index(tc)];
        CpSample {
            value: piece.cp_at(tc),
            out_of_range: t < lo || t > hi,
        }
    }

    /// Antiderivative of the endpoint-clamped cp, zero at the curve start.
    fn extended_antiderivative(&self, t: f64) -> f64 {
        let (lo, hi) = self.range();
        if t < lo {
            return self.pieces[0].cp_at(lo) * (t - lo);
        }
        if t > hi {
            let last = &self.pieces[self.pieces.len() - 1];
            return self.total + last.cp_at(hi) * (t - hi);
        }
        let i = self.piece_index(t);
        let piece = &self.pieces[i];
        self.offsets[i] + (piece.antiderivative(t) - piece.antiderivative(piece.t_min))
    }

    pub fn integral_from_reference(&self, t: f64) -> (f64, bool) {
        let (lo, hi) = self.range();
        let value =
            self.extended_antiderivative(t) - self.extended_antiderivative(REFERENCE_TEMPERATURE);
        (value, t < lo || t > hi)
    }
}

/// One mole-fraction-weighted component of a gas blend's cp curve.
#[derive(Debug, Clone)]
pub struct BlendComponent {
    pub mole_fraction: f64,
    pub curve: ShomateCurve,
}

#[derive(Debug, Clone)]
pub enum CpModel {
    Polynomial(PolynomialCp),
    Shomate(ShomateCurve),
    Blend(Vec<BlendComponent>),
}

impl CpModel {
    pub fn evaluate(&self, t: f64) -> CpSample {
        match self {
            CpModel::Polynomial(p) => p.evaluate(t),
            CpModel::Shomate(s) => s.evaluate(t),
            CpModel::Blend(parts) => {
                let mut value = 0.0;
                let mut out_of_range = false;
                for part in parts {
                    let sample = part.curve.evaluate(t);
                    value += part.mole_fraction * sample.value;
                    out_of_range |= sample.out_of_range;
                }
                CpSample {
                    value,
                    out_of_range,
                }
            }
        }
    }

    /// Integral of the clamped cp from the reference temperature to `t`,
    /// plus whether any part of the evaluation was out of range.
    pub fn integral_from_reference(&self, t: f64) -> (f64, bool) {
        match self {
            CpModel::Polynomial(p) => p.integral_from_reference(t),
            CpModel::Shomate(s) => s.integral_from_reference(t),
            CpModel::Blend(parts) => {
                let mut value = 0.0;
                let mut out_of_range = false;
                for part in parts {
                    let (integral, oor) = part.curve.integral_from_reference(t);
                    value += part.mole_fraction * integral;
                    out_of_range |= oor;
                }
                (value, out_of_range)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum VolumeModel {
    /// v(T) = v1 + v2 T, for condensed phases.
    Linear { v1: f64, v2: f64 },
    /// v(T, P) = R T / P.
    IdealGas,
}

impl VolumeModel {
    fn evaluate(&self, t: f64, p: f64) -> Result<f64, ThermoError> {
        match self {
            VolumeModel::Linear { v1, v2 } => Ok(v1 + v2 * t),
            VolumeModel::IdealGas => {
                check_pressure(p)?;
                Ok(GAS_CONSTANT * t / p)
            }
        }
    }
}

/// Complete property set for one species.
#[derive(Debug, Clone)]
pub struct SpeciesThermo {
    pub name: String,
    pub phase: Phase,
    /// kg/mol.
    pub molar_mass: f64,
    /// J/mol at 298.15 K.
    pub formation_enthalpy: f64,
    pub cp: CpModel,
    pub volume: VolumeModel,
}

impl SpeciesThermo {
    /// J/(mol K); counts a warning when `t` is outside the fitted range.
    pub fn heat_capacity(&self, t: f64, diag: &Diagnostics) -> Result<f64, ThermoError> {
        check_temperature(t)?;
        let sample = self.cp.evaluate(t);
        if sample.out_of_range {
            diag.record_heat_capacity_clamp(&self.name, t);
        }
        Ok(sample.value)
    }

    /// J/mol: formation enthalpy plus the cp integral from 298.15 K.
    pub fn molar_enthalpy(&self, t: f64, diag: &Diagnostics) -> Result<f64, ThermoError> {
        check_temperature(t)?;
        let (integral, out_of_range) = self.cp.integral_from_reference(t);
        if out_of_range {
            diag.record_heat_capacity_clamp(&self.name, t);
        }
        Ok(self.formation_enthalpy + integral)
    }

    /// m^3/mol.
    pub fn molar_volume(&self, t: f64, p: f64) -> Result<f64, ThermoError> {
        check_temperature(t)?;
        self.volume.evaluate(t, p)
    }

    /// J/mol: u = h - P v.
    pub fn molar_internal_energy(
        &self,
        t: f64,
        p: f64,
        diag: &Diagnostics,
    ) -> Result<f64, ThermoError> {
        let h = self.molar_enthalpy(t, diag)?;
        let v = self.molar_volume(t, p)?;
        Ok(h - p * v)
    }
}

fn ensure_len(table: &[SpeciesThermo], values: &[f64]) -> Result<(), ThermoError> {
    if table.len() == values.len() {
        Ok(())
    } else {
        Err(ThermoError::ValueCount {
            expected: table.len(),
            got: values.len(),
        })
    }
}

fn check_concentrations(table: &[SpeciesThermo], c: &[f64]) -> Result<(), ThermoError> {
    ensure_len(table, c)?;
    for (sp, &ci) in table.iter().zip(c) {
        if ci < 0.0 {
            return Err(ThermoError::NegativeConcentration {
                species: sp.name.clone(),
                value: ci,
            });
        }
    }
    Ok(())
}

/// Sum of w_i cp_i(T); weights may be any reals, zero weights are skipped.
pub(crate) fn weighted_heat_capacity(
    table: &[SpeciesThermo],
    t: f64,
    weights: &[f64],
    diag: &Diagnostics,
) -> Result<f64, ThermoError> {
    ensure_len(table, weights)?;
    check_temperature(t)?;
    let mut acc = 0.0;
    for (sp, &w) in table.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let sample = sp.cp.evaluate(t);
        if sample.out_of_range {
            diag.record_heat_capacity_clamp(&sp.name, t);
        }
        acc += w * sample.value;
    }
    Ok(acc)
}

/// Sum of w_i h_i(T); weights may be any reals, zero weights are skipped.
pub(crate) fn weighted_enthalpy(
    table: &[SpeciesThermo],
    t: f64,
    weights: &[f64],
    diag: &Diagnostics,
) -> Result<f64, ThermoError> {
    ensure_len(table, weights)?;
    check_temperature(t)?;
    let mut acc = 0.0;
    for (sp, &w) in table.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let (integral, out_of_range) = sp.cp.integral_from_reference(t);
        if out_of_range {
            diag.record_heat_capacity_clamp(&sp.name, t);
        }
        acc += w * (sp.formation_enthalpy + integral);
    }
    Ok(acc)
}

/// Sum of w_i v_i(T, P); zero weights are skipped, so `p` only needs to be
/// valid when a gas species carries weight.
pub(crate) fn weighted_volume(
    table: &[SpeciesThermo],
    t: f64,
    p: f64,
    weights: &[f64],
) -> Result<f64, ThermoError> {
    ensure_len(table, weights)?;
    check_temperature(t)?;
    let mut acc = 0.0;
    for (sp, &w) in table.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        acc += w * sp.volume.evaluate(t, p)?;
    }
    Ok(acc)
}

/// Volumetric mixture enthalpy sum(c_i h_i(T)), J/m^3.
pub fn mixture_enthalpy(
    table: &[SpeciesThermo],
    t: f64,
    c: &[f64],
    diag: &Diagnostics,
) -> Result<f64, ThermoError> {
    check_concentrations(table, c)?;
    weighted_enthalpy(table, t, c, diag)
}

/// Mixture volume fraction sum(c_i v_i(T, P)), dimensionless.
pub fn mixture_volume(
    table: &[SpeciesThermo],
    t: f64,
    p: f64,
    c: &[f64],
) -> Result<f64, ThermoError> {
    check_concentrations(table, c)?;
    weighted_volume(table, t, p, c)
}

/// Volumetric mixture internal energy sum(c_i h_i) - P sum(c_i v_i), J/m^3.
pub fn mixture_internal_energy(
    table: &[SpeciesThermo],
    t: f64,
    p: f64,
    c: &[f64],
    diag: &Diagnostics,
) -> Result<f64, ThermoError> {
    check_concentrations(table, c)?;
    check_pressure(p)?;
    let h = weighted_enthalpy(table, t, c, diag)?;
    let v = weighted_volume(table, t, p, c)?;
    Ok(h - p * v)
}

/// Enthalpy carried by molar fluxes: sum(n_i h_i(T)), W/m^2. Fluxes are
/// signed, so no sign validation is applied.
pub fn enthalpy_flux(
    table: &[SpeciesThermo],
    t: f64,
    molar_fluxes: &[f64],
    diag: &Diagnostics,
) -> Result<f64, ThermoError> {
    ensure_len(table, molar_fluxes)?;
    weighted_enthalpy(table, t, molar_fluxes, diag)
}
