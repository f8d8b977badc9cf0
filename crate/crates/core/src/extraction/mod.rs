//! Parameter extraction from transfer, output and C–V sweeps.
//!
//! Every routine is a pure function of its input curves. Results carry the
//! numbers needed for a report entry plus fit diagnostics; [`pipeline`] turns
//! whole families into an [`ExtractionReport`].

pub mod pipeline;
pub mod report;

use thiserror::Error;

use crate::measurement::{CurveKind, DeviceGeometry, SweepCurve, SweepFamily};
use crate::numerics::{
    argmax_smoothed, cumtrapz, derivative, interp_linear, linfit, smooth_on, NumericsError,
    SmoothingSpec,
};

pub use report::{EntryError, ExtractionReport, ReportEntry, Unit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractionError {
    #[error("expected a {expected} curve, got {found}")]
    WrongKind { expected: CurveKind, found: CurveKind },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("no subthreshold region: {qualifying} qualifying samples, need at least 4")]
    NoSubthresholdRegion { qualifying: usize },
    #[error("OFF current {i_off} A is not positive; ON/OFF ratio undefined")]
    NonPositiveIOff { i_on: f64, i_off: f64 },
    #[error("capacitance rises only {ratio:.3}x, need at least 2x")]
    FlatCapacitance { ratio: f64 },
    #[error("area must be positive, got {0} cm^2")]
    NonPositiveArea(f64),
    #[error("only {samples} samples at or below {cap} V, need at least 3")]
    NoLinearRegion { samples: usize, cap: f64 },
    #[error("non-ohmic contact: intercept {intercept} A exceeds 5% of {max_current} A")]
    NonOhmicContact { intercept: f64, max_current: f64 },
    #[error("drain slope never falls to 10% of its initial value")]
    NoSaturation,
    #[error("current never crosses {level} A on the V_DS = {fixed_bias} V curve")]
    ThresholdNotCrossed { fixed_bias: f64, level: f64 },
    #[error("bias pair must satisfy low < high, got {low} V and {high} V")]
    InvalidBiasPair { low: f64, high: f64 },
    #[error("charge and transfer grids differ: {0}")]
    ChargeCurveMismatch(String),
    #[error("every point falls below the 1% charge guard")]
    AllPointsGuarded,
    #[error("family has no curves matching the request")]
    NoCurves,
}

impl ExtractionError {
    /// True for failures of the data or the numerics (as opposed to invalid
    /// requests).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Self::WrongKind { .. }
                | Self::NonPositiveArea(_)
                | Self::InvalidBiasPair { .. }
                | Self::ChargeCurveMismatch(_)
                | Self::NoCurves
        )
    }
}

pub type Result<T> = std::result::Result<T, ExtractionError>;

fn expect_kind(curve: &SweepCurve, kind: CurveKind) -> Result<()> {
    if curve.kind() == kind {
        Ok(())
    } else {
        Err(ExtractionError::WrongKind {
            expected: kind,
            found: curve.kind(),
        })
    }
}

fn index_of(x: &[f64], v: f64) -> usize {
    x.iter().position(|&xi| xi == v).expect("abscissa taken from the grid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmResult {
    /// Transconductance at every grid point, S.
    pub gm: Vec<f64>,
    /// Peak of the smoothed transconductance, S.
    pub peak: f64,
    pub vgs_at_peak: f64,
    /// Smoothed drain current the derivative was taken from.
    pub smoothed_current: Vec<f64>,
}

/// Transconductance dI_D/dV_GS of a transfer curve.
pub fn extract_gm(curve: &SweepCurve, spec: SmoothingSpec) -> Result<GmResult> {
    expect_kind(curve, CurveKind::Transfer)?;
    let x = curve.x();
    let smoothed_current = smooth_on(x, curve.y(), spec)?;
    let gm = derivative(x, &smoothed_current)?;
    let (vgs_at_peak, peak) = argmax_smoothed(x, &gm, spec)?;
    Ok(GmResult {
        gm,
        peak,
        vgs_at_peak,
        smoothed_current,
    })
}

/// Bounds of the automatic subthreshold window, relative to the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsOptions {
    /// Lower bound as a multiple of the smallest |I_D|.
    pub floor_factor: f64,
    /// Upper bound as a fraction of the largest I_D.
    pub ceiling_fraction: f64,
}

impl Default for SsOptions {
    fn default() -> Self {
        Self {
            floor_factor: 3.0,
            ceiling_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsResult {
    /// Steepest swing inside the window, mV/decade.
    pub ss: f64,
    pub vgs_at_min: f64,
    /// First and last gate voltage of the window.
    pub window: (f64, f64),
    pub samples: usize,
    /// Reciprocal log-slope at every grid point, mV/decade (infinite where
    /// the smoothed log-current is not increasing).
    pub swing: Vec<f64>,
}

pub fn extract_ss(curve: &SweepCurve, spec: SmoothingSpec) -> Result<SsResult> {
    extract_ss_with(curve, spec, SsOptions::default())
}

/// Subthreshold swing: the smallest reciprocal slope of log10 I_D over the
/// longest contiguous run where the smoothed log-current increases and I_D
/// sits between the noise floor and the ceiling.
pub fn extract_ss_with(curve: &SweepCurve, spec: SmoothingSpec, opts: SsOptions) -> Result<SsResult> {
    expect_kind(curve, CurveKind::Transfer)?;
    let (x, y) = (curve.x(), curve.y());
    let min_abs = y
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_abs.is_finite() {
        return Err(ExtractionError::NoSubthresholdRegion { qualifying: 0 });
    }
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (opts.floor_factor * min_abs, opts.ceiling_fraction * max);

    let log_i: Vec<f64> = y.iter().map(|&v| v.max(min_abs).log10()).collect();
    let slope = derivative(x, &smooth_on(x, &log_i, spec)?)?;
    let qualifies = |i: usize| y[i] >= lo && y[i] <= hi && slope[i] > 0.0;

    let (mut best, mut run_start) = (0..0, None);
    for i in 0..=y.len() {
        match (i < y.len() && qualifies(i), run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s > best.len() {
                    best = s..i;
                }
                run_start = None;
            }
            _ => {}
        }
    }
    if best.len() < 4 {
        return Err(ExtractionError::NoSubthresholdRegion {
            qualifying: best.len(),
        });
    }
    let swing: Vec<f64> = slope
        .iter()
        .map(|&s| if s > 0.0 { 1e3 / s } else { f64::INFINITY })
        .collect();
    let mut at = best.start;
    for i in best.clone() {
        if swing[i] < swing[at] {
            at = i;
        }
    }
    Ok(SsResult {
        ss: swing[at],
        vgs_at_min: x[at],
        window: (x[best.start], x[best.end - 1]),
        samples: best.len(),
        swing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnOff {
    pub i_on: f64,
    pub i_off: f64,
    pub ratio: f64,
    pub vgs_on: f64,
    pub vgs_off: f64,
}

/// ON and OFF currents at the ends of the gate sweep.
pub fn extract_on_off(curve: &SweepCurve) -> Result<OnOff> {
    expect_kind(curve, CurveKind::Transfer)?;
    let (x, y) = (curve.x(), curve.y());
    let n = y.len();
    let (i_on, i_off) = (y[n - 1], y[0]);
    if !(i_off > 0.0) {
        return Err(ExtractionError::NonPositiveIOff { i_on, i_off });
    }
    Ok(OnOff {
        i_on,
        i_off,
        ratio: i_on / i_off,
        vgs_on: x[n - 1],
        vgs_off: x[0],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvThreshold {
    pub vth: f64,
    /// Peak of the smoothed dC/dV_GS, F/V.
    pub max_slope: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub slope: Vec<f64>,
}

/// Threshold voltage at the steepest rise of the C–V curve.
pub fn extract_vth_cv(curve: &SweepCurve, spec: SmoothingSpec) -> Result<CvThreshold> {
    expect_kind(curve, CurveKind::Cv)?;
    let (x, y) = (curve.x(), curve.y());
    let c_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(c_max >= 2.0 * c_min) || !(c_max > 0.0) {
        return Err(ExtractionError::FlatCapacitance {
            ratio: c_max / c_min,
        });
    }
    let slope = derivative(x, &smooth_on(x, y, spec)?)?;
    let (vth, max_slope) = argmax_smoothed(x, &slope, spec)?;
    Ok(CvThreshold {
        vth,
        max_slope,
        c_min,
        c_max,
        slope,
    })
}

/// Channel charge per area against gate voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeCurve {
    pub vgs: Vec<f64>,
    /// C/cm².
    pub charge: Vec<f64>,
}

impl ChargeCurve {
    pub fn max(&self) -> f64 {
        self.charge.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation onto `grid`, which must lie inside the charge
    /// curve's gate range. Grid points that coincide with charge samples
    /// take those samples unchanged.
    pub fn resample_onto(&self, grid: &[f64]) -> Result<ChargeCurve> {
        let (lo, hi) = (self.vgs[0], self.vgs[self.vgs.len() - 1]);
        let tol = 1e-9 * (hi - lo);
        if let Some(&v) = grid.iter().find(|&&v| v < lo - tol || v > hi + tol) {
            return Err(ExtractionError::ChargeCurveMismatch(format!(
                "{v} V lies outside the charge range [{lo}, {hi}] V"
            )));
        }
        Ok(ChargeCurve {
            vgs: grid.to_vec(),
            charge: grid
                .iter()
                .map(|&v| interp_linear(&self.vgs, &self.charge, v))
                .collect(),
        })
    }
}

/// Q(V) = (1/area)·∫ C dV from the start of the sweep, C/cm².
pub fn integrate_charge(curve: &SweepCurve, area_cm2: f64) -> Result<ChargeCurve> {
    expect_kind(curve, CurveKind::Cv)?;
    if !(area_cm2 > 0.0) {
        return Err(ExtractionError::NonPositiveArea(area_cm2));
    }
    let q = cumtrapz(curve.x(), curve.y())?;
    Ok(ChargeCurve {
        vgs: curve.x().to_vec(),
        charge: q.into_iter().map(|v| v / area_cm2).collect(),
    })
}

/// [`integrate_charge`] over the gate area of `geometry`.
pub fn integrate_charge_over_gate(curve: &SweepCurve, geometry: &DeviceGeometry) -> Result<ChargeCurve> {
    integrate_charge(curve, geometry.gate_area_cm2())
}

/// Upper V_DS bound of the ohmic fit.
pub const LINEAR_REGION_CAP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ron {
    pub ron_ohm_um: f64,
    pub ron_ohm: f64,
    pub vgs_used: f64,
    pub intercept: f64,
    pub max_fitted_current: f64,
    pub rms_residual: f64,
    pub samples: usize,
    pub non_ohmic: bool,
}

impl Ron {
    pub fn check_ohmic(&self) -> Result<()> {
        if self.non_ohmic {
            Err(ExtractionError::NonOhmicContact {
                intercept: self.intercept,
                max_current: self.max_fitted_current,
            })
        } else {
            Ok(())
        }
    }
}

/// On-resistance from the ohmic part of the highest-V_GS output curve.
///
/// A fit whose intercept exceeds 5% of the largest fitted current sets
/// `non_ohmic`; the value is still returned.
pub fn extract_ron(family: &SweepFamily, geometry: &DeviceGeometry) -> Result<Ron> {
    if family.kind() != CurveKind::Output {
        return Err(ExtractionError::WrongKind {
            expected: CurveKind::Output,
            found: family.kind(),
        });
    }
    let curve = family.curves().last().ok_or(ExtractionError::NoCurves)?;
    let (x, y) = (curve.x(), curve.y());
    let samples = x.iter().take_while(|&&v| v <= LINEAR_REGION_CAP).count();
    if samples < 3 {
        return Err(ExtractionError::NoLinearRegion {
            samples,
            cap: LINEAR_REGION_CAP,
        });
    }
    let fit = linfit(x, y, 0..samples)?;
    let max_fitted_current = y[..samples].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let ron_ohm = 1.0 / fit.slope;
    Ok(Ron {
        ron_ohm_um: ron_ohm * geometry.width_um(),
        ron_ohm,
        vgs_used: curve.fixed_bias(),
        intercept: fit.intercept,
        max_fitted_current,
        rms_residual: fit.rms_residual,
        samples,
        non_ohmic: fit.intercept.abs() >= 0.05 * max_fitted_current,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knee {
    pub vsat: f64,
    /// Mean smoothed slope over the first three samples, S.
    pub initial_slope: f64,
    pub threshold: f64,
}

/// Knee voltage: first V_DS where the smoothed output slope drops to 10% of
/// its initial value.
pub fn extract_vsat(curve: &SweepCurve, spec: SmoothingSpec) -> Result<Knee> {
    expect_kind(curve, CurveKind::Output)?;
    let x = curve.x();
    let slope = derivative(x, &smooth_on(x, curve.y(), spec)?)?;
    let initial_slope = slope[..3].iter().sum::<f64>() / 3.0;
    if !(initial_slope > 0.0) {
        return Err(ExtractionError::NoSaturation);
    }
    let threshold = 0.1 * initial_slope;
    let idx = slope
        .iter()
        .position(|&s| s <= threshold)
        .ok_or(ExtractionError::NoSaturation)?;
    Ok(Knee {
        vsat: x[idx],
        initial_slope,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VthLinExtrap {
    /// Tangent intercept minus half the drain bias.
    pub vth: f64,
    pub intercept: f64,
    pub correction: f64,
    pub gm_peak: f64,
    pub vgs_at_peak: f64,
}

fn tangent_intercept(curve: &SweepCurve, spec: SmoothingSpec) -> Result<(f64, GmResult)> {
    let gm = extract_gm(curve, spec)?;
    let i = index_of(curve.x(), gm.vgs_at_peak);
    let intercept = gm.vgs_at_peak - gm.smoothed_current[i] / gm.peak;
    Ok((intercept, gm))
}

/// Threshold voltage by linear extrapolation of the tangent at peak g_m.
pub fn extract_vth_transfer(curve: &SweepCurve, spec: SmoothingSpec) -> Result<VthLinExtrap> {
    let (intercept, gm) = tangent_intercept(curve, spec)?;
    let correction = 0.5 * curve.fixed_bias();
    Ok(VthLinExtrap {
        vth: intercept - correction,
        intercept,
        correction,
        gm_peak: gm.peak,
        vgs_at_peak: gm.vgs_at_peak,
    })
}

/// How the per-curve threshold for DIBL is located.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiblMethod {
    /// Intercept of the tangent at peak g_m.
    MaxGmExtrapolation,
    /// Gate voltage where I_D first reaches the given current, A.
    ConstantCurrent { level: f64 },
}

impl DiblMethod {
    /// Constant-current criterion at 1 µA × W/L.
    pub fn constant_current_for(geometry: &DeviceGeometry) -> Self {
        Self::ConstantCurrent {
            level: 1e-6 * geometry.aspect_ratio(),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::MaxGmExtrapolation => "vth-shift-maxgm",
            Self::ConstantCurrent { .. } => "vth-shift-constant-current",
        }
    }
}

impl Default for DiblMethod {
    fn default() -> Self {
        Self::MaxGmExtrapolation
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dibl {
    /// mV/V.
    pub dibl: f64,
    pub vth_low: f64,
    pub vth_high: f64,
    pub vds_low: f64,
    pub vds_high: f64,
}

fn constant_current_vth(curve: &SweepCurve, level: f64) -> Result<f64> {
    let (x, y) = (curve.x(), curve.y());
    let not_crossed = ExtractionError::ThresholdNotCrossed {
        fixed_bias: curve.fixed_bias(),
        level,
    };
    if y[0] >= level {
        return Err(not_crossed);
    }
    let j = y.iter().position(|&v| v >= level).ok_or(not_crossed)?;
    let (y0, y1) = (y[j - 1], y[j]);
    // Interpolate in log-current when both samples are positive.
    let t = if y0 > 0.0 {
        (level / y0).ln() / (y1 / y0).ln()
    } else {
        (level - y0) / (y1 - y0)
    };
    Ok(x[j - 1] + t * (x[j] - x[j - 1]))
}

pub fn extract_dibl(low: &SweepCurve, high: &SweepCurve, spec: SmoothingSpec) -> Result<Dibl> {
    extract_dibl_with(low, high, spec, DiblMethod::default())
}

/// Threshold shift between two drain biases, mV/V.
pub fn extract_dibl_with(
    low: &SweepCurve,
    high: &SweepCurve,
    spec: SmoothingSpec,
    method: DiblMethod,
) -> Result<Dibl> {
    expect_kind(low, CurveKind::Transfer)?;
    expect_kind(high, CurveKind::Transfer)?;
    let (vds_low, vds_high) = (low.fixed_bias(), high.fixed_bias());
    if !(vds_low < vds_high) {
        return Err(ExtractionError::InvalidBiasPair {
            low: vds_low,
            high: vds_high,
        });
    }
    let vth = |c: &SweepCurve| match method {
        DiblMethod::MaxGmExtrapolation => tangent_intercept(c, spec).map(|(v, _)| v),
        DiblMethod::ConstantCurrent { level } => constant_current_vth(c, level),
    };
    let (vth_low, vth_high) = (vth(low)?, vth(high)?);
    Ok(Dibl {
        dibl: (vth_low - vth_high) / (vds_high - vds_low) * 1e3,
        vth_low,
        vth_high,
        vds_low,
        vds_high,
    })
}

/// Share of the peak charge below which mobility is not evaluated.
pub const CHARGE_GUARD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityCurve {
    /// Gate voltages that passed the charge guard.
    pub vgs: Vec<f64>,
    /// cm²/(V·s).
    pub mobility: Vec<f64>,
    pub peak: f64,
    pub vgs_at_peak: f64,
    pub vds: f64,
    pub guarded: usize,
}

/// Field-effect mobility μ = I_D·L / (W·Q·V_DS) on the transfer grid.
///
/// `charge` must be sampled on the same gate grid as `curve` (see
/// [`ChargeCurve::resample_onto`]).
pub fn extract_mobility(
    curve: &SweepCurve,
    charge: &ChargeCurve,
    geometry: &DeviceGeometry,
) -> Result<MobilityCurve> {
    expect_kind(curve, CurveKind::Transfer)?;
    let x = curve.x();
    if charge.vgs.len() != x.len() {
        return Err(ExtractionError::ChargeCurveMismatch(format!(
            "{} charge samples for {} transfer samples",
            charge.vgs.len(),
            x.len()
        )));
    }
    if let Some((a, b)) = x
        .iter()
        .zip(&charge.vgs)
        .find(|(a, b)| (*a - *b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(ExtractionError::ChargeCurveMismatch(format!(
            "gate {a} V paired with charge at {b} V"
        )));
    }
    let vds = curve.fixed_bias();
    let q_max = charge.max();
    let guard = CHARGE_GUARD * q_max;
    let scale = geometry.length_um() / (geometry.width_um() * vds);
    let (mut vgs, mut mobility) = (Vec::new(), Vec::new());
    for ((&v, &i), &q) in x.iter().zip(curve.y()).zip(&charge.charge) {
        if q > guard && q > 0.0 {
            vgs.push(v);
            mobility.push(i * scale / q);
        }
    }
    if mobility.is_empty() {
        return Err(ExtractionError::AllPointsGuarded);
    }
    let (idx, peak) = crate::numerics::argmax_first(&mobility);
    Ok(MobilityCurve {
        vgs_at_peak: vgs[idx],
        peak,
        guarded: x.len() - vgs.len(),
        vgs,
        mobility,
        vds,
    })
}

/// Peak mobility per drain bias, sorted by V_DS.
pub fn mobility_bias_trend(
    family: &SweepFamily,
    charge: &ChargeCurve,
    geometry: &DeviceGeometry,
) -> Result<Vec<(f64, f64)>> {
    family
        .curves()
        .iter()
        .map(|c| extract_mobility(c, charge, geometry).map(|m| (m.vds, m.peak)))
        .collect()
}
