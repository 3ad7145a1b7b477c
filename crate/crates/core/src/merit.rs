//! Closed-form feasibility calculus for mesoscopic OPA.
//!
//! All times are dimensionless `gt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HBAR: f64 = 1.054571817e-34;
pub const SPEED_OF_LIGHT: f64 = 299792458.0;

fn check_n(n: f64) -> Result<()> {
    if n.is_nan() || n < 1.0 {
        return Err(Error::Domain(format!("photon number n={n} must be >= 1")));
    }
    Ok(())
}

/// `log(G) / (2√n)`: time for the parametric gain to reach `G`.
pub fn gain_time(n: f64, gain: f64) -> Result<f64> {
    check_n(n)?;
    if gain.is_nan() || gain < 1.0 {
        return Err(Error::Domain(format!("gain G={gain} must be >= 1")));
    }
    Ok(gain.ln() / (2.0 * n.sqrt()))
}

/// `log(2√n) / (2√n)`: time for the non-Gaussian area to reach one.
pub fn tau_threshold(n: f64) -> Result<f64> {
    check_n(n)?;
    gain_time(n, 2.0 * n.sqrt())
}

/// `log(2√n ζ) / (2√n)`: time for the non-Gaussian area to reach `ζ`.
pub fn tau_threshold_for_area(n: f64, zeta: f64) -> Result<f64> {
    check_n(n)?;
    if zeta == 1.0 {
        return tau_threshold(n);
    }
    let arg = 2.0 * n.sqrt() * zeta;
    if arg.is_nan() || arg <= 1.0 {
        return Err(Error::Domain(format!("2√n·ζ = {arg} must exceed 1")));
    }
    Ok(arg.ln() / (2.0 * n.sqrt()))
}

/// Largest tolerable photon number `G_max² / 4`.
pub fn mesoscopic_bound(g_max: f64) -> f64 {
    g_max * g_max / 4.0
}

/// `log(2√n g/κ) / (2√n)`: enhanced decoherence time.
pub fn loss_time(n: f64, g_over_kappa: f64) -> Result<f64> {
    check_n(n)?;
    if g_over_kappa.is_nan() || g_over_kappa <= 0.0 {
        return Err(Error::Domain(format!("g/κ = {g_over_kappa} must be positive")));
    }
    let arg = 2.0 * n.sqrt() * g_over_kappa;
    if arg <= 1.0 {
        return Err(Error::Domain(format!("2√n·g/κ = {arg} must exceed 1")));
    }
    Ok(arg.ln() / (2.0 * n.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldilocksParams {
    pub n_grid: Vec<f64>,
    pub gt_grid: Vec<f64>,
    pub g_max: f64,
    pub g_over_kappa: f64,
    pub zeta_target: f64,
}

impl GoldilocksParams {
    /// Log-spaced `n` over `[n_min, n_max]`, linear `gt` over `[0, gt_max]`.
    pub fn log_grid(n_min: f64, n_max: f64, n_points: usize, gt_max: f64, gt_points: usize, g_max: f64, g_over_kappa: f64) -> Self {
        let (a, b) = (n_min.ln(), n_max.ln());
        let n_grid = (0..n_points)
            .map(|i| {
                if n_points == 1 {
                    n_min
                } else {
                    (a + (b - a) * i as f64 / (n_points - 1) as f64).exp()
                }
            })
            .collect();
        GoldilocksParams {
            n_grid,
            gt_grid: crate::conditioning::uniform_grid(0.0, gt_max, gt_points),
            g_max,
            g_over_kappa,
            zeta_target: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldilocksRegion {
    pub params: GoldilocksParams,
    /// Per `n`; NaN where the threshold is undefined.
    pub tau_th: Vec<f64>,
    pub t_gain: Vec<f64>,
    /// Per `n`; zero where the loss time is undefined.
    pub t_loss: Vec<f64>,
    /// Row-major, `feasible[i_n * gt_grid.len() + i_gt]`.
    pub feasible: Vec<bool>,
    pub domain_errors: Vec<String>,
}

/// `gt ≥ τ_th ∧ gt ≤ t_G ∧ τ_th ≤ t_loss`.
pub fn is_feasible(gt: f64, tau_th: f64, t_gain: f64, t_loss: f64) -> bool {
    gt >= tau_th && gt <= t_gain && tau_th <= t_loss
}

pub fn goldilocks_region(params: &GoldilocksParams) -> GoldilocksRegion {
    let mut errors = Vec::new();
    let mut tau_th = Vec::with_capacity(params.n_grid.len());
    let mut t_gain = Vec::with_capacity(params.n_grid.len());
    let mut t_loss = Vec::with_capacity(params.n_grid.len());
    for &n in &params.n_grid {
        tau_th.push(tau_threshold_for_area(n, params.zeta_target).unwrap_or_else(|e| {
            errors.push(format!("n={n}: {e}"));
            f64::NAN
        }));
        t_gain.push(gain_time(n, params.g_max).unwrap_or(f64::NAN));
        t_loss.push(loss_time(n, params.g_over_kappa).unwrap_or(0.0));
    }
    let mut feasible = Vec::with_capacity(params.n_grid.len() * params.gt_grid.len());
    for i in 0..params.n_grid.len() {
        for &gt in &params.gt_grid {
            feasible.push(is_feasible(gt, tau_th[i], t_gain[i], t_loss[i]));
        }
    }
    GoldilocksRegion { params: params.clone(), tau_th, t_gain, t_loss, feasible, domain_errors: errors }
}

/// Whether some `gt` is feasible at photon number `n`.
pub fn column_feasible_at(n: f64, params: &GoldilocksParams) -> bool {
    match (
        tau_threshold_for_area(n, params.zeta_target),
        gain_time(n, params.g_max),
        loss_time(n, params.g_over_kappa),
    ) {
        (Ok(tau), Ok(tg), Ok(tl)) => tau <= tg && tau <= tl,
        _ => false,
    }
}

/// Largest feasible `n` in `[n_lo, n_hi]` found by bisection on the
/// continuous feasibility test, independent of any grid.
pub fn max_feasible_n(params: &GoldilocksParams, n_lo: f64, n_hi: f64) -> Option<f64> {
    if column_feasible_at(n_hi, params) {
        return Some(n_hi);
    }
    if !column_feasible_at(n_lo, params) {
        return None;
    }
    let (mut lo, mut hi) = (n_lo, n_hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if column_feasible_at(mid, params) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

impl GoldilocksRegion {
    pub fn is_empty(&self) -> bool {
        !self.feasible.iter().any(|f| *f)
    }

    /// Whether some `gt` (not necessarily on the grid) is feasible at each `n`.
    pub fn column_feasible(&self) -> Vec<bool> {
        (0..self.params.n_grid.len())
            .map(|i| self.tau_th[i] <= self.t_gain[i] && self.tau_th[i] <= self.t_loss[i])
            .collect()
    }

    /// Largest grid `n` with a nonempty feasible interval.
    pub fn right_boundary(&self) -> Option<f64> {
        self.column_feasible()
            .iter()
            .zip(&self.params.n_grid)
            .filter(|(f, _)| **f)
            .map(|(_, n)| *n)
            .reduce(f64::max)
    }

    /// Largest grid `n` with a feasible grid point.
    pub fn mask_right_boundary(&self) -> Option<f64> {
        let m = self.params.gt_grid.len();
        self.params
            .n_grid
            .iter()
            .enumerate()
            .filter(|(i, _)| self.feasible[i * m..(i + 1) * m].iter().any(|f| *f))
            .map(|(_, n)| *n)
            .reduce(f64::max)
    }

    /// Columns `n,gt,tau_th,t_G,t_loss,feasible`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,gt,tau_th,t_G,t_loss,feasible\n");
        let m = self.params.gt_grid.len();
        for (i, n) in self.params.n_grid.iter().enumerate() {
            for (j, gt) in self.params.gt_grid.iter().enumerate() {
                out.push_str(&format!(
                    "{n:.16e},{gt:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                    self.tau_th[i],
                    self.t_gain[i],
                    self.t_loss[i],
                    u8::from(self.feasible[i * m + j])
                ));
            }
        }
        out
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "g_max": self.params.g_max,
            "g_over_kappa": self.params.g_over_kappa,
            "zeta_target": self.params.zeta_target,
            "n_points": self.params.n_grid.len(),
            "gt_points": self.params.gt_grid.len(),
            "mesoscopic_bound": mesoscopic_bound(self.params.g_max),
            "right_boundary": self.right_boundary(),
            "feasible_points": self.feasible.iter().filter(|f| **f).count(),
            "domain_errors": self.domain_errors,
            "time_unit": "gt",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEnergy {
    pub joules: f64,
    pub photons: f64,
}

/// `E = ħω (κ/g)²` with `ω = 2πc/λ`.
pub fn opo_threshold_energy(wavelength: f64, kappa_over_g: f64) -> Result<ThresholdEnergy> {
    if !(wavelength > 0.0) || !(kappa_over_g > 0.0) {
        return Err(Error::Domain(format!(
            "wavelength {wavelength} and κ/g {kappa_over_g} must be positive"
        )));
    }
    let photon = HBAR * 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / wavelength;
    let photons = kappa_over_g * kappa_over_g;
    Ok(ThresholdEnergy { joules: photon * photons, photons })
}
