//! Constrained grid searches over the frame split `α` and the push arrival
//! rate `λ`.
//!
//! A cell `(α, λ)` is feasible when both `γ_w` and `γ_u` reach `γ_th`.
//! [`lambda_max`] reports the largest rate with at least one feasible split,
//! [`alpha_opt`] the feasible split with the least pull energy at a given
//! rate, and [`energy_ratio`] compares that energy with Round-Robin.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::metrics::{self, CoexistenceReport, MetricInputs, SplitKernel};
use crate::model::{
    make_frame_split, push_activity_probability, wake_probability, QueryRange, SystemConfig,
};
use crate::sim;

/// Energies closer than this count as a tie.
pub const ENERGY_TIE: f64 = 1e-12;

/// `first * unit, ..., last * unit` built from integer indices, so each
/// value is the correctly rounded multiple rather than a running sum.
pub fn index_grid(first: u32, last: u32, unit_num: f64, unit_den: f64) -> Vec<f64> {
    (first..=last).map(|k| k as f64 * unit_num / unit_den).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub alpha_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub gamma_th: f64,
}

impl GridSpec {
    pub fn new(alpha_values: Vec<f64>, lambda_values: Vec<f64>, gamma_th: f64) -> Result<Self> {
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if alpha_values.is_empty() || lambda_values.is_empty() {
            return domain("grid axes must not be empty");
        }
        if !sorted(&alpha_values) || !sorted(&lambda_values) {
            return domain("grid values must be strictly ascending");
        }
        if alpha_values.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return domain("alpha values must lie in [0, 1]");
        }
        if lambda_values.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return domain("lambda values must be >= 0");
        }
        if !(0.0..=1.0).contains(&gamma_th) {
            return domain(format!("gamma_th must lie in [0, 1], got {gamma_th}"));
        }
        Ok(Self {
            alpha_values,
            lambda_values,
            gamma_th,
        })
    }

    /// `α ∈ {0, 0.05, ..., 1}`, `λ ∈ {0.005, 0.010, ..., 0.050}`.
    pub fn standard(gamma_th: f64) -> Result<Self> {
        Self::new(
            index_grid(0, 20, 1.0, 20.0),
            index_grid(1, 10, 5.0, 1000.0),
            gamma_th,
        )
    }

    pub fn with_lambdas(&self, lambda_values: Vec<f64>) -> Result<Self> {
        Self::new(self.alpha_values.clone(), lambda_values, self.gamma_th)
    }

    pub fn feasible(&self, report: &CoexistenceReport) -> bool {
        report.gamma_w >= self.gamma_th && report.gamma_u >= self.gamma_th
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub alpha: f64,
    pub lambda: f64,
    pub report: CoexistenceReport,
    pub feasible: bool,
}

/// Every `(α, λ)` cell of a grid, stored λ-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: GridSpec,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, alpha_index: usize, lambda_index: usize) -> &SweepCell {
        &self.cells[lambda_index * self.grid.alpha_values.len() + alpha_index]
    }

    /// Cells sharing the rate `lambda_values[lambda_index]`, by ascending α.
    pub fn row(&self, lambda_index: usize) -> &[SweepCell] {
        let n = self.grid.alpha_values.len();
        &self.cells[lambda_index * n..(lambda_index + 1) * n]
    }
}

/// How sweep cells are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluator {
    #[default]
    Analytic,
    /// Monte Carlo estimates; meant for cross-checking the analytic sweep.
    Simulated { frames: usize, master_seed: u64 },
}

pub fn sweep(config: &SystemConfig, range: &QueryRange, grid: &GridSpec) -> Result<SweepResult> {
    sweep_with(config, range, grid, Evaluator::Analytic)
}

pub fn sweep_with(
    config: &SystemConfig,
    range: &QueryRange,
    grid: &GridSpec,
    evaluator: Evaluator,
) -> Result<SweepResult> {
    let p_wake = wake_probability(&config.observation_model(), range)?;
    let slots = config.slots_per_frame();
    // One column per α; each column reuses its kernel for every λ.
    let columns: Vec<Vec<CoexistenceReport>> = grid
        .alpha_values
        .par_iter()
        .map(|&alpha| -> Result<Vec<CoexistenceReport>> {
            match evaluator {
                Evaluator::Analytic => {
                    let kernel = SplitKernel::new(config, make_frame_split(alpha, slots)?)?;
                    Ok(grid
                        .lambda_values
                        .iter()
                        .map(|&l| kernel.evaluate(p_wake, push_activity_probability(l, slots)))
                        .collect())
                }
                Evaluator::Simulated {
                    frames,
                    master_seed,
                } => grid
                    .lambda_values
                    .iter()
                    .map(|&l| {
                        let cfg = config.with(|p| p.arrival_rate = l)?;
                        let est = sim::run_campaign(&cfg, range, alpha, frames, master_seed)?;
                        Ok(CoexistenceReport {
                            gamma_w: est.gamma_w.mean,
                            gamma_u: est.gamma_u.mean,
                            e_tot: est.e_tot.mean,
                        })
                    })
                    .collect(),
            }
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(grid.alpha_values.len() * grid.lambda_values.len());
    for (li, &lambda) in grid.lambda_values.iter().enumerate() {
        for (ai, &alpha) in grid.alpha_values.iter().enumerate() {
            let report = columns[ai][li];
            cells.push(SweepCell {
                alpha,
                lambda,
                report,
                feasible: grid.feasible(&report),
            });
        }
    }
    Ok(SweepResult {
        grid: grid.clone(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMax {
    /// Zero when no cell is feasible.
    pub lambda_max: f64,
    /// Splits feasible at `lambda_max`; empty for Round-Robin or when
    /// nothing is feasible.
    pub feasible_alphas: Vec<f64>,
}

impl LambdaMax {
    fn none() -> Self {
        Self {
            lambda_max: 0.0,
            feasible_alphas: Vec::new(),
        }
    }
}

/// Largest grid rate for which some grid split meets both constraints.
pub fn lambda_max(config: &SystemConfig, range: &QueryRange, grid: &GridSpec) -> Result<LambdaMax> {
    Ok(lambda_max_of(&sweep(config, range, grid)?))
}

pub fn lambda_max_of(result: &SweepResult) -> LambdaMax {
    for li in (0..result.grid.lambda_values.len()).rev() {
        let alphas: Vec<f64> = result
            .row(li)
            .iter()
            .filter(|c| c.feasible)
            .map(|c| c.alpha)
            .collect();
        if !alphas.is_empty() {
            return LambdaMax {
                lambda_max: result.grid.lambda_values[li],
                feasible_alphas: alphas,
            };
        }
    }
    LambdaMax::none()
}

/// Round-Robin counterpart of [`lambda_max`]. Pull accuracy is always 1, so
/// only the push constraint matters and `α` plays no role.
pub fn rr_lambda_max(config: &SystemConfig, grid: &GridSpec) -> Result<LambdaMax> {
    for &lambda in grid.lambda_values.iter().rev() {
        let cfg = config.with(|p| p.arrival_rate = lambda)?;
        let report = CoexistenceReport {
            gamma_w: 1.0,
            gamma_u: metrics::rr_gamma_u(&cfg)?,
            e_tot: metrics::rr_pull_energy(&cfg)?,
        };
        if grid.feasible(&report) {
            return Ok(LambdaMax {
                lambda_max: lambda,
                feasible_alphas: Vec::new(),
            });
        }
    }
    Ok(LambdaMax::none())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaOpt {
    pub alpha: f64,
    /// Joules.
    pub e_tot: f64,
    pub report: CoexistenceReport,
}

/// Feasible split with the least pull energy at rate `lambda`; `None` when no
/// grid split meets both constraints. Ties go to the smaller `α`.
pub fn alpha_opt(
    config: &SystemConfig,
    range: &QueryRange,
    lambda: f64,
    grid: &GridSpec,
) -> Result<Option<AlphaOpt>> {
    let result = sweep(config, range, &grid.with_lambdas(vec![lambda])?)?;
    let mut candidates: Vec<&SweepCell> = result.row(0).iter().filter(|c| c.feasible).collect();
    // Stable sort keeps ascending α within an energy tie.
    candidates.sort_by(|a, b| a.report.e_tot.total_cmp(&b.report.e_tot));
    let mut ordered: Vec<&SweepCell> = Vec::with_capacity(candidates.len());
    for c in candidates {
        match ordered.last() {
            Some(prev) if (c.report.e_tot - prev.report.e_tot).abs() <= ENERGY_TIE && c.alpha < prev.alpha => {
                let at = ordered.len() - 1;
                ordered.insert(at, c);
            }
            _ => ordered.push(c),
        }
    }

    let cfg = config.with(|p| p.arrival_rate = lambda)?;
    for c in ordered {
        let report = metrics::evaluate(&MetricInputs::new(cfg, *range, c.alpha)?)?;
        if grid.feasible(&report) {
            return Ok(Some(AlphaOpt {
                alpha: c.alpha,
                e_tot: report.e_tot,
                report,
            }));
        }
    }
    Ok(None)
}

/// Pull energy at the optimal split over Round-Robin pull energy.
pub fn energy_ratio(
    config: &SystemConfig,
    range: &QueryRange,
    lambda: f64,
    grid: &GridSpec,
) -> Result<Option<f64>> {
    let rr = metrics::rr_pull_energy(config)?;
    if rr == 0.0 {
        return domain("energy ratio is undefined without pull nodes");
    }
    Ok(alpha_opt(config, range, lambda, grid)?.map(|o| o.e_tot / rr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn standard_grid_values() {
        let g = GridSpec::standard(0.8).unwrap();
        assert_eq!(g.alpha_values.len(), 21);
        assert_eq!(g.alpha_values[0], 0.0);
        assert_eq!(g.alpha_values[7], 0.35);
        assert_eq!(g.alpha_values[20], 1.0);
        assert_eq!(g.lambda_values.len(), 10);
        assert_eq!(g.lambda_values[0], 0.005);
        assert_eq!(g.lambda_values[4], 0.025);
        assert_eq!(g.lambda_values[9], 0.05);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![0.5, 0.2], vec![0.01], 0.8).is_err());
        assert!(GridSpec::new(vec![0.2, 1.5], vec![0.01], 0.8).is_err());
        assert!(GridSpec::new(vec![0.2], vec![-0.01], 0.8).is_err());
        assert!(GridSpec::new(vec![], vec![0.01], 0.8).is_err());
        assert!(GridSpec::new(vec![0.2], vec![0.01], 1.2).is_err());
    }

    #[test]
    fn zero_threshold_accepts_everything() {
        let cfg = SystemConfig::default();
        let r = lambda_max(&cfg, &QueryRange::new(0.94, 0.98).unwrap(), &GridSpec::standard(0.0).unwrap())
            .unwrap();
        assert_eq!(r.lambda_max, 0.05);
        assert_eq!(r.feasible_alphas.len(), 21);
    }

    #[test]
    fn impossible_threshold_gives_zero() {
        let cfg = SystemConfig::default();
        let grid = GridSpec::standard(1.0).unwrap();
        let r = lambda_max(&cfg, &QueryRange::new(0.6, 0.9).unwrap(), &grid).unwrap();
        assert_eq!(r, LambdaMax::none());
        assert!(alpha_opt(&cfg, &QueryRange::new(0.6, 0.9).unwrap(), 0.01, &grid)
            .unwrap()
            .is_none());
    }

    #[test]
    fn energy_ratio_guards() {
        let grid = GridSpec::standard(0.8).unwrap();
        let range = QueryRange::new(0.94, 0.98).unwrap();
        let over = SystemConfig::default().with(|p| p.n_pull = 51).unwrap();
        assert!(matches!(energy_ratio(&over, &range, 0.01, &grid), Err(Error::Infeasible(_))));
        let none = SystemConfig::default().with(|p| p.n_pull = 0).unwrap();
        assert!(energy_ratio(&none, &range, 0.01, &grid).is_err());
    }

    #[test]
    fn sweep_layout() {
        let cfg = SystemConfig::default();
        let grid = GridSpec::new(vec![0.0, 0.5, 1.0], vec![0.01, 0.02], 0.5).unwrap();
        let r = sweep(&cfg, &QueryRange::new(0.6, 0.9).unwrap(), &grid).unwrap();
        assert_eq!(r.cells.len(), 6);
        let c = r.cell(1, 1);
        assert_eq!((c.alpha, c.lambda), (0.5, 0.02));
        assert_eq!(c.feasible, c.report.gamma_w >= 0.5 && c.report.gamma_u >= 0.5);
    }
}
