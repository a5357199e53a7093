//! Noise-scale calibration: the privacy-constrained problem (closed form
//! via the Cauchy inequality), the utility-constrained problem (dual
//! multiplicative updates with a certified gap), and per-day rescaling.

use crate::accounting::{mechanism_budget, BoundedScales, Budget};
use crate::error::{Error, Result};
use crate::workload::QueryWorkload;

/// Budget fraction spent on days no query ever touches; their noise is set
/// effectively infinite so they cost neither budget nor utility.
const DEGENERATE_DAY_BUDGET_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleObjective {
    /// Minimize the weighted sum of query variances under a budget cap.
    WeightedVarianceSum,
    /// Minimize the budget under per-query variance caps.
    MinBudgetUnderVarianceCaps,
}

/// Initial per-day noise scales at unit contribution bounds, together with
/// the budget they consume.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePlan {
    pub sigma_bar: Vec<f64>,
    pub objective: ScaleObjective,
    pub rho1: f64,
    /// Achieved objective value at the initial scales.
    pub objective_value: f64,
}

impl ScalePlan {
    /// Multiply every scale by a common factor so the plan consumes
    /// exactly `rho1` at unit bounds.
    pub fn rescaled_to_budget(&self, rho1: Budget) -> Result<ScalePlan> {
        let r_bar = vec![1.0; self.sigma_bar.len()];
        let current = mechanism_budget(&BoundedScales::new(r_bar, self.sigma_bar.clone())?)?;
        let factor = (current.rho() / rho1.rho()).sqrt();
        Ok(ScalePlan {
            sigma_bar: self.sigma_bar.iter().map(|s| s * factor).collect(),
            objective: self.objective,
            rho1: rho1.rho(),
            objective_value: self.objective_value * factor * factor,
        })
    }

    /// `day,sigma_bar` CSV for inspection.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("day,sigma_bar\n");
        for (i, s) in self.sigma_bar.iter().enumerate() {
            out.push_str(&format!("{i},{s}\n"));
        }
        out
    }
}

/// Per-day quadratic coefficients a_i = sum_j gamma_j^2 Q[j,i]^2 of the
/// weighted variance objective. For prefix sums this reduces to the
/// tail sums a_i = sum_{j >= i} gamma_j^2.
pub fn variance_coefficients(q: &QueryWorkload, gamma: &[f64]) -> Vec<f64> {
    let n = q.n();
    let mut a = vec![0.0; n];
    for (row, &g) in q.rows().iter().zip(gamma) {
        for (i, &v) in row.iter().enumerate() {
            a[i] += g * g * v * v;
        }
    }
    a
}

/// Closed-form solution of the privacy-constrained calibration:
/// minimize sum_i a_i sigma_i^2 subject to sum_i r_i^2 / sigma_i^2 <= 2 rho1,
/// giving sigma_i^2 = (r_i / sqrt(a_i)) * (sum_t r_t sqrt(a_t)) / (2 rho1).
pub fn init_privacy_constrained(
    q: &QueryWorkload,
    gamma: &[f64],
    r_bar: &[f64],
    rho1: Budget,
) -> Result<ScalePlan> {
    let n = q.n();
    if gamma.len() != q.m() {
        return Err(Error::Domain("gamma length must equal query count".into()));
    }
    if r_bar.len() != n || r_bar.iter().any(|&r| r <= 0.0 || !r.is_finite()) {
        return Err(Error::Domain("r_bar must be positive, length n".into()));
    }
    if gamma.iter().any(|&g| !g.is_finite()) {
        return Err(Error::Domain("non-finite gamma".into()));
    }
    let a = variance_coefficients(q, gamma);
    let degenerate: Vec<usize> = (0..n).filter(|&i| a[i] == 0.0).collect();

    // Degenerate days get a sliver of budget; the Cauchy solution splits
    // the rest.
    let eps_total = if degenerate.is_empty() {
        0.0
    } else {
        DEGENERATE_DAY_BUDGET_FRACTION * rho1.rho()
    };
    let eps_each = if degenerate.is_empty() {
        0.0
    } else {
        eps_total / degenerate.len() as f64
    };
    let rho_main = rho1.rho() - eps_total;

    let cross: f64 = (0..n)
        .filter(|&i| a[i] > 0.0)
        .map(|i| r_bar[i] * a[i].sqrt())
        .sum();
    let mut sigma_bar = vec![0.0; n];
    let mut objective_value = 0.0;
    for i in 0..n {
        if a[i] > 0.0 {
            let sigma_sq = (r_bar[i] / a[i].sqrt()) * cross / (2.0 * rho_main);
            sigma_bar[i] = sigma_sq.sqrt();
            objective_value += a[i] * sigma_sq;
        } else {
            // r^2 / sigma^2 = 2 * eps_each
            sigma_bar[i] = (r_bar[i] * r_bar[i] / (2.0 * eps_each)).sqrt();
        }
    }
    Ok(ScalePlan {
        sigma_bar,
        objective: ScaleObjective::WeightedVarianceSum,
        rho1: rho1.rho(),
        objective_value,
    })
}

/// Full output of the utility-constrained solve, including the dual point
/// certifying optimality.
#[derive(Debug, Clone)]
pub struct UtilitySolution {
    /// Optimal variances t_i = sigma_i^2.
    pub sigma_sq: Vec<f64>,
    /// Dual multipliers, one per variance cap.
    pub dual: Vec<f64>,
    /// Certified relative duality gap.
    pub gap: f64,
    /// Objective sum_i r_i^2 / sigma_i^2 (twice the budget).
    pub objective: f64,
}

impl UtilitySolution {
    /// Worst normalized KKT residual: constraint violation plus
    /// complementary slackness (stationarity holds by construction, since
    /// each primal iterate minimizes the Lagrangian at the current dual).
    pub fn kkt_residual(&self, q: &QueryWorkload, caps: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, row) in q.rows().iter().enumerate() {
            let cj: f64 = row
                .iter()
                .zip(&self.sigma_sq)
                .map(|(&qv, &t)| qv * qv * t)
                .sum();
            let violation = (cj - caps[j]).max(0.0) / caps[j];
            let slackness = (self.dual[j] * (cj - caps[j])).abs() / self.objective.max(1e-300);
            worst = worst.max(violation).max(slackness);
        }
        worst
    }
}

/// Solve min sum_i r_i^2 / t_i s.t. sum_i Q[j,i]^2 t_i <= v_j for all j
/// (t_i = sigma_i^2 > 0) by multiplicative dual ascent, to a certified
/// relative duality gap of 1e-8.
pub fn solve_utility_constrained(
    q: &QueryWorkload,
    caps: &[f64],
    r_bar: &[f64],
) -> Result<UtilitySolution> {
    let n = q.n();
    let m = q.m();
    if caps.len() != m {
        return Err(Error::Domain("one variance cap per query required".into()));
    }
    if caps.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::Domain("variance caps must be positive".into()));
    }
    if r_bar.len() != n || r_bar.iter().any(|&r| r <= 0.0 || !r.is_finite()) {
        return Err(Error::Domain("r_bar must be positive, length n".into()));
    }
    // Squared coefficients; day i is degenerate when no query touches it.
    let qsq: Vec<Vec<f64>> = q
        .rows()
        .iter()
        .map(|row| row.iter().map(|v| v * v).collect())
        .collect();
    let day_covered: Vec<bool> = (0..n).map(|i| qsq.iter().any(|row| row[i] > 0.0)).collect();

    let mut mu: Vec<f64> = caps.iter().map(|&v| 1.0 / v).collect();
    let mut t = vec![0.0; n];
    let mut best: Option<UtilitySolution> = None;
    let target_gap = 1e-8;
    for iter in 0..200_000 {
        // t_i(mu) minimizes the Lagrangian: t_i = r_i / sqrt(w_i).
        let mut w = vec![0.0; n];
        for (row, &m_j) in qsq.iter().zip(&mu) {
            for (i, &qv) in row.iter().enumerate() {
                w[i] += m_j * qv;
            }
        }
        for i in 0..n {
            t[i] = if day_covered[i] && w[i] > 0.0 {
                r_bar[i] / w[i].sqrt()
            } else {
                f64::INFINITY
            };
        }
        // Constraint values and dual function.
        let c: Vec<f64> = qsq
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&t)
                    .filter(|(&qv, _)| qv > 0.0)
                    .map(|(&qv, &ti)| qv * ti)
                    .sum()
            })
            .collect();
        let dual_value: f64 = (0..n)
            .filter(|&i| day_covered[i])
            .map(|i| 2.0 * r_bar[i] * w[i].sqrt())
            .sum::<f64>()
            - mu.iter().zip(caps).map(|(&m_j, &v)| m_j * v).sum::<f64>();
        // Feasible primal point by uniform shrink.
        let shrink = c
            .iter()
            .zip(caps)
            .map(|(&cj, &v)| cj / v)
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let primal_value: f64 = (0..n)
            .filter(|&i| day_covered[i])
            .map(|i| r_bar[i] * r_bar[i] / (t[i] / shrink))
            .sum();
        let gap = (primal_value - dual_value).abs() / primal_value.max(1e-300);
        if best.as_ref().is_none_or(|b| gap < b.gap) {
            best = Some(UtilitySolution {
                sigma_sq: t.iter().map(|&ti| ti / shrink).collect(),
                dual: mu.clone(),
                gap,
                objective: primal_value,
            });
        }
        if gap <= target_gap {
            break;
        }
        // Multiplicative dual update; damped early, sharper later.
        let beta = if iter < 100 { 0.5 } else { 0.8 };
        for (m_j, (&cj, &v)) in mu.iter_mut().zip(c.iter().zip(caps)) {
            *m_j *= (cj / v).max(1e-300).powf(beta);
        }
    }
    best.ok_or_else(|| Error::Domain("utility-constrained solve failed".into()))
}

/// Utility-constrained calibration. The returned plan's `rho1` is the
/// minimal budget meeting the caps; use [`ScalePlan::rescaled_to_budget`]
/// to align it with an externally fixed budget.
pub fn init_utility_constrained(
    q: &QueryWorkload,
    caps: &[f64],
    r_bar: &[f64],
) -> Result<ScalePlan> {
    let sol = solve_utility_constrained(q, caps, r_bar)?;
    Ok(ScalePlan {
        sigma_bar: sol.sigma_sq.iter().map(|&t| t.sqrt()).collect(),
        objective: ScaleObjective::MinBudgetUnderVarianceCaps,
        rho1: 0.5 * sol.objective,
        objective_value: sol.objective,
    })
}

/// Per-day scale update when the contribution bound changes:
/// sigma_i = sigma_bar_i * r_i / r_bar_i. Leaves r_i / sigma_i unchanged,
/// so the mechanism budget is invariant.
pub fn rescale(sigma_bar_i: f64, r_bar_i: f64, r_i: f64) -> f64 {
    sigma_bar_i / r_bar_i * r_i
}
