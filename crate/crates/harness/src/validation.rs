//! Closed-form risks against seeded simulation, plus the asymptotic
//! consistency and regime checks.

use kt_core::par::{self, Execution};
use kt_core::rng::{derive_seed, substream};
use kt_core::theory::{
    asymptotic_projected_risk, baseline_risk, regime_check, full_source_asymptotic_risk,
    projection_moment_closed_form, projection_moment_monte_carlo, monte_carlo_risk_with, projected_risk_closed_form,
    projected_risk_terms, random_projection, random_unit_map, translated_risk_closed_form,
    AsymptoticParams, MomentParams, LinearTaskParams, Predictor, RiskReport,
};
use nalgebra::DMatrix;

use crate::config::{TheoryCheck, TheoryConfig};
use crate::error::Result;
use crate::report::{
    AsymptoticCell, ExperimentReport, IdentityCell, MomentCell, Record, RegimeCell, RiskCell,
};

const TAG_PROJECTED: u64 = 11;
const TAG_TRANSLATED: u64 = 12;
const TAG_BASELINE: u64 = 13;
const TAG_MOMENT: u64 = 14;
const OMEGA: u64 = 0;
const ATTEMPT: u64 = 1;

pub type RiskFormula = fn(&LinearTaskParams) -> kt_core::Result<f64>;

/// Closed forms under test; replaceable to check that the comparison
/// actually detects wrong formulas.
#[derive(Clone, Copy)]
pub struct Formulas {
    pub projected: RiskFormula,
    pub translated: RiskFormula,
    pub baseline: RiskFormula,
}

impl Default for Formulas {
    fn default() -> Self {
        Formulas {
            projected: |p| Ok(projected_risk_closed_form(p)?.risk),
            translated: translated_risk_closed_form,
            baseline: |p| Ok(baseline_risk(p)),
        }
    }
}

impl Formulas {
    fn get(&self, predictor: Predictor) -> RiskFormula {
        match predictor {
            Predictor::Projected => self.projected,
            Predictor::Translated => self.translated,
            Predictor::Baseline => self.baseline,
        }
    }
}

/// Source map relative to the target in a translated cell.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Draw {
    Random(usize),
    /// `ω_s = ω_t`.
    Equal,
    /// `ω_s = ω_t + 0.1·u`.
    Near,
    /// `ω_s = 0.05·u`, so `δ ≈ 1`.
    Far,
}

impl Draw {
    fn label(self) -> String {
        match self {
            Draw::Random(i) => format!("random{i}"),
            Draw::Equal => "delta_zero".into(),
            Draw::Near => "delta_small".into(),
            Draw::Far => "delta_one".into(),
        }
    }
}

struct RiskJob {
    predictor: Predictor,
    tag: u64,
    params: LinearTaskParams,
    draw: Draw,
}

pub fn run_theory_validation(cfg: &TheoryConfig, seed: u64) -> Result<ExperimentReport> {
    run_theory_validation_with(cfg, seed, &Formulas::default(), Execution::Parallel)
}

/// Cells run in parallel over `exec`; each cell owns a seed derived from
/// its index, so the report does not depend on scheduling.
pub fn run_theory_validation_with(
    cfg: &TheoryConfig,
    seed: u64,
    formulas: &Formulas,
    exec: Execution,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::default();
    let mut jobs = Vec::new();
    if cfg.checks.contains(&TheoryCheck::Projected) {
        jobs.extend(projected_jobs(cfg, seed, Predictor::Projected, TAG_PROJECTED)?);
    }
    if cfg.checks.contains(&TheoryCheck::Translated) {
        jobs.extend(translated_jobs(cfg, seed)?);
    }
    if cfg.checks.contains(&TheoryCheck::Baseline) {
        jobs.extend(projected_jobs(cfg, seed, Predictor::Baseline, TAG_BASELINE)?);
    }
    let cells = par::map_range(exec, jobs.len(), |i| {
        run_risk_cell(cfg, seed, formulas, &jobs[i], i, Execution::Sequential)
    });
    for c in cells {
        report.push(Record::Risk(c?));
    }
    if cfg.checks.contains(&TheoryCheck::Moment) {
        for c in moment_cells(cfg, seed, exec)? {
            report.push(Record::Moment(c));
        }
    }
    if cfg.checks.contains(&TheoryCheck::Asymptotic) {
        asymptotic_records(cfg, &mut report)?;
    }
    Ok(report)
}

fn projected_jobs(cfg: &TheoryConfig, seed: u64, predictor: Predictor, tag: u64) -> Result<Vec<RiskJob>> {
    let mut jobs = Vec::new();
    let mut index = 0u64;
    for &n_s in &cfg.n_s {
        for &n_t in &cfg.n_t {
            for &c_s in &cfg.c_s {
                for k in 0..cfg.draws_per_cell {
                    let mut rng = substream(seed, &[tag, index, OMEGA]);
                    let ws = random_unit_map(c_s, cfg.d, &mut rng);
                    let wt = random_unit_map(cfg.c_t, cfg.d, &mut rng);
                    jobs.push(RiskJob {
                        predictor,
                        tag,
                        params: LinearTaskParams::new(n_s, n_t, ws, wt)?,
                        draw: Draw::Random(k),
                    });
                    index += 1;
                }
            }
        }
    }
    Ok(jobs)
}

fn translated_jobs(cfg: &TheoryConfig, seed: u64) -> Result<Vec<RiskJob>> {
    let c = cfg.translated_outputs;
    let mut draws: Vec<Draw> = (0..cfg.draws_per_cell).map(Draw::Random).collect();
    draws.extend([Draw::Equal, Draw::Near, Draw::Far]);
    let mut jobs = Vec::new();
    let mut index = 0u64;
    for &n_s in &cfg.n_s {
        for &n_t in &cfg.n_t {
            for &draw in &draws {
                let mut rng = substream(seed, &[TAG_TRANSLATED, index, OMEGA]);
                let wt = random_unit_map(c, cfg.d, &mut rng);
                let u = random_unit_map(c, cfg.d, &mut rng);
                let ws = match draw {
                    Draw::Random(_) => u,
                    Draw::Equal => wt.clone(),
                    Draw::Near => &wt + u * 0.1,
                    Draw::Far => u * 0.05,
                };
                jobs.push(RiskJob {
                    predictor: Predictor::Translated,
                    tag: TAG_TRANSLATED,
                    params: LinearTaskParams::new(n_s, n_t, ws, wt)?,
                    draw,
                });
                index += 1;
            }
        }
    }
    Ok(jobs)
}

fn simulate(
    cfg: &TheoryConfig,
    formulas: &Formulas,
    job: &RiskJob,
    seed: u64,
    exec: Execution,
) -> Result<RiskReport> {
    let mut r = monte_carlo_risk_with(&job.params, job.predictor, cfg.trials, seed, exec)?;
    r.closed_form = (formulas.get(job.predictor))(&job.params)?;
    Ok(r)
}

fn run_risk_cell(
    cfg: &TheoryConfig,
    seed: u64,
    formulas: &Formulas,
    job: &RiskJob,
    cell: usize,
    exec: Execution,
) -> Result<RiskCell> {
    let p = &job.params;
    let first_seed = derive_seed(seed, &[job.tag, cell as u64, ATTEMPT, 0]);
    let mut r = simulate(cfg, formulas, job, first_seed, exec)?;
    let mut retried = false;
    if !r.agrees(cfg.band, cfg.floor) && cfg.retry {
        let retry_seed = derive_seed(seed, &[job.tag, cell as u64, ATTEMPT, 1]);
        r = simulate(cfg, formulas, job, retry_seed, exec)?;
        retried = true;
    }
    let delta = (p.c_s() == p.c_t()).then(|| {
        (p.omega_s() - p.omega_t()).norm_squared() / p.omega_t_norm_sq()
    });
    Ok(RiskCell {
        predictor: job.predictor.name().into(),
        cell,
        d: p.d(),
        n_s: p.n_s(),
        n_t: p.n_t(),
        c_s: p.c_s(),
        c_t: p.c_t(),
        draw: job.draw.label(),
        epsilon: p.epsilon(),
        delta: if job.predictor == Predictor::Translated { delta } else { None },
        closed_form: r.closed_form,
        mc_mean: r.mc_mean,
        mc_stderr: r.mc_stderr,
        trials: r.trials,
        z_score: r.z_score(),
        retried,
        passed: r.agrees(cfg.band, cfg.floor),
    })
}

fn moment_cells(cfg: &TheoryConfig, seed: u64, exec: Execution) -> Result<Vec<MomentCell>> {
    let lc = &cfg.moment;
    let mut out = Vec::new();
    for (i, &(p, q)) in lc.cells.iter().enumerate() {
        let lp = MomentParams { d: lc.d, p, q };
        let mut rng = substream(seed, &[TAG_MOMENT, i as u64, OMEGA]);
        let qm = random_projection(lc.d, q, &mut rng);
        let closed = projection_moment_closed_form(&lp, &qm)?;
        if p == lc.d {
            let diff = (&closed - &qm).amax();
            out.push(MomentCell {
                d: lc.d,
                p,
                q,
                draws: 0,
                max_abs_diff: diff,
                max_z: None,
                passed: diff <= 1e-10,
            });
            continue;
        }
        let est = projection_moment_monte_carlo(&lp, &qm, lc.draws, derive_seed(seed, &[TAG_MOMENT, i as u64, ATTEMPT]), exec)?;
        let diff: DMatrix<f64> = (&est.mean - &closed).abs();
        let mut max_z: f64 = 0.0;
        let mut passed = true;
        for (k, &dv) in diff.iter().enumerate() {
            let se = est.stderr[k];
            if dv > lc.band * se + cfg.floor {
                passed = false;
            }
            if dv > 0.0 {
                max_z = max_z.max(if se > 0.0 { dv / se } else { f64::INFINITY });
            }
        }
        out.push(MomentCell {
            d: lc.d,
            p,
            q,
            draws: lc.draws,
            max_abs_diff: diff.max(),
            max_z: Some(max_z),
            passed,
        });
    }
    Ok(out)
}

/// Finite-`d` closed form against the large-`d` polynomial on the
/// `S × T × C × ε` grid, the `S = 1` identity, and the regime checks.
fn asymptotic_records(cfg: &TheoryConfig, report: &mut ExperimentReport) -> Result<()> {
    let ac = &cfg.asymptotic;
    let d = ac.d;
    let df = d as f64;
    let bound = ac.bound_constant / df;
    let round = |x: f64| ((x * df).round() as usize).min(d);
    for &eps in &ac.epsilons {
        for &s in &ac.grid {
            for &t in &ac.grid {
                for &c in &ac.grid {
                    let (n_s, n_t, c_s) = (round(s), round(t), round(c));
                    let ap = AsymptoticParams {
                        s: n_s as f64 / df,
                        t: n_t as f64 / df,
                        c: c_s as f64 / df,
                        omega_t_norm_sq: 1.0,
                        epsilon: eps,
                    };
                    let finite = projected_risk_terms(d, n_s, n_t, c_s, 1.0, eps)?.risk;
                    let asym = asymptotic_projected_risk(&ap);
                    let gap = (finite - asym).abs();
                    report.push(Record::Asymptotic(AsymptoticCell {
                        d,
                        n_s,
                        n_t,
                        c_s,
                        s: ap.s,
                        t: ap.t,
                        c: ap.c,
                        epsilon: eps,
                        finite_d: finite,
                        asymptotic: asym,
                        gap,
                        bound,
                        passed: gap <= bound,
                    }));
                }
            }
        }
    }
    for &eps in &ac.epsilons {
        for &t in &ac.grid {
            for &c in &ac.grid {
                let ap = AsymptoticParams {
                    s: 1.0,
                    t,
                    c,
                    omega_t_norm_sq: 1.0,
                    epsilon: eps,
                };
                let lhs = asymptotic_projected_risk(&ap);
                let rhs = full_source_asymptotic_risk(t, c, 1.0, eps);
                report.push(Record::Identity(IdentityCell {
                    name: "full_source".into(),
                    t,
                    c,
                    epsilon: eps,
                    lhs,
                    rhs,
                    passed: (lhs - rhs).abs() <= 1e-12,
                }));
            }
        }
    }
    for &eps in &ac.epsilons {
        for &s in &ac.grid {
            for &t in &ac.grid {
                for &c in &ac.grid {
                    let ap = AsymptoticParams {
                        s,
                        t,
                        c,
                        omega_t_norm_sq: 1.0,
                        epsilon: eps,
                    };
                    let r = regime_check(&ap);
                    let passed = r.all_passed();
                    report.push(Record::Regime(RegimeCell { report: r, passed }));
                }
            }
        }
    }
    Ok(())
}
