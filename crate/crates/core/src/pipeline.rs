//! End-to-end solve of a signed pair and the named `verify` checks.

use std::cell::OnceCell;
use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::cloud::{norm, BallIndex};
use crate::config::RunConfig;
use crate::error::{Result, SotxError};
use crate::fractalgeo::{kernel_integral, kernel_normalizer, KernelSpec};
use crate::measures::{
    balance_pair, check_assumptions, discretize, AssumptionReport, AssumptionThresholds, FractalPart, GridDensity,
    Sign, SignedComponent, SignedMeasure,
};
use crate::partition::{
    assign_regions, build_potentials, inter_sign_ratio, signed_texture_distance, AmbientPotentials, PartitionLabels,
    Region,
};
use crate::presets::{find_preset, PresetInfo, PresetParams};
use crate::regularize::{apply_rn, random_lipschitz_functions, weak_error_check};
use crate::transport::{
    build_block_problem, build_solver, check_cyclical_monotonicity, duality_gap, exhaustive_two_cycles, extract_map,
    Block, BlockPlan, DualPotentials, GapReport, MarginalReport, SolverMeta, TransportMap, TransportProblem,
};
use crate::verify::{fractal_preservation_report, legendre_iterate, legendre_system_residual, ma_residual_intra};
use crate::verify::{refinement_ratios, PreservationOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub config_hash: String,
    pub solver: SolverMeta,
    pub sources: usize,
    pub targets: usize,
    pub objective: f64,
    pub d_st: f64,
    /// Inter-sign mass over total mass; `None` for an empty plan.
    pub inter_sign_ratio: Option<f64>,
    pub block_masses: BTreeMap<Block, f64>,
    /// Share of each source sign's mass kept within its own sign.
    pub b_split: BTreeMap<Sign, f64>,
    pub region_masses: BTreeMap<Region, f64>,
    pub unassigned_mass: f64,
    pub disagreement_mass: f64,
    pub gap: GapReport,
    pub marginals: MarginalReport,
    pub split_points: usize,
    pub under_resolved: bool,
    pub regularized: bool,
    pub warnings: Vec<String>,
}

/// Everything produced by a successful solve.
#[derive(Debug, Clone)]
pub struct Solved {
    pub config: RunConfig,
    pub assumptions: AssumptionReport,
    /// The measures as transported: balanced and, if configured, regularized.
    pub mu: SignedMeasure,
    pub nu: SignedMeasure,
    pub plan: BlockPlan,
    pub map: TransportMap,
    pub potentials: AmbientPotentials,
    pub labels: PartitionLabels,
    pub summary: SolveSummary,
}

impl Solved {
    pub fn problem(&self) -> &TransportProblem {
        &self.potentials.problem
    }

    pub fn duals(&self) -> &DualPotentials {
        &self.potentials.duals
    }

    pub fn report(&self) -> SolveReport<'_> {
        SolveReport {
            config: &self.config,
            config_hash: self.summary.config_hash.clone(),
            assumptions: &self.assumptions,
            summary: &self.summary,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SolveReport<'a> {
    pub config: &'a RunConfig,
    pub config_hash: String,
    pub assumptions: &'a AssumptionReport,
    pub summary: &'a SolveSummary,
}

/// A solve stopped by a hard assumption failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbortReport {
    pub config: RunConfig,
    pub config_hash: String,
    pub assumptions: AssumptionReport,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub enum SolveOutcome {
    Solved(Box<Solved>),
    Aborted(Box<AbortReport>),
}

impl SolveOutcome {
    pub fn solved(&self) -> Option<&Solved> {
        match self {
            SolveOutcome::Solved(s) => Some(s),
            SolveOutcome::Aborted(_) => None,
        }
    }
}

fn thresholds(cfg: &RunConfig) -> AssumptionThresholds {
    AssumptionThresholds {
        h5_bandwidth: cfg.kernel.h,
        seed: cfg.seed,
        ..AssumptionThresholds::default()
    }
}

/// Balances, checks, optionally regularizes, discretizes and solves the
/// pair, then extracts the map, potentials and partition.
pub fn run_solve(mu: &SignedMeasure, nu: &SignedMeasure, cfg: &RunConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let cost = cfg.cost_spec()?;
    let nu_bal = balance_pair(mu, nu)?;
    let assumptions = check_assumptions(mu, &nu_bal, &cost, &thresholds(cfg));
    if assumptions.hard_failure() {
        let failed: Vec<&str> = ["H3", "H4"]
            .into_iter()
            .filter(|h| assumptions.flag(h) == crate::measures::Flag::Fail)
            .collect();
        return Ok(SolveOutcome::Aborted(Box::new(AbortReport {
            config: cfg.clone(),
            config_hash: cfg.hash(),
            reason: format!("assumption check failed: {}", failed.join(", ")),
            assumptions,
        })));
    }
    let mut warnings: Vec<String> = assumptions
        .pass_flags
        .iter()
        .filter(|(_, f)| **f == crate::measures::Flag::Fail)
        .map(|(h, _)| format!("assumption {h} failed"))
        .collect();
    let (mu_t, nu_t) = match &cfg.regularization {
        Some(params) => {
            let opts = cfg.kernel.options();
            (apply_rn(mu, params, &opts)?, apply_rn(&nu_bal, params, &opts)?)
        }
        None => (mu.clone(), nu_bal),
    };
    let dmu = discretize(&mu_t, cfg.resolution)?;
    let dnu = discretize(&nu_t, cfg.resolution)?;
    let under_resolved = dmu.under_resolved || dnu.under_resolved;
    if under_resolved {
        warnings.push("grid resolution does not resolve the plus/minus support gap".into());
    }
    let problem = build_block_problem(&dmu, &dnu, &cost)?;
    let solver = build_solver(&cfg.solver)?;
    let (plan, duals) = solver.solve(&problem)?;
    let map = extract_map(&plan, &problem);
    if map.any_split() {
        warnings.push(format!("{} source points split their mass", map.split_count()));
    }
    let potentials = build_potentials(&duals, &problem);
    let labels = assign_regions(&potentials, &map, &cfg.partition)?;

    let block_masses: BTreeMap<Block, f64> = Block::ALL.into_iter().map(|b| (b, plan.block_mass(b))).collect();
    let mut b_split = BTreeMap::new();
    for s in [Sign::Plus, Sign::Minus] {
        let keep = block_masses[&Block::new(s, s)];
        let total = keep + block_masses[&Block::new(s, s.flip())];
        if total > 0.0 {
            b_split.insert(s, keep / total);
        }
    }
    let summary = SolveSummary {
        config_hash: cfg.hash(),
        solver: plan.solver.clone(),
        sources: problem.n_sources(),
        targets: problem.n_targets(),
        objective: plan.evaluate(&problem),
        d_st: signed_texture_distance(&plan, &problem),
        inter_sign_ratio: inter_sign_ratio(&plan).ok(),
        block_masses,
        b_split,
        region_masses: labels.masses.clone(),
        unassigned_mass: labels.unassigned_mass,
        disagreement_mass: labels.disagreement_mass,
        gap: duality_gap(&plan, &duals, &problem),
        marginals: plan.marginals(&problem),
        split_points: map.split_count(),
        under_resolved,
        regularized: cfg.regularization.is_some(),
        warnings,
    };
    Ok(SolveOutcome::Solved(Box::new(Solved {
        config: cfg.clone(),
        assumptions,
        mu: mu_t,
        nu: nu_t,
        plan,
        map,
        potentials,
        labels,
        summary,
    })))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub summary: String,
    pub details: Value,
}

impl CheckResult {
    fn new(name: &str, pass: bool, summary: String, details: Value) -> Self {
        Self {
            name: name.to_string(),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            summary,
            details,
        }
    }

    fn skipped(name: &str, reason: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            status: CheckStatus::Skipped,
            summary: reason.into(),
            details: Value::Null,
        }
    }
}

/// Inputs shared by the checks; the solve runs at most once, on demand.
pub struct CheckInput<'a> {
    pub mu: &'a SignedMeasure,
    pub nu: &'a SignedMeasure,
    pub preset: Option<&'a PresetInfo>,
    pub config: &'a RunConfig,
    outcome: OnceCell<SolveOutcome>,
}

impl<'a> CheckInput<'a> {
    pub fn new(mu: &'a SignedMeasure, nu: &'a SignedMeasure, preset: Option<&'a PresetInfo>, config: &'a RunConfig) -> Self {
        Self {
            mu,
            nu,
            preset,
            config,
            outcome: OnceCell::new(),
        }
    }

    pub fn outcome(&self) -> Result<&SolveOutcome> {
        if let Some(o) = self.outcome.get() {
            return Ok(o);
        }
        let o = run_solve(self.mu, self.nu, self.config)?;
        Ok(self.outcome.get_or_init(|| o))
    }
}

pub trait Check: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn run(&self, input: &CheckInput<'_>) -> Result<CheckResult>;
}

/// Runs `body` on the solved pair, or fails the check when the solve was
/// aborted.
fn with_solved(name: &str, input: &CheckInput<'_>, body: impl FnOnce(&Solved) -> Result<CheckResult>) -> Result<CheckResult> {
    match input.outcome()? {
        SolveOutcome::Solved(s) => body(s),
        SolveOutcome::Aborted(a) => Ok(CheckResult::new(
            name,
            false,
            format!("solve aborted: {}", a.reason),
            serde_json::to_value(&a.assumptions)?,
        )),
    }
}

fn grid_at(g: &GridDensity, resolution: Option<usize>) -> Result<GridDensity> {
    match resolution {
        Some(r) => g.resample(r),
        None => Ok(g.clone()),
    }
}

struct MongeAmpere;

/// Below this many interior points a level's residual is mostly noise.
const MIN_LEVEL_POINTS: usize = 4;
const REFINEMENT_FACTORS: [(usize, usize); 4] = [(1, 4), (1, 2), (1, 1), (2, 1)];

impl MongeAmpere {
    /// Residuals per intra sign on one solve, skipping signs without AC
    /// parts on both sides or without interior points.
    fn residuals(s: &Solved, notes: &mut Vec<String>) -> Result<Vec<(Sign, crate::verify::ResidualField)>> {
        let mut out = Vec::new();
        for sign in [Sign::Plus, Sign::Minus] {
            let (cm, cn) = (s.mu.component(sign), s.nu.component(sign));
            let (Some(f), Some(g)) = (&cm.ac, &cn.ac) else {
                continue;
            };
            let ac_only = |c: &SignedComponent| c.atoms.is_none() && c.fractal.is_none() && c.smoothed.is_none();
            let crossing = s.plan.block_mass(Block::new(sign, sign.flip())) + s.plan.block_mass(Block::new(sign.flip(), sign));
            if !ac_only(cm) || !ac_only(cn) || crossing > 0.0 {
                notes.push(format!(
                    "{sign:?}: the intra equation needs AC-only parts and no inter-sign mass on this sign"
                ));
                continue;
            }
            let f = grid_at(f, s.config.resolution)?;
            let g = grid_at(g, s.config.resolution)?;
            match ma_residual_intra(&s.potentials, &s.map, &f, &g, &s.labels, sign) {
                Ok(field) => out.push((sign, field)),
                Err(SotxError::Invalid(msg)) => notes.push(format!("{sign:?}: {msg}")),
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    fn refinement(&self, input: &CheckInput<'_>, info: &PresetInfo) -> Result<CheckResult> {
        let preset = find_preset(&info.name)?;
        let base = info.params.cells.unwrap_or(80);
        let mut cfg = input.config.clone();
        cfg.regularization = None;
        cfg.resolution = None;
        let mut rows = Vec::new();
        let mut per_sign: BTreeMap<Sign, Vec<crate::verify::ResidualField>> = BTreeMap::new();
        let mut notes = Vec::new();
        for (num, den) in REFINEMENT_FACTORS {
            let cells = (base * num / den).max(4);
            let params = PresetParams {
                cells: Some(cells),
                ..info.params.clone()
            };
            let pair = preset.build(&params)?;
            let outcome = run_solve(&pair.mu, &pair.nu, &cfg)?;
            let Some(s) = outcome.solved() else {
                return Ok(CheckResult::new(self.name(), false, format!("solve aborted at {cells} cells"), Value::Null));
            };
            for (sign, field) in Self::residuals(s, &mut notes)? {
                if field.values.len() < MIN_LEVEL_POINTS {
                    notes.push(format!(
                        "{sign:?} at {cells} cells has {} residual points; use more cells",
                        field.values.len()
                    ));
                }
                rows.push(json!({"cells": cells, "sign": sign, "max": field.max, "mean": field.mean, "points": field.values.len()}));
                per_sign.entry(sign).or_default().push(field);
            }
        }
        let mut ratios = BTreeMap::new();
        let mut pass = !per_sign.is_empty();
        for (sign, fields) in &per_sign {
            let r = refinement_ratios(fields);
            pass &= fields.len() == REFINEMENT_FACTORS.len()
                && r.iter().all(|v| *v >= input.config.verify.refinement_ratio);
            ratios.insert(*sign, r);
        }
        let worst = ratios.values().flatten().cloned().fold(f64::INFINITY, f64::min);
        Ok(CheckResult::new(
            self.name(),
            pass,
            format!("refinement ratios >= {:.3} (need {})", worst, input.config.verify.refinement_ratio),
            json!({"mode": "refinement", "levels": rows, "ratios": ratios, "notes": notes}),
        ))
    }
}

impl Check for MongeAmpere {
    fn name(&self) -> &'static str {
        "ma"
    }
    fn describe(&self) -> &'static str {
        "intra-sign Monge-Ampere residuals (refinement study for gaussian-signed)"
    }
    fn run(&self, input: &CheckInput<'_>) -> Result<CheckResult> {
        if let Some(info) = input.preset.filter(|p| p.name == "gaussian-signed") {
            return self.refinement(input, info);
        }
        if input.mu.dim > 2 {
            return Ok(CheckResult::skipped(self.name(), "dimension above 2"));
        }
        with_solved(self.name(), input, |s| {
            let mut notes = Vec::new();
            let fields = Self::residuals(s, &mut notes)?;
            if fields.is_empty() {
                let reason = if notes.is_empty() {
                    "no sign has AC parts in both measures".to_string()
                } else {
                    notes.join("; ")
                };
                return Ok(CheckResult::skipped(self.name(), reason));
            }
            let tol = input.config.verify.ma_residual;
            let worst = fields.iter().map(|(_, f)| f.max).fold(0.0, f64::max);
            let rows: Vec<Value> = fields
                .iter()
                .map(|(sign, f)| json!({"sign": sign, "max": f.max, "mean": f.mean, "points": f.values.len(), "excluded": f.excluded}))
                .collect();
            Ok(CheckResult::new(
                self.name(),
                worst <= tol,
                format!("max residual {worst:.3e} (tolerance {tol})"),
                json!({"mode": "single", "fields": rows, "notes": notes}),
            ))
        })
    }
}

struct Legendre;

impl Check for Legendre {
    fn name(&self) -> &'static str {
        "legendre"
    }
    fn describe(&self) -> &'static str {
        "double Legendre system residual of the optimal potentials"
    }
    fn run(&self, input: &CheckInput<'_>) -> Result<CheckResult> {
        with_solved(self.name(), input, |s| {
            let report = legendre_system_residual(&s.potentials);
            let (_, changes) = legendre_iterate(s.duals(), s.problem(), 1);
            let tol = input.config.verify.legendre * report.scale;
            let worst = report.max_residual();
            Ok(CheckResult::new(
                self.name(),
                worst <= tol,
                format!("max residual {worst:.3e} (tolerance {tol:.3e})"),
                json!({"residual": report, "fixed_point_change": changes[0], "gap": s.summary.gap}),
            ))
        })
    }
}

struct Monotone;

impl Check for Monotone {
    fn name(&self) -> &'static str {
        "monotone"
    }
    fn describe(&self) -> &'static str {
        "c-cyclical monotonicity of the plan support"
    }
    fn run(&self, input: &CheckInput<'_>) -> Result<CheckResult> {
        with_solved(self.name(), input, |s| {
            let v = &input.config.verify;
            let sampled = check_cyclical_monotonicity(&s.plan, s.problem(), v.max_cycle_len, v.cycles, input.config.seed);
            let support = s.plan.global_entries(s.problem()).filter(|e| e.3 > 0.0).count();
            let exhaustive = (support <= v.exhaustive_pairs).then(|| exhaustive_two_cycles(&s.plan, s.problem()));
            let violations = sampled.violations + exhaustive.as_ref().map_or(0, |r| r.violations);
            Ok(CheckResult::new(
                self.name(),
                violations == 0,
                format!("{violations} violating cycles over {support} support pairs"),
                json!({"sampled": sampled, "exhaustive_two_cycles": exhaustive, "support_pairs": support}),
            ))
        })
    }
}

fn source_offset(c: &SignedComponent, resolution: Option<usize>) -> Result<usize> {
    let mut n = 0;
    for g in c.grids() {
        n += grid_at(g, resolution)?.support_cloud().len();
    }
    Ok(n + c.atoms.as_ref().map_or(0, |a| a.cloud.len()))
}

struct Fractal;

impl Check for Fractal {
    fn name(&self) -> &'static str {
        "fractal"
    }
    fn describe(&self) -> &'static str {
        "dimension, Ahlfors regularity and bi-Lipschitz ratios of the image of each source fractal part"
    }
    fn run(&self, input: &CheckInput<'_>) -> Result<CheckResult> {
        if [Sign::Plus, Sign::Minus].iter().all(|s| input.mu.component(*s).fractal.is_none()) {
            return Ok(CheckResult::skipped(self.name(), "source has no fractal part"));
        }
        if input.config.regularization.is_some() {
            return Ok(CheckResult::skipped(self.name(), "fractal parts are smoothed by the configured regularization"));
        }
        with_solved(self.name(), input, |s| {
            let opts = PreservationOptions {
                ds_tolerance: input.config.verify.ds_tolerance,
                seed: input.config.seed,
                ..PreservationOptions::default()
            };
            let mut reports = BTreeMap::new();
            let mut notes = Vec::new();
            let mut pass = true;
            for sign in [Sign::Plus, Sign::Minus] {
                let c = s.mu.component(sign);
                let Some(e) = &c.fractal else { continue };
                let offset = source_offset(c, s.config.resolution)?;
                let images: Vec<Vec<f64>> = (0..e.sample.len())
                    .map(|k| s.map.image(s.problem().source_global(sign, offset + k)).to_vec())
                    .collect();
                match fractal_preservation_report(e, &images, &opts) {
                    Ok(report) => {
                        pass &= report.pass;
                        reports.insert(sign, report);
                    }
                    Err(SotxError::Invalid(msg)) => {
                        notes.push(format!("{sign:?}: {msg}"));
                    }
                    Err(err) => return Err(err),
                }
            }
            if reports.is_empty() {
                return Ok(CheckResult::skipped(self.name(), notes.join("; ")));
            }
            let dims: Vec<String> = reports
                .iter()
                .map(|(sign, r)| format!("{sign:?}: d_hat {:.3} vs ds {:.3}", r.d_hat_image.d_hat, r.ds))
                .collect();
            Ok(CheckResult::new(
                self.name(),
                pass,
                dims.join("; "),
                json!({"reports": reports, "notes": notes}),
            ))
        })
    }
}

/// Every fractal part of both measures, labelled `mu+`, `nu-`, ...
fn fractal_parts(input: &CheckInput<'_>) -> Vec<(String, FractalPart)> {
    let mut out = Vec::new();
    for (m, tag) in [(input.mu, "mu"), (input.nu, "nu")] {
        for (sign, ch) in [(Sign::Plus, '+'), (Sign::Minus, '-')] {
            if let Some(f) = &m.component(sign).fractal {
                out.push((format!("{tag}{ch}"), f.clone()));
            }
        }
    }
    out
}

fn bandwidth(part: &FractalPart, cfg: &RunConfig) -> f64 {
    cfg.kernel.h.unwrap_or(0.1 * part.sample.diameter_bound())
}

/// The offset-weighted kernel vanishes unless `E` meets `B(0, h)`.
fn literal_kernel_defined(part: &FractalPart, cfg: &RunConfig) -> bool {
    cfg.kernel.position_weighted || BallIndex::new(&part.sample).any_within(&vec![0.0; part.dim()], bandwidth(part, cfg))
}

/// Fractal parts that admit a kernel under the configured convention, and
/// notes for those that do not.
fn kernel_parts(input: &CheckInput<'_>) -> (Vec<(String, FractalPart)>, Vec<String>) {
    let mut notes = Vec::new();
    let parts = fractal_parts(input)
        .into_iter()
        .filter(|(label, part)| {
            let ok = literal_kernel_defined(part, input.config);
            if !ok {
                notes.push(format!(
                    "{label}: E misses B(0, h); the offset-weighted kernel is undefined (set kernel.position_weighted)"
                ));
            }
            ok
        })
        .collect();
    (parts, notes)
}

fn kernel_for(part: &FractalPart, cfg: &RunConfig) -> Result<KernelSpec> {
    let h = bandwidth(part, cfg);
    let mut spec = KernelSpec::new(
        part.clone(),
        h,
        cfg.kernel.rho.clone(),
        cfg.kernel.quadrature.clone(),
        cfg.kernel.position_weighted,
    )?;
    kernel_normalizer(&mut spec)?;
    Ok(spec)
}

struct KernelNormalization;

impl Check for KernelNormalization {
    fn name(&self) -> &'static str {
        "kernel"
    }
    fn describe(&self) -> &'static str {
        "integral of the normalized fractal kernel on independent quadrature nodes"
    }
    fn run(&self, input: &CheckInput<'_>) -> Result<CheckResult> {
        if fractal_parts(input).is_empty() {
            return Ok(CheckResult::skipped(self.name(), "no fractal parts"));
        }
        let (parts, notes) = kernel_parts(input);
        if parts.is_empty() {
            return Ok(CheckResult::skipped(self.name(), notes.join("; ")));
        }
        let tol = input.config.verify.kernel_normalization;
        let mut rows = BTreeMap::new();
        let mut worst: f64 = 0.0;
        for (label, part) in &parts {
            let spec = kernel_for(part, input.config)?;
            let integral = kernel_integral(&spec, input.config.seed.wrapping_add(1))?;
            worst = worst.max((integral - 1.0).abs());
            rows.insert(label.clone(), json!({"kernel": spec.summary(), "integral": integral}));
        }
        Ok(CheckResult::new(
            self.name(),
            worst <= tol,
            format!("max |integral - 1| = {worst:.3e} (tolerance {tol})"),
            json!({"parts": rows, "notes": notes}),
        ))
    }
}

struct WeakError;

impl Check for WeakError {
    fn name(&self) -> &'static str {
        "weak-error"
    }
    fn describe(&self) -> &'static str {
        "weak error of fractal smoothing against random 1-Lipschitz test functions"
    }
    fn run(&self, input: &CheckInput<'_>) -> Result<CheckResult> {
        if fractal_parts(input).is_empty() {
            return Ok(CheckResult::skipped(self.name(), "no fractal parts"));
        }
        let (parts, notes) = kernel_parts(input);
        if parts.is_empty() {
            return Ok(CheckResult::skipped(self.name(), notes.join("; ")));
        }
        let mut rows = BTreeMap::new();
        let mut pass = true;
        let mut worst: f64 = 0.0;
        for (label, part) in &parts {
            let spec = kernel_for(part, input.config)?;
            let span = part.sample.points().map(norm).fold(0.0, f64::max) + spec.h;
            let fns = random_lipschitz_functions(
                input.config.verify.weak_error_functions,
                part.dim(),
                span,
                input.config.seed,
            );
            let report = weak_error_check(part, &spec, &fns)?;
            pass &= report.pass;
            worst = worst.max(report.max_ratio);
            rows.insert(label.clone(), report);
        }
        Ok(CheckResult::new(
            self.name(),
            pass,
            format!("max error / (mass h Lip) = {worst:.3}"),
            json!({"parts": rows, "notes": notes}),
        ))
    }
}

fn registry() -> Vec<Box<dyn Check>> {
    vec![
        Box::new(MongeAmpere),
        Box::new(Legendre),
        Box::new(Monotone),
        Box::new(Fractal),
        Box::new(KernelNormalization),
        Box::new(WeakError),
    ]
}

/// Check names in run order; `all` runs every one.
pub fn check_names() -> Vec<&'static str> {
    registry().iter().map(|c| c.name()).collect()
}

pub fn find_check(name: &str) -> Result<Box<dyn Check>> {
    registry().into_iter().find(|c| c.name() == name).ok_or_else(|| SotxError::Unknown {
        kind: "check",
        name: name.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetInfo>,
    pub kind: String,
    pub checks: Vec<CheckResult>,
    /// No check failed.
    pub pass: bool,
}

/// Runs one named check, or every check for `all`.
pub fn run_checks(kind: &str, input: &CheckInput<'_>) -> Result<VerifyReport> {
    let checks = if kind == "all" { registry() } else { vec![find_check(kind)?] };
    let mut results = Vec::with_capacity(checks.len());
    for c in &checks {
        results.push(c.run(input)?);
    }
    Ok(VerifyReport {
        config: input.config.clone(),
        config_hash: input.config.hash(),
        preset: input.preset.cloned(),
        kind: kind.to_string(),
        pass: results.iter().all(|r| r.status != CheckStatus::Fail),
        checks: results,
    })
}
