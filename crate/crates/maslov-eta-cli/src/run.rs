//! Scenario execution.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use maslov_eta::eta_engine::{self, EtaForm, EtaParams, Route};
use maslov_eta::families::{self, TripleFamily, CYCLIC_PAIRS};
use maslov_eta::forms_grid::{self, BaseGrid, GridKind};
use maslov_eta::interval_dirac::{self, EtaMode};
use maslov_eta::lagrangian;
use maslov_eta::maslov;
use maslov_eta::{CMat, Complex64, Error, Tol};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::CliError;
use crate::report::{Identity, InstanceReport, Metric, PairReport, Report, SweepReport, SweepRow, Timings};
use crate::scenario::{FamilySpec, Scenario, SweepAxis, SweepSpec, Task};

/// Report layout version.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

struct Clock {
    start: Instant,
    last: Instant,
    timings: Timings,
}

impl Clock {
    fn new() -> Self {
        let now = Instant::now();
        Clock { start: now, last: now, timings: Timings::default() }
    }

    fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.stages.push((name.into(), (now - self.last).as_secs_f64()));
        self.last = now;
    }

    fn finish(mut self) -> Timings {
        self.timings.total = self.start.elapsed().as_secs_f64();
        self.timings
    }
}

/// Describe a library error, adding base coordinates when it names a node.
fn describe(e: &Error, grid: &BaseGrid) -> String {
    let node = match e {
        Error::Transversality { node, .. } | Error::BranchCut { node, .. } | Error::Degeneracy { node, .. } => node.clone(),
        _ => None,
    };
    match node {
        Some(idx) if idx.len() == grid.dim() && grid.dim() > 0 => {
            let coords = grid.coords(grid.linear(&idx));
            format!("{e} (coordinates {coords:?})")
        }
        _ => e.to_string(),
    }
}

fn invalid(grid: &BaseGrid) -> impl Fn(Error) -> CliError + '_ {
    move |e| CliError::Validation(describe(&e, grid))
}

#[derive(Deserialize)]
struct ExplicitFile {
    blocks: [Vec<Vec<Vec<[f64; 2]>>>; 3],
}

fn explicit_blocks(path: &Path, grid: &BaseGrid) -> Result<[Vec<CMat>; 3], CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let f: ExplicitFile = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut out: [Vec<CMat>; 3] = Default::default();
    for (i, b) in f.blocks.iter().enumerate() {
        if b.len() != grid.len() {
            return Err(CliError::Validation(format!("explicit family: block {i} has {} nodes, grid has {}", b.len(), grid.len())));
        }
        for rows in b {
            let d = rows.len();
            if d == 0 || rows.iter().any(|r| r.len() != d) {
                return Err(CliError::Validation(format!("explicit family: block {i} contains a non-square matrix")));
            }
            out[i].push(DMatrix::from_fn(d, d, |r, c| Complex64::new(rows[r][c][0], rows[r][c][1])));
        }
    }
    Ok(out)
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Seeded scalar triples `(e^{iα₀}, e^{iα₁}, e^{iα₂})` with pairwise phase
/// separation at least `min_sep`.
pub fn random_scalar_phases(seed: u64, count: usize, min_sep: f64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a: [f64; 3] = [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)];
        if circular_distance(a[0], a[1]) >= min_sep && circular_distance(a[1], a[2]) >= min_sep && circular_distance(a[0], a[2]) >= min_sep {
            out.push(a);
        }
    }
    out
}

/// Build and validate the family instances of a scenario.
pub fn build_families(s: &Scenario, dir: &Path, tol: &Tol) -> Result<Vec<TripleFamily>, CliError> {
    let grid = BaseGrid::from_kind(s.base.kind, &s.base.sizes).map_err(|e| CliError::Validation(e.to_string()))?;
    let need_point = |what: &str| {
        if grid.kind != GridKind::Point {
            Err(CliError::Validation(format!("{what} families need a point base")))
        } else {
            Ok(())
        }
    };
    let fams = match &s.family {
        FamilySpec::ScalarTriple { u } => {
            need_point("scalar_triple")?;
            vec![families::scalar_triple(*u, tol).map_err(invalid(&grid))?]
        }
        FamilySpec::RandomScalarTriples { count, min_separation } => {
            need_point("random_scalar_triples")?;
            if *count == 0 || !(*min_separation > 0.0 && *min_separation < 2.0 * PI / 3.0) {
                return Err(CliError::Validation("random_scalar_triples: need count > 0 and 0 < min_separation < 2π/3".into()));
            }
            random_scalar_phases(s.params.seed, *count, *min_separation)
                .into_iter()
                .map(|a| families::scalar_triple(a.map(|x| Complex64::from_polar(1.0, x)), tol).map_err(invalid(&grid)))
                .collect::<Result<_, _>>()?
        }
        FamilySpec::WindingCircle { phases, windings } => vec![families::winding_triple(grid.clone(), phases.clone(), windings, tol).map_err(invalid(&grid))?],
        FamilySpec::BottSphere { axis } => vec![families::bott_triple(grid.clone(), axis, tol).map_err(invalid(&grid))?],
        FamilySpec::Explicit { path } => {
            let blocks = explicit_blocks(&dir.join(path), &grid)?;
            vec![TripleFamily::new(grid.clone(), blocks, tol).map_err(invalid(&grid))?]
        }
    };
    for f in &fams {
        f.validate(tol).map_err(invalid(&f.grid))?;
    }
    Ok(fams)
}

fn eta_params(s: &Scenario) -> EtaParams {
    EtaParams { k_max: s.params.k_max, n_x: s.params.n_x, route: s.params.route, t_quadrature: s.params.t_quadrature, tail_tol: s.params.tail_tol }
}

fn maslov_tau(f: &TripleFamily, tol: &Tol) -> Result<i64, CliError> {
    let proj = f.projections(tol).map_err(invalid(&f.grid))?;
    let r = maslov::maslov_index_family(&proj, &f.node_indices(), tol).map_err(invalid(&f.grid))?;
    Ok(r.tau)
}

fn pair_reports(f: &TripleFamily, s: &Scenario, tol: &Tol) -> Result<(Vec<EtaForm>, Vec<PairReport>), CliError> {
    let p = eta_params(s);
    let mut forms = Vec::new();
    let mut reports = Vec::new();
    for (i, j) in CYCLIC_PAIRS {
        let pf = f.pair(i, j);
        let e = eta_engine::eta_form(&pf, &p, tol).map_err(|e| CliError::Validation(describe(&e.with_pair(i, j), &f.grid)))?;
        let deg0_numeric = if s.params.eta0 == EtaMode::Numeric {
            let v: Result<Vec<f64>, Error> = (0..f.grid.len())
                .into_par_iter()
                .map(|k| {
                    let std = lagrangian::standardize_unitaries(&pf.p0[k], &pf.p1[k], tol)?;
                    let spec = interval_dirac::spectrum_of_standardized(std, interval_dirac::DEFAULT_K, tol)?;
                    interval_dirac::eta_of_spectrum(&spec, EtaMode::Numeric, tol)
                })
                .collect();
            Some(v.map_err(invalid(&f.grid))?)
        } else {
            None
        };
        let deg2_integral = if f.grid.dim() == 2 { Some(e.integrate_deg2().map_err(invalid(&f.grid))?) } else { None };
        reports.push(PairReport { pair: [i, j], deg0: e.deg0.clone(), deg0_numeric, deg2_integral, meta: e.meta.clone() });
        forms.push(e);
    }
    Ok((forms, reports))
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn verify_clm(idx: usize, f: &TripleFamily, s: &Scenario, tol: &Tol, inst: &mut InstanceReport, ids: &mut Vec<Identity>) -> Result<(), CliError> {
    let tau = maslov_tau(f, tol)?;
    inst.tau = Some(tau);
    let (_, pairs) = pair_reports(f, s, tol)?;
    let sums: Vec<f64> = (0..f.grid.len())
        .map(|k| {
            let parts: Vec<f64> = pairs.iter().map(|p| p.deg0_numeric.as_ref().unwrap_or(&p.deg0)[k]).collect();
            maslov_eta::quadrature::compensated_sum(parts)
        })
        .collect();
    let (worst, _) = sums.iter().enumerate().fold((0, -1.0), |(bk, bv), (k, v)| {
        let dev = (v - tau as f64).abs();
        if dev > bv {
            (k, dev)
        } else {
            (bk, bv)
        }
    });
    let node = if f.grid.dim() > 0 { Some(f.grid.multi_index(worst)) } else { None };
    ids.push(Identity::new("clm_degree0", idx, node, c(tau as f64), c(sums[worst]), Metric::Absolute, s.params.tol_deg0));
    if f.grid.dim() == 2 {
        let (_, ch) = eta_engine::chern_tau(f, tol).map_err(invalid(&f.grid))?;
        let lhs = forms_grid::integrate(&ch, 2).map_err(invalid(&f.grid))?;
        let rhs: Complex64 = pairs.iter().filter_map(|p| p.deg2_integral).sum();
        inst.ch_tau_deg2 = Some(lhs);
        ids.push(Identity::new("clm_degree2_integrated", idx, None, lhs, rhs, Metric::Relative, s.params.tol_deg2_rel));
    }
    inst.pairs = pairs;
    Ok(())
}

fn verify_glue(idx: usize, f: &TripleFamily, s: &Scenario, tol: &Tol, inst: &mut InstanceReport, ids: &mut Vec<Identity>) -> Result<(), CliError> {
    let tau = maslov_tau(f, tol)?;
    inst.tau = Some(tau);
    let sums: Vec<f64> = (0..f.grid.len())
        .map(|k| {
            let parts: Result<Vec<f64>, Error> = CYCLIC_PAIRS
                .iter()
                .map(|&(i, j)| interval_dirac::circle_eta(&(f.blocks[i][k].adjoint() * &f.blocks[j][k]), tol).map_err(|e| e.at_node(&f.grid.multi_index(k))))
                .collect();
            parts.map(maslov_eta::quadrature::compensated_sum)
        })
        .collect::<Result<_, _>>()
        .map_err(invalid(&f.grid))?;
    let worst = (0..sums.len()).max_by(|&a, &b| (sums[a] - tau as f64).abs().total_cmp(&(sums[b] - tau as f64).abs())).unwrap_or(0);
    let node = if f.grid.dim() > 0 { Some(f.grid.multi_index(worst)) } else { None };
    ids.push(Identity::new("glue_degree0", idx, node, c(tau as f64), c(sums[worst]), Metric::Absolute, s.params.tol_glue));
    inst.circle_eta_sum = Some(sums);
    Ok(())
}

fn run_task(s: &Scenario, dir: &Path, tol: &Tol, clock: &mut Clock) -> Result<(Vec<InstanceReport>, Vec<Identity>, Option<SweepReport>), CliError> {
    if s.task == Task::Convergence {
        let spec = s.sweep.clone().ok_or_else(|| CliError::Validation("the convergence task needs a [sweep] table".into()))?;
        let sw = sweep(s, dir, &spec, tol, clock)?;
        return Ok((Vec::new(), Vec::new(), Some(sw)));
    }
    let fams = build_families(s, dir, tol)?;
    clock.stage("build");
    let mut instances = Vec::with_capacity(fams.len());
    let mut ids = Vec::new();
    for (idx, f) in fams.iter().enumerate() {
        let mut inst = InstanceReport { index: idx, d: f.d(), nodes: f.grid.len(), tau: None, pairs: Vec::new(), ch_tau_deg2: None, circle_eta_sum: None };
        match s.task {
            Task::Maslov => inst.tau = Some(maslov_tau(f, tol)?),
            Task::Eta => inst.pairs = pair_reports(f, s, tol)?.1,
            Task::VerifyClm => verify_clm(idx, f, s, tol, &mut inst, &mut ids)?,
            Task::VerifyGlue => verify_glue(idx, f, s, tol, &mut inst, &mut ids)?,
            Task::Convergence => unreachable!("handled above"),
        }
        instances.push(inst);
    }
    clock.stage(match s.task {
        Task::Maslov => "maslov",
        Task::Eta => "eta",
        Task::VerifyClm => "verify_clm",
        Task::VerifyGlue => "verify_glue",
        Task::Convergence => "convergence",
    });
    Ok((instances, ids, None))
}

fn cyclic_deg2(f: &TripleFamily, p: &EtaParams, tol: &Tol) -> Result<Complex64, CliError> {
    let (sum, _) = eta_engine::cyclic_eta_sum(f, p, tol).map_err(invalid(&f.grid))?;
    sum.integrate_deg2().map_err(invalid(&f.grid))
}

fn as_count(v: f64, what: &str) -> Result<usize, CliError> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(CliError::Validation(format!("sweep value {v} is not a valid {what}")))
    }
}

/// Run a sweep and tabulate the discrepancy against the swept parameter.
///
/// * `k`, `n_x`, `grid`: the integrated degree-2 identity `∫ ch τ = ∫ Σ η`
///   on two-dimensional bases, and the degree-0 identity (worst node) with
///   the numerically integrated eta-invariants otherwise;
/// * `eps`: the localized-route degree-2 integral against the boundary-limit
///   value (route agreement).
fn sweep(s: &Scenario, dir: &Path, spec: &SweepSpec, tol: &Tol, clock: &mut Clock) -> Result<SweepReport, CliError> {
    if spec.values.is_empty() {
        return Err(CliError::Validation("sweep: no values".into()));
    }
    let mut rows = Vec::with_capacity(spec.values.len());
    let quantity;
    if spec.axis == SweepAxis::Eps {
        let fams = build_families(s, dir, tol)?;
        let f = &fams[0];
        if f.grid.dim() != 2 {
            return Err(CliError::Validation("the eps sweep compares degree-2 forms and needs a two-dimensional base".into()));
        }
        let base = eta_params(s);
        let lhs = cyclic_deg2(f, &EtaParams { route: Route::BoundaryLimit, ..base }, tol)?;
        quantity = "lhs: boundary-limit ∫Σ η deg2; rhs: localized-route ∫Σ η deg2 at ε".to_string();
        for &eps in &spec.values {
            let rhs = cyclic_deg2(f, &EtaParams { route: Route::Localized { eps }, ..base }, tol)?;
            let id = Identity::new("", 0, None, lhs, rhs, Metric::Absolute, f64::INFINITY);
            rows.push(SweepRow { value: eps, lhs, rhs, abs_discrepancy: id.abs_discrepancy, rel_discrepancy: id.rel_discrepancy });
            clock.stage(&format!("eps={eps}"));
        }
    } else {
        let mut two_dim = false;
        for &v in &spec.values {
            let mut sc = s.clone();
            match spec.axis {
                SweepAxis::K => sc.params.k_max = as_count(v, "mode cutoff")?,
                SweepAxis::NX => sc.params.n_x = as_count(v, "node count")?,
                SweepAxis::Grid => {
                    let n = as_count(v, "grid size")?;
                    sc.base.sizes = vec![n; sc.base.sizes.len()];
                }
                SweepAxis::Eps => unreachable!("handled above"),
            }
            let fams = build_families(&sc, dir, tol)?;
            let f = &fams[0];
            let (lhs, rhs) = if f.grid.dim() == 2 {
                two_dim = true;
                let (_, ch) = eta_engine::chern_tau(f, tol).map_err(invalid(&f.grid))?;
                let lhs = forms_grid::integrate(&ch, 2).map_err(invalid(&f.grid))?;
                (lhs, cyclic_deg2(f, &eta_params(&sc), tol)?)
            } else {
                let tau = maslov_tau(f, tol)? as f64;
                let mut worst = (0.0, tau);
                for k in 0..f.grid.len() {
                    let mut sum = 0.0;
                    for (i, j) in CYCLIC_PAIRS {
                        let std = lagrangian::standardize_unitaries(&f.blocks[i][k], &f.blocks[j][k], tol).map_err(invalid(&f.grid))?;
                        let spec = interval_dirac::spectrum_of_standardized(std, sc.params.k_max, tol).map_err(invalid(&f.grid))?;
                        sum += interval_dirac::eta_of_spectrum(&spec, EtaMode::Numeric, tol).map_err(invalid(&f.grid))?;
                    }
                    if (sum - tau).abs() >= worst.0 {
                        worst = ((sum - tau).abs(), sum);
                    }
                }
                (c(tau), c(worst.1))
            };
            let id = Identity::new("", 0, None, lhs, rhs, Metric::Absolute, f64::INFINITY);
            rows.push(SweepRow { value: v, lhs, rhs, abs_discrepancy: id.abs_discrepancy, rel_discrepancy: id.rel_discrepancy });
            clock.stage(&format!("{:?}={v}", spec.axis).to_lowercase());
        }
        quantity = if two_dim {
            "lhs: ∫ch τ deg2; rhs: ∫Σ η deg2".to_string()
        } else {
            "lhs: τ; rhs: Σ η (numeric heat-trace quadrature, worst node)".to_string()
        };
    }
    Ok(SweepReport::new(spec.axis, &quantity, rows))
}

/// Run a scenario. On success returns the report (which may record failed
/// identities) and the timings.
pub fn run(s: &Scenario, dir: &Path) -> Result<(Report, Timings), CliError> {
    let tol = Tol::default();
    let mut clock = Clock::new();
    let (instances, identities, sweep) = run_task(s, dir, &tol, &mut clock)?;
    let passed = identities.iter().all(|i| i.passed);
    let report = Report { schema_version: REPORT_SCHEMA_VERSION, scenario: s.clone(), instances, identities, sweep, passed };
    Ok((report, clock.finish()))
}

/// Run a scenario with a sweep definition replacing the scenario's own.
pub fn run_sweep(s: &Scenario, dir: &Path, spec: SweepSpec) -> Result<(Report, Timings), CliError> {
    let mut sc = s.clone();
    sc.task = Task::Convergence;
    sc.sweep = Some(spec);
    run(&sc, dir)
}

/// First failed identity, as a verification error.
pub fn check(report: &Report) -> Result<(), CliError> {
    match report.identities.iter().find(|i| !i.passed) {
        None => Ok(()),
        Some(i) => Err(CliError::Verification(format!(
            "{} (instance {}): discrepancy {:e} exceeds tolerance {:e}",
            i.name,
            i.instance,
            match i.metric {
                Metric::Absolute => i.abs_discrepancy,
                Metric::Relative => i.rel_discrepancy.unwrap_or(i.abs_discrepancy),
            },
            i.tolerance
        ))),
    }
}
