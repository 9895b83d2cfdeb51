//! Subcommand orchestration and report emission.

use serde::Serialize;

use crate::clifford::{self, ResidualRow};
use crate::domain::{Comparison, PointKind, PolytopeDomain};
use crate::error::Error;
use crate::imcf::{ExteriorReport, FlowTrace};
use crate::linalg::pairwise_sum;
use crate::morrey::{self, MorreyConfig, MorreyReport, StratumFit};
use crate::scenario::{PolytopeScenario, Scenario, ScenarioBody, Tolerances};
use crate::surface::{self, directions, SmoothedSurface, SurfaceSample};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const HYPOTHESIS: u8 = 1;
    pub const LAMBDA_BELOW_THRESHOLD: u8 = 2;
    pub const DEGENERATE: u8 = 3;
    pub const INVALID_INPUT: u8 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Hypotheses,
    Sweep,
    Morrey,
    CliffordCheck,
    Imcf,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Hypotheses => "hypotheses",
            Command::Sweep => "sweep",
            Command::Morrey => "morrey",
            Command::CliffordCheck => "clifford-check",
            Command::Imcf => "imcf",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub lambdas: Option<Vec<f64>>,
    pub rays: Option<usize>,
    pub sigma: Option<f64>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: u8,
    pub artifacts: Vec<Artifact>,
    pub messages: Vec<String>,
}

impl Outcome {
    fn failed(code: u8, message: String) -> Self {
        Self {
            exit_code: code,
            artifacts: Vec::new(),
            messages: vec![message],
        }
    }
}

/// Exit code for an error raised while computing.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::SeedOutside { .. } => exit::LAMBDA_BELOW_THRESHOLD,
        Error::Invalid(_) | Error::Parse(_) => exit::INVALID_INPUT,
        Error::Eval(_)
        | Error::NotPositiveDefinite { .. }
        | Error::VanishingGradient { .. }
        | Error::NoCrossing { .. }
        | Error::Degenerate(_) => exit::DEGENERATE,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub evaluated: usize,
    pub failures: usize,
    pub min_margin: Option<f64>,
    pub passed: bool,
}

impl CheckSummary {
    fn from_margins(margins: &[f64], tol: f64) -> Self {
        let failures = margins.iter().filter(|m| !(**m >= -tol)).count();
        Self {
            evaluated: margins.len(),
            failures,
            min_margin: margins.iter().copied().reduce(f64::min),
            passed: failures == 0,
        }
    }
}

/// Domain hypothesis checks over boundary samples of `Ω`.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub samples: usize,
    pub regular_samples: usize,
    pub regular_value: CheckSummary,
    pub matching_angle: CheckSummary,
    pub mc_comparison: CheckSummary,
    /// Evaluated only where the mean-curvature comparison holds.
    pub lemma: CheckSummary,
    pub passed: bool,
}

pub fn run_hypotheses(p: &PolytopeScenario, tol: &Tolerances) -> Result<HypothesisReport, Error> {
    let d = &p.domain;
    let n = d.dim();
    let dirs = directions::directions(n, p.hypothesis_samples);
    let rows: Vec<Result<SampleChecks, Error>> = {
        use rayon::prelude::*;
        dirs.par_iter().map(|w| check_sample(d, w, tol)).collect()
    };
    let mut regular = Vec::new();
    let mut angles = Vec::new();
    let mut mc = Vec::new();
    let mut lemma = Vec::new();
    let mut regular_samples = 0;
    for r in rows {
        let r = r?;
        if r.regular {
            regular_samples += 1;
        }
        regular.push(r.regular_value);
        angles.extend(r.angles);
        if let Some(m) = r.mc {
            mc.push(m);
            if m >= -tol.mc_comparison {
                lemma.extend(r.lemma);
            }
        }
    }
    let regular_value = CheckSummary::from_margins(&regular, 0.0);
    // matching angle is a two-sided condition
    let abs_angles: Vec<f64> = angles.iter().map(|a| 0.0 - a.abs()).collect();
    let matching_angle = CheckSummary::from_margins(&abs_angles, tol.matching_angle);
    let mc_comparison = CheckSummary::from_margins(&mc, tol.mc_comparison);
    let lemma = CheckSummary::from_margins(&lemma, tol.lemma);
    let passed = regular_value.passed && matching_angle.passed && mc_comparison.passed && lemma.passed;
    Ok(HypothesisReport {
        samples: dirs.len(),
        regular_samples,
        regular_value,
        matching_angle,
        mc_comparison,
        lemma,
        passed,
    })
}

struct SampleChecks {
    regular: bool,
    regular_value: f64,
    angles: Vec<f64>,
    mc: Option<f64>,
    lemma: Option<f64>,
}

fn check_sample(d: &PolytopeDomain, omega: &[f64], tol: &Tolerances) -> Result<SampleChecks, Error> {
    let (x, face, _) = d.boundary_along(omega, 100.0)?;
    let c = d.classify(&x)?;
    let regular_value = d.regular_value_margin(&x, face)? - tol.regular_value;
    let mut angles = Vec::new();
    let values = d.values(&x)?;
    for j in 0..d.face_count() {
        if j == face || values[j] < -0.25 {
            continue;
        }
        let Ok(e) = d.project_to_edge(&x, face, j) else { continue };
        let dist: f64 = e.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let ev = d.values(&e)?;
        if dist < 0.5 && ev.iter().all(|v| *v <= 1e-9) {
            angles.push(d.check_matching_angle(&e, face, j)?);
        }
    }
    let (mc, lemma) = if c.kind == PointKind::Regular {
        (
            Some(d.check_mc_metric_comparison(&x, face, Comparison::AtLeast)?),
            Some(d.check_lemma_comparison(&x, face)?),
        )
    } else {
        (None, None)
    };
    Ok(SampleChecks {
        regular: c.kind == PointKind::Regular,
        regular_value,
        angles,
        mc,
        lemma,
    })
}

/// Per-λ checks on the surface samples.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceDiagnostics {
    pub lambda: f64,
    pub samples: usize,
    pub max_residual: f64,
    /// `min (H − ‖dN‖_tr − V_λ)` over samples.
    pub proposition_min_margin: f64,
    pub proposition_failures: usize,
    /// `max |H − H_level|` between the two mean-curvature paths.
    pub mean_curvature_path_gap: f64,
    pub c1_inf: f64,
    pub c2_inf: f64,
    /// `−½ ∫ (H − ‖dN‖_tr)` for a unit constant spinor tuple (odd `n` only).
    pub boundary_term: Option<f64>,
}

pub fn surface_diagnostics(samples: &[SurfaceSample], tol: &Tolerances) -> SurfaceDiagnostics {
    let margins: Vec<f64> = samples.iter().map(|s| s.h - s.tr_n - s.v).collect();
    let (c1, c2) = surface::c_constants(samples);
    let n = samples.first().map_or(0, |s| s.x.len());
    let boundary_term = (n % 2 == 1 && n >= 3).then(|| {
        let terms: Vec<f64> = samples.iter().map(|s| s.weight * (s.h - s.tr_n)).collect();
        -0.5 * pairwise_sum(&terms)
    });
    SurfaceDiagnostics {
        lambda: samples.first().map_or(f64::NAN, |s| s.lambda),
        samples: samples.len(),
        max_residual: samples.iter().map(|s| s.residual).fold(0.0, f64::max),
        proposition_min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
        proposition_failures: margins.iter().filter(|m| !(**m >= -tol.proposition)).count(),
        mean_curvature_path_gap: samples
            .iter()
            .map(|s| (s.h - s.h_level).abs())
            .fold(0.0, f64::max),
        c1_inf: c1,
        c2_inf: c2,
        boundary_term,
    }
}

/// Everything computed for one λ.
pub struct LambdaRun {
    pub samples: Vec<SurfaceSample>,
    pub report: MorreyReport,
    pub diagnostics: SurfaceDiagnostics,
}

fn check_lambdas(p: &PolytopeScenario, cfg: &MorreyConfig) -> Result<f64, Outcome> {
    let l0 = surface::lambda0(&p.domain).map_err(|e| Outcome::failed(exit_code_for(&e), e.to_string()))?;
    if let Some(bad) = cfg.lambdas.iter().find(|l| **l <= l0) {
        return Err(Outcome::failed(
            exit::LAMBDA_BELOW_THRESHOLD,
            format!("lambda = {bad} is not above the threshold lambda0 = {l0}"),
        ));
    }
    Ok(l0)
}

pub fn run_lambdas(p: &PolytopeScenario, cfg: &MorreyConfig, tol: &Tolerances) -> Result<Vec<LambdaRun>, Error> {
    cfg.lambdas
        .iter()
        .map(|&lambda| {
            let surf = SmoothedSurface::new(&p.domain, lambda, p.surface)?;
            let samples = surf.sample_rays(cfg.rays)?;
            let report = morrey::morrey_sup(&samples, cfg)?;
            let diagnostics = surface_diagnostics(&samples, tol);
            Ok(LambdaRun {
                samples,
                report,
                diagnostics,
            })
        })
        .collect()
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn effective_config(scn: &Scenario, o: &Overrides) -> MorreyConfig {
    let mut cfg = scn.morrey.clone();
    if let Some(l) = &o.lambdas {
        cfg.lambdas = l.clone();
    }
    if let Some(r) = o.rays {
        cfg.rays = r;
    }
    if let Some(s) = o.sigma {
        cfg.sigma = s;
    }
    cfg
}

fn per_radius_csv(reports: &[MorreyReport]) -> String {
    let mut out = String::from("lambda,r,total,face,edge,vertex\n");
    for rep in reports {
        for row in &rep.per_radius {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e}\n",
                rep.lambda, row.r, row.total, row.face, row.edge, row.vertex
            ));
        }
    }
    out
}

fn hypotheses_csv(h: &HypothesisReport) -> String {
    let mut out = String::from("check,evaluated,failures,min_margin,passed\n");
    for (name, c) in [
        ("regular_value", &h.regular_value),
        ("matching_angle", &h.matching_angle),
        ("mc_comparison", &h.mc_comparison),
        ("lemma", &h.lemma),
    ] {
        let m = c.min_margin.map_or(String::new(), |v| format!("{v:e}"));
        out.push_str(&format!("{name},{},{},{m},{}\n", c.evaluated, c.failures, c.passed));
    }
    out
}

fn clifford_csv(rows: &[ResidualRow]) -> String {
    let mut out = String::from(
        "n,m,pairs,anticommutator,skew_hermitian,volume_modulus_deviation,omega_sum,chi_square,chi_hermitian,chi_unitary,kernel_dim_min,kernel_dim_max,kernel_dim_expected\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{}\n",
            r.n,
            r.m,
            r.pairs,
            r.anticommutator,
            r.skew_hermitian,
            r.volume_modulus_deviation,
            r.omega_sum,
            r.chi_square,
            r.chi_hermitian,
            r.chi_unitary,
            r.kernel_dim_min,
            r.kernel_dim_max,
            r.kernel_dim_expected
        ));
    }
    out
}

pub const CLIFFORD_PAIRS: usize = 100;
const CLIFFORD_SEED: u64 = 0x5eed;

#[derive(Serialize)]
struct SweepJson<'a> {
    scenario: &'a str,
    lambda0: f64,
    reports: Vec<&'a MorreyReport>,
    diagnostics: Vec<&'a SurfaceDiagnostics>,
}

#[derive(Serialize)]
struct MorreyJson<'a> {
    scenario: &'a str,
    sigma: f64,
    reports: Vec<&'a MorreyReport>,
    region_bounds: Vec<StratumFit>,
}

#[derive(Serialize)]
struct ImcfJson<'a> {
    scenario: &'a str,
    report: &'a ExteriorReport,
    area_growth_residual: f64,
}

#[derive(Serialize)]
struct PolytopeBundle<'a> {
    scenario: &'a str,
    kind: &'static str,
    dimension: usize,
    faces: usize,
    lambda0: f64,
    rays: usize,
    sigma: f64,
    hypotheses: &'a HypothesisReport,
    sweep: Vec<&'a MorreyReport>,
    diagnostics: Vec<&'a SurfaceDiagnostics>,
    region_bounds: Vec<StratumFit>,
    clifford: Option<Vec<ResidualRow>>,
}

#[derive(Serialize)]
struct ExteriorBundle<'a> {
    scenario: &'a str,
    kind: &'static str,
    report: &'a ExteriorReport,
    flow: &'a FlowTrace,
    area_growth_residual: f64,
}

/// Run one subcommand. Worker-count limits are applied by the caller.
pub fn run(cmd: Command, scn: Option<&Scenario>, o: &Overrides) -> Outcome {
    match run_inner(cmd, scn, o) {
        Ok(out) => out,
        Err(e) => Outcome::failed(exit_code_for(&e), e.to_string()),
    }
}

fn artifact(scn: &str, stem: &str, ext: &str, contents: String) -> Artifact {
    Artifact {
        file_name: format!("{scn}_{stem}.{ext}"),
        contents,
    }
}

fn run_inner(cmd: Command, scn: Option<&Scenario>, o: &Overrides) -> Result<Outcome, Error> {
    let mut out = Outcome {
        exit_code: exit::OK,
        artifacts: Vec::new(),
        messages: Vec::new(),
    };
    if cmd == Command::CliffordCheck {
        let rows = clifford::residual_table(CLIFFORD_PAIRS, CLIFFORD_SEED)?;
        let prefix = scn.map_or("clifford", |s| s.name.as_str());
        let a = match o.format {
            Format::Json => artifact(prefix, "clifford", "json", json(&rows)),
            Format::Csv => artifact(prefix, "clifford", "csv", clifford_csv(&rows)),
        };
        out.artifacts.push(a);
        let ok = rows.iter().all(|r| {
            r.anticommutator < 1e-12
                && r.chi_square < 1e-12
                && r.chi_hermitian < 1e-12
                && r.kernel_dim_min == r.kernel_dim_expected
                && r.kernel_dim_max == r.kernel_dim_expected
        });
        if !ok {
            out.exit_code = exit::DEGENERATE;
            out.messages.push("Clifford residuals exceed 1e-12".into());
        }
        return Ok(out);
    }
    let Some(scn) = scn else {
        return Err(Error::Invalid(format!("`{}` needs a scenario file", cmd.name())));
    };
    let name = scn.name.as_str();
    let tol = &scn.tolerances;
    match &scn.body {
        ScenarioBody::Exterior(e) => {
            let ext = &e.exterior;
            match cmd {
                Command::Sweep | Command::Morrey => {
                    return Err(Error::Invalid(format!(
                        "`{}` needs a polytope scenario",
                        cmd.name()
                    )))
                }
                _ => {}
            }
            let report = ext.inequality_chain(&tol.exterior())?;
            let flow = ext.default_flow_trace(e.flow_rows)?;
            let growth = flow.area_growth_residual();
            for v in &report.violated_hypotheses {
                out.messages.push(format!("warning: hypothesis violated: {v}"));
            }
            match cmd {
                Command::Hypotheses => {
                    out.artifacts.push(artifact(name, "hypotheses", "json", json(&report)));
                    let hyp_ok = report.violated_hypotheses.is_empty()
                        && report.checks.iter().take(2).all(|c| c.status == crate::imcf::CheckStatus::Pass);
                    if !hyp_ok {
                        out.exit_code = exit::HYPOTHESIS;
                    }
                }
                Command::Imcf => {
                    out.artifacts.push(artifact(name, "flow", "csv", flow.to_csv()));
                    out.artifacts.push(artifact(
                        name,
                        "imcf",
                        "json",
                        json(&ImcfJson {
                            scenario: name,
                            report: &report,
                            area_growth_residual: growth,
                        }),
                    ));
                }
                Command::Report => {
                    out.artifacts.push(artifact(
                        name,
                        "report",
                        "json",
                        json(&ExteriorBundle {
                            scenario: name,
                            kind: "exterior",
                            report: &report,
                            flow: &flow,
                            area_growth_residual: growth,
                        }),
                    ));
                }
                _ => unreachable!(),
            }
            Ok(out)
        }
        ScenarioBody::Polytope(p) => {
            if cmd == Command::Imcf {
                return Err(Error::Invalid("`imcf` needs an exterior scenario".into()));
            }
            if cmd == Command::Hypotheses {
                let h = run_hypotheses(p, tol)?;
                out.artifacts.push(match o.format {
                    Format::Json => artifact(name, "hypotheses", "json", json(&h)),
                    Format::Csv => artifact(name, "hypotheses", "csv", hypotheses_csv(&h)),
                });
                if !h.passed {
                    out.exit_code = exit::HYPOTHESIS;
                    out.messages.push("hypothesis check failed".into());
                }
                return Ok(out);
            }
            let cfg = effective_config(scn, o);
            cfg.validate()?;
            let l0 = match check_lambdas(p, &cfg) {
                Ok(l) => l,
                Err(fail) => return Ok(fail),
            };
            let hyp = if cmd == Command::Report {
                Some(run_hypotheses(p, tol)?)
            } else {
                None
            };
            if let Some(h) = &hyp {
                if !h.passed {
                    out.messages.push("warning: hypothesis check failed".into());
                }
            }
            let runs = run_lambdas(p, &cfg, tol)?;
            let reports: Vec<&MorreyReport> = runs.iter().map(|r| &r.report).collect();
            let diags: Vec<&SurfaceDiagnostics> = runs.iter().map(|r| &r.diagnostics).collect();
            for d in &diags {
                if d.proposition_failures > 0 {
                    out.messages.push(format!(
                        "warning: {} samples violate H - trN >= V at lambda {}",
                        d.proposition_failures, d.lambda
                    ));
                }
            }
            let owned: Vec<MorreyReport> = runs.iter().map(|r| r.report.clone()).collect();
            match cmd {
                Command::Sweep => match o.format {
                    Format::Csv => {
                        out.artifacts.push(artifact(name, "sweep", "csv", morrey::sweep_csv(&owned)));
                        for r in &runs {
                            out.artifacts.push(artifact(
                                name,
                                &format!("samples_lambda{}", r.report.lambda),
                                "csv",
                                surface::samples_csv(&r.samples, 1.0),
                            ));
                        }
                    }
                    Format::Json => out.artifacts.push(artifact(
                        name,
                        "sweep",
                        "json",
                        json(&SweepJson {
                            scenario: name,
                            lambda0: l0,
                            reports,
                            diagnostics: diags,
                        }),
                    )),
                },
                Command::Morrey => match o.format {
                    Format::Csv => out.artifacts.push(artifact(name, "morrey", "csv", per_radius_csv(&owned))),
                    Format::Json => out.artifacts.push(artifact(
                        name,
                        "morrey",
                        "json",
                        json(&MorreyJson {
                            scenario: name,
                            sigma: cfg.sigma,
                            reports,
                            region_bounds: morrey::region_bound_report(&owned),
                        }),
                    )),
                },
                Command::Report => {
                    let n = p.domain.dim();
                    let clifford = if n % 2 == 1 {
                        Some(clifford::residual_table(CLIFFORD_PAIRS, CLIFFORD_SEED)?)
                    } else {
                        None
                    };
                    out.artifacts.push(artifact(
                        name,
                        "report",
                        "json",
                        json(&PolytopeBundle {
                            scenario: name,
                            kind: "polytope",
                            dimension: n,
                            faces: p.domain.face_count(),
                            lambda0: l0,
                            rays: cfg.rays,
                            sigma: cfg.sigma,
                            hypotheses: hyp.as_ref().expect("computed for report"),
                            sweep: reports,
                            diagnostics: diags,
                            region_bounds: morrey::region_bound_report(&owned),
                            clifford,
                        }),
                    ));
                }
                _ => unreachable!(),
            }
            Ok(out)
        }
    }
}
