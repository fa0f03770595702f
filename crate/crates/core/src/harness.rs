//! Run configuration, pipeline orchestration and report emission.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::cell_dynamic::{extract_kernels, solve_cell_solution_set, Lifting, MemoryKernelTable, TimeGrid};
use crate::cell_static::{assemble_effective_tensors, solve_static_correctors, CellModel, EffectiveCoefficients, Normalization};
use crate::error::{Error, Result};
use crate::macro_interface::{
    solve_macro_gamma1, solve_macro_gamma_minus1, solve_macro_gamma_minus3, solve_two_scale_reference, BulkMaterial, MacroConfig,
    MacroMode, MacroSolution,
};
use crate::mesh::{CellMeshSpec, PeriodicCellMesh};
use crate::micro_direct::{compare_micro_macro, errors_csv, solve_micro, unfolding_norms, MicroConfig, MicroMacroError};
use crate::tensor::Material;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    pub spec: CellMeshSpec,
    pub material: BulkMaterial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub time: TimeGrid,
    #[serde(default)]
    pub lifting: Lifting,
    /// Store every `stride`-th cell snapshot (0: final only).
    #[serde(default)]
    pub stride: usize,
}

fn default_grading() -> f64 {
    1.25
}

fn default_true() -> bool {
    true
}

fn default_scaling_constant() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroSection {
    pub epsilons: Vec<f64>,
    /// Largest bulk element size along x₁.
    pub bulk_h: f64,
    #[serde(default = "default_grading")]
    pub grading: f64,
    /// Layer material; defaults to the cell material.
    #[serde(default)]
    pub layer_material: Option<BulkMaterial>,
    #[serde(default = "default_true")]
    pub scale_layer: bool,
    #[serde(default = "default_scaling_constant")]
    pub scaling_constant: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    CsvBundle,
    TextSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
    #[serde(default)]
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub system: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NormalizationSection {
    #[serde(default)]
    pub plate: Normalization,
}

/// One JSON document driving every stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub cell: Option<CellSection>,
    #[serde(default)]
    pub dynamics: Option<DynamicsSection>,
    /// `time` may be omitted when `dynamics` is present.
    #[serde(default, rename = "macro")]
    pub macro_run: Option<MacroConfig>,
    #[serde(default)]
    pub micro: Option<MicroSection>,
    #[serde(default)]
    pub outputs: OutputsSection,
    #[serde(default)]
    pub normalization: NormalizationSection,
}

fn config_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), msg: msg.into() }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| config_err("", e.to_string()))?;
        if let (Some(t), Some(Value::Object(m))) = (value.pointer("/dynamics/time").cloned(), value.get_mut("macro")) {
            m.entry("time").or_insert(t);
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Cross-section consistency.
    pub fn check(&self) -> Result<()> {
        if let Some(c) = &self.cell {
            c.spec.validate().map_err(|e| config_err("cell.spec", e.to_string()))?;
            c.material.validate().map_err(|e| config_err("cell.material", e.to_string()))?;
        }
        if let Some(d) = &self.dynamics {
            d.time.validate().map_err(|e| config_err("dynamics.time", e.to_string()))?;
        }
        if let Some(m) = &self.macro_run {
            m.validate().map_err(|e| config_err("macro", e.to_string()))?;
            let cell = self.cell.as_ref().ok_or_else(|| config_err("cell", "the macro stage needs a cell section"))?;
            let ncomp = match m.mode {
                MacroMode::Normal1d => m.components,
                MacroMode::Plane2d => 2,
            };
            if cell.spec.dimension != ncomp {
                return Err(config_err("cell.spec.dimension", format!("macro run has {ncomp} components, cell has dimension {}", cell.spec.dimension)));
            }
            if m.gamma == 1 {
                let d = self.dynamics.as_ref().ok_or_else(|| config_err("dynamics", "gamma = 1 needs a dynamics section"))?;
                if d.time != m.time {
                    return Err(config_err("macro.time", "macro and kernel time grids differ"));
                }
            }
        }
        if let Some(mi) = &self.micro {
            let m = self.macro_run.as_ref().ok_or_else(|| config_err("macro", "the micro ladder needs a macro section"))?;
            if m.mode != MacroMode::Plane2d {
                return Err(config_err("macro.mode", "the micro ladder needs plane_2d"));
            }
            if mi.epsilons.is_empty() {
                return Err(config_err("micro.epsilons", "at least one epsilon is required"));
            }
            for (k, cfg) in self.micro_configs()?.iter().enumerate() {
                cfg.validate().map_err(|e| config_err(&format!("micro.epsilons[{k}]"), e.to_string()))?;
                cfg.cells().map_err(|e| config_err(&format!("micro.epsilons[{k}]"), e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn micro_configs(&self) -> Result<Vec<MicroConfig>> {
        let (Some(mi), Some(m), Some(c)) = (&self.micro, &self.macro_run, &self.cell) else {
            return Ok(Vec::new());
        };
        mi.epsilons
            .iter()
            .map(|&eps| {
                let mut cfg = MicroConfig::from_macro(m, eps, c.spec.clone(), mi.layer_material.unwrap_or(c.material), mi.bulk_h)
                    .map_err(|e| config_err("micro", e.to_string()))?;
                cfg.grading = mi.grading;
                cfg.scale_layer = mi.scale_layer;
                cfg.scaling_constant = mi.scaling_constant;
                Ok(cfg)
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Cell,
    Tensors,
    Kernels,
    Macro,
    Micro,
    Converge,
}

/// Stage selection of a command-line subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Cell,
    Tensors,
    Kernels,
    Macro,
    Micro,
    Converge,
    Report,
}

impl Command {
    pub fn stages(self, cfg: &RunConfig) -> Vec<Stage> {
        let gamma = cfg.macro_run.as_ref().map(|m| m.gamma);
        let for_macro = |v: &mut Vec<Stage>| {
            match gamma {
                Some(1) => v.push(Stage::Kernels),
                Some(_) => v.push(Stage::Tensors),
                None => {}
            }
            v.push(Stage::Macro);
        };
        let mut v = vec![Stage::Cell];
        match self {
            Command::Cell => {}
            Command::Tensors => v.push(Stage::Tensors),
            Command::Kernels => v.push(Stage::Kernels),
            Command::Macro => for_macro(&mut v),
            Command::Micro => v.push(Stage::Micro),
            Command::Converge => {
                for_macro(&mut v);
                v.push(Stage::Converge);
            }
            Command::Report => {
                if cfg.cell.is_none() {
                    return Vec::new();
                }
                v.push(Stage::Tensors);
                if cfg.dynamics.is_some() {
                    v.push(Stage::Kernels);
                }
                if cfg.macro_run.is_some() {
                    v.push(Stage::Macro);
                }
                if cfg.micro.is_some() {
                    v.push(Stage::Converge);
                }
            }
        }
        v.sort();
        v.dedup();
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub stages: Vec<Stage>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub spec_hash: String,
    pub elements: usize,
    pub removed: usize,
    pub active_nodes: usize,
    pub measure: f64,
    pub watertight: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelSummary {
    pub dim: usize,
    pub steps: usize,
    pub dt: f64,
    pub norm_g: f64,
    pub norm_f: f64,
    pub max_abs_f0: f64,
    pub max_energy_drift: f64,
}

/// Per-ε micro run without a macro comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MicroRunSummary {
    pub epsilon: f64,
    pub apriori_monitor: f64,
    pub energy_balance: f64,
    pub traction_jump: f64,
    pub unfolding_isometry: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InvariantCheck {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        InvariantCheck { name: name.into(), value, tolerance, pass: value <= tolerance }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub provenance: Option<Provenance>,
    pub cell: Option<CellSummary>,
    pub coefficients: Option<EffectiveCoefficients>,
    pub kernels: Option<MemoryKernelTable>,
    pub kernel_summary: Option<KernelSummary>,
    pub macro_run: Option<MacroSolution>,
    pub micro_runs: Vec<MicroRunSummary>,
    pub ladder: Vec<MicroMacroError>,
    pub invariants: Vec<InvariantCheck>,
    pub mesh_text: Option<String>,
    pub system_text: Option<String>,
}

impl RunReport {
    pub fn is_empty(&self) -> bool {
        self.cell.is_none() && self.coefficients.is_none() && self.kernels.is_none() && self.macro_run.is_none() && self.micro_runs.is_empty() && self.ladder.is_empty()
    }

    pub fn all_pass(&self) -> bool {
        self.invariants.iter().all(|c| c.pass)
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

fn cell_model(c: &CellSection) -> Result<CellModel> {
    let d = c.spec.dimension;
    CellModel::new(&c.spec, &Material::isotropic(c.material.lambda, c.material.mu, c.material.rho, d)?)
}

fn tensors(cell: &CellModel, norm: Normalization) -> Result<EffectiveCoefficients> {
    assemble_effective_tensors(&solve_static_correctors(cell)?, cell, norm)
}

fn kernels(cell: &CellModel, d: &DynamicsSection) -> Result<(MemoryKernelTable, f64)> {
    let set = solve_cell_solution_set(cell, d.time, d.lifting, false, d.stride)?;
    let drift = set.chi.iter().chain(&set.eta).flatten().map(|s| s.max_energy_drift()).fold(0.0, f64::max);
    Ok((extract_kernels(&set)?, drift))
}

/// Executes the stages in dependency order.
pub fn run_stages(cfg: &RunConfig, stages: &[Stage]) -> Result<RunReport> {
    let mut report = RunReport::default();
    if stages.is_empty() {
        return Ok(report);
    }
    report.provenance = Some(Provenance { config_hash: cfg.hash(), version: VERSION.to_string(), stages: stages.to_vec() });
    let has = |s: Stage| stages.contains(&s);
    let cell_cfg = cfg.cell.as_ref().ok_or_else(|| config_err("cell", "every stage needs a cell section"))?;
    let cell = stage("cell", cell_model(cell_cfg))?;
    let mesh: &PeriodicCellMesh = &cell.mesh;
    report.cell = Some(CellSummary {
        spec_hash: mesh.spec().hash(),
        elements: mesh.num_elements(),
        removed: mesh.num_removed(),
        active_nodes: mesh.num_active_nodes(),
        measure: mesh.measure(),
        watertight: mesh.is_watertight(),
    });
    report.invariants.push(InvariantCheck { name: "cell_watertight".into(), value: mesh.is_watertight() as u8 as f64, tolerance: 1.0, pass: mesh.is_watertight() });
    if cfg.outputs.mesh.is_some() {
        report.mesh_text = Some(mesh.export_text());
    }
    if cfg.outputs.system.is_some() {
        report.system_text = Some(cell.stiffness.dump_coo());
    }

    let need_tensors = has(Stage::Tensors);
    let need_kernels = has(Stage::Kernels);
    let (coeffs, kern) = rayon::join(
        || need_tensors.then(|| stage("tensors", tensors(&cell, cfg.normalization.plate))).transpose(),
        || {
            need_kernels
                .then(|| {
                    let d = cfg.dynamics.as_ref().ok_or_else(|| config_err("dynamics", "the kernel stage needs a dynamics section"))?;
                    stage("kernels", kernels(&cell, d))
                })
                .transpose()
        },
    );
    if let Some(c) = coeffs? {
        let sym = (0..c.a_star.voigt().nrows())
            .flat_map(|i| (0..c.a_star.voigt().ncols()).map(move |j| (i, j)))
            .map(|(i, j)| (c.a_star.voigt()[(i, j)] - c.a_star.voigt()[(j, i)]).abs())
            .fold(0.0, f64::max);
        report.invariants.push(InvariantCheck::at_most("a_star_major_symmetry", sym / c.a_star.voigt().amax(), 1e-12));
        report.coefficients = Some(c);
    }
    if let Some((table, drift)) = kern? {
        report.invariants.push(InvariantCheck::at_most("kernel_f_at_zero", table.max_abs_f0(), 0.0));
        report.invariants.push(InvariantCheck::at_most("cell_energy_drift", drift, 1e-8));
        report.kernel_summary = Some(KernelSummary {
            dim: cell.dim(),
            steps: table.steps(),
            dt: table.dt(),
            norm_g: table.norm_g(),
            norm_f: table.norm_f(),
            max_abs_f0: table.max_abs_f0(),
            max_energy_drift: drift,
        });
        report.kernels = Some(table);
    }

    if has(Stage::Macro) {
        let m = cfg.macro_run.as_ref().ok_or_else(|| config_err("macro", "the macro stage needs a macro section"))?;
        let sol = stage(
            "macro",
            match m.gamma {
                1 if !m.layer.is_zero() => solve_two_scale_reference(m, &cell).map(|(s, _)| s),
                1 => solve_macro_gamma1(m, report.kernels.as_ref().ok_or_else(|| Error::Missing("kernel table".into()))?),
                -1 => solve_macro_gamma_minus1(m, report.coefficients.as_ref().ok_or_else(|| Error::Missing("effective coefficients".into()))?),
                _ => solve_macro_gamma_minus3(m, report.coefficients.as_ref().ok_or_else(|| Error::Missing("effective coefficients".into()))?),
            },
        )?;
        report.invariants.push(InvariantCheck::at_most("macro_energy_balance", sol.energy_balance_error(), 1e-6));
        report.macro_run = Some(sol);
    }

    if has(Stage::Micro) || has(Stage::Converge) {
        use rayon::prelude::*;
        let configs = cfg.micro_configs()?;
        if configs.is_empty() {
            return Err(config_err("micro", "the micro stage needs micro and macro sections"));
        }
        let runs = configs
            .par_iter()
            .map(|c| {
                let sol = stage("micro", solve_micro(c))?;
                let (lhs, rhs) = stage("micro", unfolding_norms(&sol.mesh, &sol.final_snapshot().u))?;
                let summary = MicroRunSummary {
                    epsilon: c.epsilon,
                    apriori_monitor: sol.monitor.total,
                    energy_balance: sol.energy_balance_error(),
                    traction_jump: sol.traction_jump,
                    unfolding_isometry: if lhs == 0.0 { 0.0 } else { (lhs - rhs).abs() / lhs },
                    warnings: sol.warnings.clone(),
                };
                let err = match (&report.macro_run, has(Stage::Converge)) {
                    (Some(m), true) => Some(stage("converge", compare_micro_macro(&sol, m, c.gamma))?),
                    _ => None,
                };
                Ok((summary, err))
            })
            .collect::<Result<Vec<_>>>()?;
        for (s, e) in runs {
            report.invariants.push(InvariantCheck::at_most(format!("micro_energy_balance[eps={}]", s.epsilon), s.energy_balance, 1e-6));
            report.invariants.push(InvariantCheck::at_most(format!("micro_traction_jump[eps={}]", s.epsilon), s.traction_jump, 1e-9));
            report.invariants.push(InvariantCheck::at_most(format!("unfolding_isometry[eps={}]", s.epsilon), s.unfolding_isometry, 1e-12));
            report.micro_runs.push(s);
            report.ladder.extend(e);
        }
        if report.ladder.len() > 1 {
            let mut sorted = report.ladder.clone();
            sorted.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
            let worst = sorted.windows(2).map(|w| w[1].bulk_l2 - w[0].bulk_l2).fold(f64::NEG_INFINITY, f64::max);
            report.invariants.push(InvariantCheck { name: "ladder_bulk_error_decreasing".into(), value: worst, tolerance: 0.0, pass: worst < 0.0 });
            let first = sorted[0].apriori_monitor;
            let peak = sorted.iter().map(|r| r.apriori_monitor).fold(0.0, f64::max);
            report.invariants.push(InvariantCheck::at_most("ladder_monitor_ratio", peak / first, 2.0));
        }
    }
    Ok(report)
}

pub fn run_config(path: &Path) -> Result<RunReport> {
    let cfg = RunConfig::from_path(path)?;
    run_stages(&cfg, &Command::Report.stages(&cfg))
}

fn provenance_csv(p: &Provenance) -> String {
    let stages: Vec<String> = p.stages.iter().map(|s| serde_json::to_value(s).expect("stage").as_str().expect("name").to_string()).collect();
    format!("key,value\nconfig_hash,{}\nversion,{}\nstages,{}\n", p.config_hash, p.version, stages.join(";"))
}

fn micro_runs_csv(runs: &[MicroRunSummary]) -> String {
    let mut s = String::from("epsilon,apriori_monitor,energy_balance,traction_jump,unfolding_isometry,warnings\n");
    for r in runs {
        let _ = writeln!(s, "{:e},{:e},{:e},{:e},{:e},{}", r.epsilon, r.apriori_monitor, r.energy_balance, r.traction_jump, r.unfolding_isometry, r.warnings.len());
    }
    s
}

/// Human-readable summary with the invariant ledger.
pub fn text_summary(report: &RunReport) -> String {
    let mut s = String::from("thinlayer run summary\n");
    match &report.provenance {
        Some(p) => {
            let _ = writeln!(s, "config hash: {}\nversion: {}", p.config_hash, p.version);
        }
        None => s.push_str("no stages executed\n"),
    }
    let artifacts = artifact_names(report);
    let _ = writeln!(s, "artifacts: {}", artifacts.len());
    if let Some(c) = &report.cell {
        let _ = writeln!(
            s,
            "cell {}: {} elements, {} removed, {} active nodes, measure {:.6e}, watertight {}",
            c.spec_hash, c.elements, c.removed, c.active_nodes, c.measure, c.watertight
        );
    }
    if let Some(c) = &report.coefficients {
        let _ = writeln!(s, "rho_bar {:.6e}, cell measure {:.6e}, normalization {:?}", c.rho_bar, c.cell_measure, c.normalization);
        let _ = writeln!(s, "A_star voigt:\n{}", fmt_matrix(c.a_star.voigt()));
        let _ = writeln!(s, "a_star voigt:\n{}", fmt_matrix(c.a_plate.voigt()));
        let _ = writeln!(s, "b_star voigt:\n{}", fmt_matrix(&c.b_plate));
        let _ = writeln!(s, "c_star voigt:\n{}", fmt_matrix(c.c_plate.voigt()));
    }
    if let Some(k) = &report.kernel_summary {
        let _ = writeln!(
            s,
            "kernels: d={} steps={} dt={:.6e} |G|={:.6e} |F|={:.6e} max|F(0)|={:.3e} drift={:.3e}",
            k.dim, k.steps, k.dt, k.norm_g, k.norm_f, k.max_abs_f0, k.max_energy_drift
        );
    }
    if let Some(m) = &report.macro_run {
        let _ = writeln!(s, "macro gamma={} mode={:?} probes={} energy balance {:.3e}", m.gamma, m.mode, m.probes.len(), m.energy_balance_error());
    }
    for r in &report.micro_runs {
        let _ = writeln!(s, "micro eps={:.6e}: monitor {:.6e}, warnings {}", r.epsilon, r.apriori_monitor, r.warnings.len());
        for w in &r.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
    }
    if !report.ladder.is_empty() {
        s.push_str("ladder:\n");
        s.push_str(&errors_csv(&report.ladder));
    }
    s.push_str("invariants:\n");
    for c in &report.invariants {
        let _ = writeln!(s, "  {} {} value={:.3e} tol={:.1e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    s
}

fn fmt_matrix(m: &nalgebra::DMatrix<f64>) -> String {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| format!("{:+.6e}", m[(i, j)])).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn artifact_names(report: &RunReport) -> Vec<&'static str> {
    let mut v = Vec::new();
    if report.is_empty() {
        return v;
    }
    if report.coefficients.is_some() {
        v.push("tensors.csv");
    }
    if report.kernels.is_some() {
        v.push("kernels.csv");
    }
    if report.macro_run.is_some() {
        v.push("macro_probes.csv");
    }
    if !report.micro_runs.is_empty() {
        v.push("micro_runs.csv");
    }
    if !report.ladder.is_empty() {
        v.push("ladder.csv");
    }
    if !v.is_empty() {
        v.push("provenance.csv");
    }
    v
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes the report into `dir`; returns the written files in order.
pub fn emit_report(report: &RunReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
    let mut out = Vec::new();
    if format == ReportFormat::CsvBundle {
        for name in artifact_names(report) {
            let text = match name {
                "tensors.csv" => report.coefficients.as_ref().expect("listed").to_csv(),
                "kernels.csv" => report.kernels.as_ref().expect("listed").to_csv(),
                "macro_probes.csv" => report.macro_run.as_ref().expect("listed").to_csv(),
                "micro_runs.csv" => micro_runs_csv(&report.micro_runs),
                "ladder.csv" => errors_csv(&report.ladder),
                _ => provenance_csv(report.provenance.as_ref().expect("provenance with artifacts")),
            };
            let p = dir.join(name);
            write(&p, &text)?;
            out.push(p);
        }
    }
    let p = dir.join("summary.txt");
    write(&p, &text_summary(report))?;
    out.push(p);
    Ok(out)
}
