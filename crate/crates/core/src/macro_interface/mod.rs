//! Homogenized interface models: memory-kernel tractions (γ = 1) with a monolithic
//! two-scale reference, a membrane interface (γ = −1) and a plate interface (γ = −3).

mod beam;
mod bulk;
mod gamma1;
mod reference;
mod thin;

pub use beam::{clamped_beam_static, BeamStatic, HermiteBeam};
pub use bulk::{BulkMaterial, BulkSide, BulkSystem, MacroMode};
pub use gamma1::solve_macro_gamma1;
pub use reference::{jump_diagnostics, solve_two_scale_reference, JumpSeries, ReferenceLayer};
pub use thin::{solve_macro_gamma_minus1, solve_macro_gamma_minus3};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::cell_dynamic::{Face, TimeGrid};
use crate::error::{Error, Result};
use crate::fem::{sparse, CsrMatrix, DofMap};
use crate::newmark::{step_work, Newmark};

/// Scalar time signal times a vector amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pulse {
    #[default]
    Zero,
    Constant { amplitude: Vec<f64> },
    /// `sin(2πf(t−t₀))` under a Hann window of `cycles` periods.
    HannSine {
        amplitude: Vec<f64>,
        frequency: f64,
        cycles: f64,
        #[serde(default)]
        delay: f64,
    },
    /// Ricker wavelet with peak frequency `frequency` centred at `delay`.
    Ricker { amplitude: Vec<f64>, frequency: f64, delay: f64 },
}

impl Pulse {
    pub fn signal(&self, t: f64) -> f64 {
        match self {
            Pulse::Zero => 0.0,
            Pulse::Constant { .. } => 1.0,
            Pulse::HannSine { frequency, cycles, delay, .. } => {
                let s = t - delay;
                let dur = cycles / frequency;
                if s < 0.0 || s > dur {
                    0.0
                } else {
                    (2.0 * PI * frequency * s).sin() * 0.5 * (1.0 - (2.0 * PI * s / dur).cos())
                }
            }
            Pulse::Ricker { frequency, delay, .. } => {
                let a = (PI * frequency * (t - delay)).powi(2);
                (1.0 - 2.0 * a) * (-a).exp()
            }
        }
    }

    pub fn amplitude(&self) -> &[f64] {
        match self {
            Pulse::Zero => &[],
            Pulse::Constant { amplitude } | Pulse::HannSine { amplitude, .. } | Pulse::Ricker { amplitude, .. } => amplitude,
        }
    }

    pub fn value(&self, t: f64, ncomp: usize) -> Vec<f64> {
        let s = self.signal(t);
        let a = self.amplitude();
        (0..ncomp).map(|c| a.get(c).copied().unwrap_or(0.0) * s).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude().iter().all(|&a| a == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Pulse {
        let mut p = self.clone();
        match &mut p {
            Pulse::Zero => {}
            Pulse::Constant { amplitude } | Pulse::HannSine { amplitude, .. } | Pulse::Ricker { amplitude, .. } => {
                amplitude.iter_mut().for_each(|a| *a *= c)
            }
        }
        p
    }
}

/// Variation of the left-end traction along x₂ (2D only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Uniform,
    HalfSine,
}

impl Profile {
    pub fn value(&self, x2: f64, width: f64) -> f64 {
        match self {
            Profile::Uniform => 1.0,
            Profile::HalfSine => (PI * x2 / width).sin(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EndCondition {
    #[default]
    Clamped,
    Free,
}

/// `amplitude · exp(−((x₁ − center)/width)²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian {
    pub amplitude: Vec<f64>,
    pub center: f64,
    pub width: f64,
}

impl Gaussian {
    pub fn value(&self, x1: f64) -> Vec<f64> {
        let g = (-((x1 - self.center) / self.width).powi(2)).exp();
        self.amplitude.iter().map(|a| a * g).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialBulk {
    #[serde(default)]
    pub displacement: Option<Gaussian>,
    #[serde(default)]
    pub velocity: Option<Gaussian>,
}

/// Layer data u₀ᴹ, u₁ᴹ (constant vectors) and the layer force f^M.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LayerData {
    #[serde(default)]
    pub force: Pulse,
    #[serde(default)]
    pub initial_displacement: Vec<f64>,
    #[serde(default)]
    pub initial_velocity: Vec<f64>,
}

impl LayerData {
    pub fn is_zero(&self) -> bool {
        self.force.is_zero() && self.initial_displacement.iter().all(|&x| x == 0.0) && self.initial_velocity.iter().all(|&x| x == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub label: String,
    pub x: [f64; 2],
    /// Side used when the probe sits on the interface.
    #[serde(default)]
    pub side: Option<Face>,
}

fn default_components() -> usize {
    2
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroConfig {
    pub mode: MacroMode,
    pub gamma: i32,
    pub minus: BulkMaterial,
    pub plus: BulkMaterial,
    /// Length L of each half-space.
    pub length: f64,
    /// Interface extent W (2D).
    #[serde(default)]
    pub width: f64,
    /// Elements along x₁ per side.
    pub elements: usize,
    /// Elements along x₂ (2D).
    #[serde(default)]
    pub elements_y: usize,
    /// Displacement components in 1D mode.
    #[serde(default = "default_components")]
    pub components: usize,
    #[serde(default)]
    pub right_end: EndCondition,
    /// Condition on x₂ ∈ {0, W} in 2D.
    #[serde(default = "free_end")]
    pub lateral: EndCondition,
    /// Traction g(t) applied at x₁ = −L.
    #[serde(default)]
    pub traction: Pulse,
    #[serde(default)]
    pub profile: Profile,
    /// Uniform bulk body force density f± (per unit mass).
    #[serde(default)]
    pub bulk_force: Pulse,
    #[serde(default)]
    pub layer: LayerData,
    #[serde(default)]
    pub initial: InitialBulk,
    pub time: TimeGrid,
    #[serde(default)]
    pub probes: Vec<Probe>,
    /// Store the bulk field every `snapshot_stride` steps (0: final step only).
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn free_end() -> EndCondition {
    EndCondition::Free
}

impl MacroConfig {
    /// Minimal 1D configuration; remaining fields take their defaults.
    pub fn normal_1d(gamma: i32, material: BulkMaterial, length: f64, elements: usize, time: TimeGrid) -> Self {
        MacroConfig {
            mode: MacroMode::Normal1d,
            gamma,
            minus: material,
            plus: material,
            length,
            width: 0.0,
            elements,
            elements_y: 0,
            components: 2,
            right_end: EndCondition::Clamped,
            lateral: EndCondition::Free,
            traction: Pulse::Zero,
            profile: Profile::Uniform,
            bulk_force: Pulse::Zero,
            layer: LayerData::default(),
            initial: InitialBulk::default(),
            time,
            probes: Vec::new(),
            snapshot_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![1, -1, -3].contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!("gamma must be 1, -1 or -3, got {}", self.gamma)));
        }
        self.minus.validate()?;
        self.plus.validate()?;
        self.time.validate()?;
        if !(self.length > 0.0) || self.elements == 0 {
            return Err(Error::InvalidParameter("length and elements must be positive".into()));
        }
        if self.mode == MacroMode::Plane2d && (!(self.width > 0.0) || self.elements_y < 2) {
            return Err(Error::InvalidParameter("plane_2d needs width > 0 and elements_y >= 2".into()));
        }
        Ok(())
    }

    pub fn ncomp(&self) -> usize {
        match self.mode {
            MacroMode::Normal1d => self.components,
            MacroMode::Plane2d => 2,
        }
    }

    pub fn build_bulk(&self) -> Result<BulkSystem> {
        self.validate()?;
        match self.mode {
            MacroMode::Normal1d => BulkSystem::normal_1d(self.minus, self.plus, self.length, self.elements, self.components),
            MacroMode::Plane2d => BulkSystem::plane_2d(self.minus, self.plus, self.length, self.width, self.elements, self.elements_y),
        }
    }

    /// Every forcing, initial and layer datum multiplied by `c`.
    pub fn scaled_data(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.traction = s.traction.scaled(c);
        s.bulk_force = s.bulk_force.scaled(c);
        s.layer.force = s.layer.force.scaled(c);
        s.layer.initial_displacement.iter_mut().for_each(|x| *x *= c);
        s.layer.initial_velocity.iter_mut().for_each(|x| *x *= c);
        for g in [&mut s.initial.displacement, &mut s.initial.velocity].into_iter().flatten() {
            g.amplitude.iter_mut().for_each(|x| *x *= c);
        }
        s
    }

    /// External bulk load at time t (traction at x₁ = −L plus body force).
    pub(crate) fn bulk_load(&self, bulk: &BulkSystem, t: f64) -> Vec<f64> {
        let nc = bulk.ncomp;
        let g = self.traction.value(t, nc);
        let w = bulk.width;
        let mut f = bulk.left_end_load(|x2| g.iter().map(|v| v * self.profile.value(x2, w)).collect());
        if !self.bulk_force.is_zero() {
            for (fi, bi) in f.iter_mut().zip(bulk.body_load(&self.bulk_force.value(t, nc))) {
                *fi += bi;
            }
        }
        f
    }

    pub(crate) fn body_only(&self, bulk: &BulkSystem, t: f64) -> Vec<f64> {
        if self.bulk_force.is_zero() {
            vec![0.0; bulk.num_dofs()]
        } else {
            bulk.body_load(&self.bulk_force.value(t, bulk.ncomp))
        }
    }

    pub(crate) fn initial_fields(&self, bulk: &BulkSystem) -> (Vec<f64>, Vec<f64>) {
        let f = |g: &Option<Gaussian>| match g {
            Some(g) => bulk.nodal_field(|x1, _| g.value(x1)),
            None => vec![0.0; bulk.num_dofs()],
        };
        (f(&self.initial.displacement), f(&self.initial.velocity))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSeries {
    pub label: String,
    pub x: [f64; 2],
    pub side: Face,
    pub u: Vec<Vec<f64>>,
    pub traction: Vec<Vec<f64>>,
}

/// Mid-interface displacement and force on the bulk per unit length, per side and step.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct InterfaceSeries {
    pub u: [Vec<Vec<f64>>; 2],
    pub v: [Vec<Vec<f64>>; 2],
    pub a: [Vec<Vec<f64>>; 2],
    /// `(K u + M a − f_body)/w` on the bulk side at the interface: force exerted on the
    /// bulk by the interface.
    pub traction: [Vec<Vec<f64>>; 2],
}

#[derive(Clone, Debug)]
pub struct MacroSolution {
    pub gamma: i32,
    pub mode: MacroMode,
    pub grid: TimeGrid,
    pub bulk: BulkSystem,
    pub probes: Vec<ProbeSeries>,
    pub interface: InterfaceSeries,
    /// Total discrete energy per step.
    pub energy: Vec<f64>,
    /// Cumulative work of the external loads per step.
    pub work: Vec<f64>,
    /// `(step, full bulk displacement)`.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    /// γ = −3: beam deflection, slope and condensed in-plane field at the interface nodes.
    pub beam: Option<BeamSeries>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BeamSeries {
    pub w: Vec<Vec<f64>>,
    pub slope: Vec<Vec<f64>>,
    pub u_hat: Vec<Vec<f64>>,
}

impl MacroSolution {
    /// `max_n |E_n − E_0 − W_n| / max_n E_n`.
    pub fn energy_balance_error(&self) -> f64 {
        let scale = self.energy.iter().chain(self.work.iter().map(|w| w.abs()).collect::<Vec<_>>().iter()).fold(0.0f64, |m, &e| m.max(e.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let e0 = self.energy[0];
        self.energy.iter().zip(&self.work).map(|(e, w)| (e - e0 - w).abs()).fold(0.0, f64::max) / scale
    }

    pub fn snapshot(&self, step: usize) -> Option<&Vec<f64>> {
        self.snapshots.iter().find(|(n, _)| *n == step).map(|(_, u)| u)
    }

    pub fn final_field(&self) -> &Vec<f64> {
        &self.snapshots.last().expect("final snapshot always stored").1
    }

    pub fn probe(&self, label: &str) -> Option<&ProbeSeries> {
        self.probes.iter().find(|p| p.label == label)
    }

    /// `t, probe_id, u_1.., traction_1..` with mid-interface rows labelled
    /// `interface_plus` / `interface_minus`.
    pub fn to_csv(&self) -> String {
        let nc = self.bulk.ncomp;
        let mut s = format!("# macro gamma={} mode={:?} dt={:e}\nt,probe_id", self.gamma, self.mode, self.grid.dt());
        for c in 0..nc {
            let _ = write!(s, ",u_{}", c + 1);
        }
        for c in 0..nc {
            let _ = write!(s, ",traction_{}", c + 1);
        }
        s.push('\n');
        let row = |s: &mut String, t: f64, id: &str, u: &[f64], tr: &[f64]| {
            let _ = write!(s, "{t:e},{id}");
            for v in u.iter().chain(tr) {
                let _ = write!(s, ",{v:e}");
            }
            s.push('\n');
        };
        for n in 0..=self.grid.steps {
            let t = self.grid.time(n);
            for p in &self.probes {
                row(&mut s, t, &p.label, &p.u[n], &p.traction[n]);
            }
            for f in Face::BOTH {
                row(&mut s, t, &format!("interface_{}", f.name()), &self.interface.u[f.index()][n], &self.interface.traction[f.index()][n]);
            }
        }
        s
    }
}

/// Accumulates per-step output from full bulk fields.
pub(crate) struct Recorder<'a> {
    cfg: &'a MacroConfig,
    bulk: &'a BulkSystem,
    sides: Vec<Face>,
    sol: MacroSolution,
    last_load: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(cfg: &'a MacroConfig, bulk: &'a BulkSystem) -> Result<Self> {
        let sides = cfg
            .probes
            .iter()
            .map(|p| bulk.side_of(p.x[0], p.side.unwrap_or(Face::Minus)))
            .collect();
        let sol = MacroSolution {
            gamma: cfg.gamma,
            mode: cfg.mode,
            grid: cfg.time,
            bulk: bulk.clone(),
            probes: cfg
                .probes
                .iter()
                .zip(&sides)
                .map(|(p, &side)| ProbeSeries { label: p.label.clone(), x: p.x, side, u: Vec::new(), traction: Vec::new() })
                .collect(),
            interface: InterfaceSeries::default(),
            energy: Vec::new(),
            work: Vec::new(),
            snapshots: Vec::new(),
            beam: None,
            warnings: Vec::new(),
        };
        Ok(Recorder { cfg, bulk, sides, sol, last_load: None })
    }

    /// `u, v, a` are full bulk fields; `f_red`/`u_red` are the reduced load and
    /// displacement used for the work increment.
    pub(crate) fn record(&mut self, n: usize, u: &[f64], v: &[f64], a: &[f64], energy: f64, u_red: &[f64], f_red: &[f64]) -> Result<()> {
        let t = self.cfg.time.time(n);
        for (p, &side) in self.sol.probes.iter_mut().zip(&self.sides) {
            p.u.push(self.bulk.evaluate(u, side, &p.x)?);
            p.traction.push(self.bulk.traction(u, side, &p.x)?);
        }
        let k = self.bulk.mid_interface();
        let body = self.cfg.body_only(self.bulk, t);
        let nc = self.bulk.ncomp;
        for f in Face::BOTH {
            let node = self.bulk.interface[f.index()][k];
            let w = self.bulk.interface_weights[k];
            let mut tr = self.bulk.interface_force(u, a, f, k);
            for c in 0..nc {
                tr[c] -= body[node * nc + c] / w;
            }
            self.sol.interface.traction[f.index()].push(tr);
            self.sol.interface.u[f.index()].push(u[node * nc..(node + 1) * nc].to_vec());
            self.sol.interface.v[f.index()].push(v[node * nc..(node + 1) * nc].to_vec());
            self.sol.interface.a[f.index()].push(a[node * nc..(node + 1) * nc].to_vec());
        }
        self.sol.energy.push(energy);
        let w = match &self.last_load {
            None => 0.0,
            Some((u0, f0)) => self.sol.work.last().copied().unwrap_or(0.0) + step_work(u0, u_red, f0, f_red),
        };
        self.sol.work.push(w);
        self.last_load = Some((u_red.to_vec(), f_red.to_vec()));
        let stride = self.cfg.snapshot_stride;
        if (stride > 0 && n % stride == 0) || n == self.cfg.time.steps {
            self.sol.snapshots.push((n, u.to_vec()));
        }
        Ok(())
    }

    pub(crate) fn finish(self) -> MacroSolution {
        self.sol
    }
}

/// Newmark integration of a reduced SPD system; `load(n)` returns the full load vector
/// and `each(n, u_full, v_full, a_full, energy, u_red, f_red)` observes every step.
#[allow(clippy::type_complexity)]
pub(crate) fn integrate_spd(
    dofmap: &DofMap,
    m_full: &CsrMatrix,
    k_full: &CsrMatrix,
    grid: TimeGrid,
    u0: &[f64],
    v0: &[f64],
    load: &dyn Fn(usize) -> Vec<f64>,
    each: &mut dyn FnMut(usize, &[f64], &[f64], &[f64], f64, &[f64], &[f64]) -> Result<()>,
) -> Result<()> {
    let nm = Newmark::new(dofmap.reduce_matrix(m_full), dofmap.reduce_matrix(k_full), grid.dt())?;
    let f0 = dofmap.restrict(&load(0));
    let mut s = nm.init(dofmap.gather(u0), dofmap.gather(v0), &f0);
    let out = |s: &crate::newmark::State| (dofmap.expand_with(&s.u, 1.0), dofmap.expand_with(&s.v, 0.0), dofmap.expand_with(&s.a, 0.0));
    let (u, v, a) = out(&s);
    each(0, &u, &v, &a, nm.energy(&s), &s.u, &f0)?;
    for n in 1..=grid.steps {
        let f = dofmap.restrict(&load(n));
        s = nm.step(&s, &f);
        let (u, v, a) = out(&s);
        each(n, &u, &v, &a, nm.energy(&s), &s.u, &f)?;
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    sparse::dot(a, b)
}
