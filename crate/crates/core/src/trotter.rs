//! First-order Suzuki-Trotter propagation of an encoded term list.
//!
//! One step applies `exp(−i·2πc·Δt·h_n Γ_n)` for every term in the chosen
//! order, each followed by a completely depolarizing channel of strength
//! `ε_n`. Term order is picked by commutator score and then refined by
//! adjacent swaps that lower the first-order error bound
//!
//! ```text
//! ε_ST = (Δt²/2)·(2πc)²·‖Σ_{n<m} h_n h_m [Γ_n, Γ_m]‖_F
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::encoding::{encode_state, EncodingScheme};
use crate::error::invalid;
use crate::gm::{MonomialOp, TermList};
use crate::model::BasisState;
use crate::units::angular_frequency;
use crate::{dimension_cap, Error, Result};

/// Largest register the density-matrix engine accepts.
pub const DENSITY_MATRIX_CAP: usize = 256;

/// Safety valve on ordering sweeps.
pub const SWEEP_LIMIT: usize = 1000;

/// Registers up to this size keep the commutator sum as a dense array.
const DENSE_ACCUMULATOR_LIMIT: usize = 1024;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `(Δt²/2)·(2πc)²`, the factor turning `‖S‖_F` in cm⁻² into `ε_ST`.
pub fn st_error_prefactor(dt: f64) -> f64 {
    let w = angular_frequency(1.0);
    0.5 * dt * dt * w * w
}

fn pairwise_commutator_norms(ops: &[MonomialOp]) -> Vec<Vec<f64>> {
    let n = ops.len();
    let mut norms = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let c = ops[a].commutator_norm(&ops[b]);
            norms[a][b] = c;
            norms[b][a] = c;
        }
    }
    norms
}

fn scores_from_norms(terms: &TermList, norms: &[Vec<f64>]) -> Vec<f64> {
    let h: Vec<f64> = terms.terms.iter().map(|t| t.coeff).collect();
    (0..h.len())
        .map(|n| {
            (0..h.len())
                .map(|m| (h[n] * h[m]).abs() * norms[n][m])
                .sum()
        })
        .collect()
}

/// Commutator score `s_n = Σ_m |h_n h_m|·‖[Γ_n, Γ_m]‖_F` of every stored term,
/// evaluated on the full register.
pub fn commutator_scores(terms: &TermList) -> Result<Vec<f64>> {
    let ops = terms.compile(dimension_cap())?;
    Ok(scores_from_norms(terms, &pairwise_commutator_norms(&ops)))
}

/// Running value of `S = Σ_{n<m} h_n h_m [Γ_n, Γ_m]`.
enum Accumulator {
    Dense(Vec<Complex64>),
    Sparse(BTreeMap<usize, Complex64>),
}

impl Accumulator {
    fn new(dim: usize) -> Self {
        if dim <= DENSE_ACCUMULATOR_LIMIT {
            Self::Dense(vec![ZERO; dim * dim])
        } else {
            Self::Sparse(BTreeMap::new())
        }
    }

    fn get(&self, key: usize) -> Complex64 {
        match self {
            Self::Dense(v) => v[key],
            Self::Sparse(m) => m.get(&key).copied().unwrap_or(ZERO),
        }
    }

    fn add(&mut self, key: usize, value: Complex64) {
        match self {
            Self::Dense(v) => v[key] += value,
            Self::Sparse(m) => *m.entry(key).or_insert(ZERO) += value,
        }
    }

    fn norm_sqr(&self) -> f64 {
        match self {
            Self::Dense(v) => v.iter().map(|z| z.norm_sqr()).sum(),
            Self::Sparse(m) => m.values().map(|z| z.norm_sqr()).sum(),
        }
    }
}

fn accumulate(
    ops: &[MonomialOp],
    terms: &TermList,
    order: &[usize],
    norms: &[Vec<f64>],
) -> Accumulator {
    let dim = ops.first().map_or(0, MonomialOp::dim);
    let mut s = Accumulator::new(dim);
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            if norms[a][b] == 0.0 {
                continue;
            }
            let w = terms.terms[a].coeff * terms.terms[b].coeff;
            for (r, c, v) in ops[a].commutator_entries(&ops[b]) {
                s.add(r * dim + c, v * w);
            }
        }
    }
    s
}

/// ε_ST of an arbitrary term order.
pub fn st_error(terms: &TermList, order: &[usize], dt: f64) -> Result<f64> {
    check_permutation(order, terms.terms.len())?;
    let ops = terms.compile(dimension_cap())?;
    let norms = pairwise_commutator_norms(&ops);
    let s = accumulate(&ops, terms, order, &norms);
    Ok(st_error_prefactor(dt) * s.norm_sqr().sqrt())
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return invalid(format!("order has {} entries for {n} terms", order.len()));
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return invalid("order is not a permutation of the term indices");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderedTermList {
    pub base: TermList,
    /// Application order as indices into `base.terms`.
    pub order: Vec<usize>,
    /// Commutator score per term, indexed like `base.terms`.
    pub scores: Vec<f64>,
    /// ε_ST at `dt`.
    pub st_error: f64,
    pub dt: f64,
    /// Sweeps performed, including the final one without swaps.
    pub sweeps: usize,
    pub sweep_limit_hit: bool,
}

impl OrderedTermList {
    /// Keep a given order without optimizing it.
    pub fn with_order(terms: TermList, order: Vec<usize>, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        let err = st_error(&terms, &order, dt)?;
        let scores = commutator_scores(&terms)?;
        Ok(Self {
            base: terms,
            order,
            scores,
            st_error: err,
            dt,
            sweeps: 0,
            sweep_limit_hit: false,
        })
    }

    /// ε_ST of this order at another step size.
    pub fn st_error_at(&self, dt: f64) -> f64 {
        self.st_error * st_error_prefactor(dt) / st_error_prefactor(self.dt)
    }

    pub fn to_dump(&self) -> OrderingDump {
        OrderingDump {
            dt_ps: self.dt,
            st_error: self.st_error,
            sweeps: self.sweeps,
            terms: self
                .order
                .iter()
                .map(|&i| OrderingEntry {
                    index: i,
                    score: self.scores[i],
                    coeff_cm1: self.base.terms[i].coeff,
                    gm_indices: self.base.terms[i].gm_indices.clone(),
                })
                .collect(),
        }
    }
}

/// Serialized ordering; `index` refers to the term dump of the same list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingDump {
    pub dt_ps: f64,
    pub st_error: f64,
    pub sweeps: usize,
    pub terms: Vec<OrderingEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingEntry {
    pub index: usize,
    pub score: f64,
    pub coeff_cm1: f64,
    pub gm_indices: Vec<u16>,
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        invalid(format!("time step must be positive and finite, got {dt}"))
    }
}

/// Sort by descending commutator score (stable, so ties keep build order),
/// then sweep adjacent swaps while any of them strictly lowers ε_ST.
pub fn optimize_ordering(terms: &TermList, dt: f64) -> Result<OrderedTermList> {
    check_dt(dt)?;
    let ops = terms.compile(dimension_cap())?;
    let norms = pairwise_commutator_norms(&ops);
    let scores = scores_from_norms(terms, &norms);
    let n = terms.terms.len();
    let dim = ops.first().map_or(0, MonomialOp::dim);
    let h: Vec<f64> = terms.terms.iter().map(|t| t.coeff).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut s = accumulate(&ops, terms, &order, &norms);
    let mut norm_sq = s.norm_sqr();
    let mut sweeps = 0;
    let mut sweep_limit_hit = false;
    loop {
        if sweeps == SWEEP_LIMIT {
            sweep_limit_hit = true;
            break;
        }
        sweeps += 1;
        let mut swapped = false;
        for i in 0..n.saturating_sub(1) {
            let (a, b) = (order[i], order[i + 1]);
            if norms[a][b] == 0.0 {
                continue;
            }
            // swapping flips the sign of the (a, b) pair inside S
            let w = -2.0 * h[a] * h[b];
            let delta: Vec<(usize, Complex64)> = ops[a]
                .commutator_entries(&ops[b])
                .into_iter()
                .map(|(r, c, v)| (r * dim + c, v * w))
                .collect();
            let change: f64 = delta
                .iter()
                .map(|&(k, dv)| {
                    let old = s.get(k);
                    (old + dv).norm_sqr() - old.norm_sqr()
                })
                .sum();
            let candidate = (norm_sq + change).max(0.0);
            if candidate.sqrt() < norm_sq.sqrt() * (1.0 - 1e-12) {
                for (k, dv) in delta {
                    s.add(k, dv);
                }
                order.swap(i, i + 1);
                norm_sq = s.norm_sqr();
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }

    Ok(OrderedTermList {
        base: terms.clone(),
        order,
        scores,
        st_error: st_error_prefactor(dt) * norm_sq.sqrt(),
        dt,
        sweeps,
        sweep_limit_hit,
    })
}

/// Per-gate depolarizing strength from the two-site gate error ε₂q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub eps2q: f64,
}

impl NoiseSpec {
    pub fn new(eps2q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps2q) {
            return invalid(format!(
                "two-site gate error must lie in [0, 1], got {eps2q}"
            ));
        }
        Ok(Self { eps2q })
    }

    pub fn noiseless() -> Self {
        Self { eps2q: 0.0 }
    }

    /// `ε_n = (2𝒪 − 3)·ε₂q` for 𝒪 ≥ 2, zero for single-site terms, at most 1.
    pub fn gate_error(&self, order: usize) -> f64 {
        if order <= 1 {
            0.0
        } else {
            ((2 * order - 3) as f64 * self.eps2q).min(1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    DensityMatrix,
    #[default]
    StateVectorFidelity,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::DensityMatrix => "density_matrix",
            Engine::StateVectorFidelity => "state_vector_fidelity",
        }
    }

    pub fn cap(self) -> usize {
        match self {
            Engine::DensityMatrix => DENSITY_MATRIX_CAP.min(dimension_cap()),
            Engine::StateVectorFidelity => dimension_cap(),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "density_matrix" | "density" | "dm" => Ok(Engine::DensityMatrix),
            "state_vector_fidelity" | "state_vector" | "statevector" | "sv" => {
                Ok(Engine::StateVectorFidelity)
            }
            _ => invalid(format!(
                "unknown engine {s:?} (density_matrix|state_vector_fidelity)"
            )),
        }
    }
}

/// Exact `exp(−iφΓ)` for a Hermitian monomial `Γ`: 2×2 rotations on the
/// pairs `Γ` swaps, phases on its fixed points, identity elsewhere.
#[derive(Debug, Clone)]
struct Gate {
    /// `(x, y, cos, u_xy, u_yx)` with `x < y`.
    pairs: Vec<(usize, usize, f64, Complex64, Complex64)>,
    phases: Vec<(usize, Complex64)>,
    eps: f64,
}

impl Gate {
    fn new(op: &MonomialOp, phi: f64, eps: f64) -> Self {
        let mut pairs = Vec::new();
        let mut phases = Vec::new();
        for x in 0..op.dim() {
            let Some((y, a)) = op.column(x) else { continue };
            if y == x {
                phases.push((x, Complex64::from_polar(1.0, -phi * a.re)));
            } else if y > x {
                let r = a.norm();
                let (s, c) = (phi * r).sin_cos();
                let b = op.column(y).map_or(ZERO, |(_, b)| b);
                let k = Complex64::new(0.0, -s / r);
                pairs.push((x, y, c, k * b, k * a));
            }
        }
        Self { pairs, phases, eps }
    }

    /// Apply to the vector stored at `data[offset + i·stride]`, optionally
    /// with conjugated matrix entries.
    #[inline]
    fn apply(&self, data: &mut [Complex64], offset: usize, stride: usize, conj: bool) {
        let at = |i: usize| offset + i * stride;
        for &(x, ph) in &self.phases {
            data[at(x)] *= if conj { ph.conj() } else { ph };
        }
        for &(x, y, c, uxy, uyx) in &self.pairs {
            let (uxy, uyx) = if conj {
                (uxy.conj(), uyx.conj())
            } else {
                (uxy, uyx)
            };
            let (px, py) = (data[at(x)], data[at(y)]);
            data[at(x)] = px * c + uxy * py;
            data[at(y)] = uyx * px + py * c;
        }
    }
}

/// One Trotter step as a gate list.
#[derive(Debug, Clone)]
pub struct TrotterCircuit {
    dim: usize,
    gates: Vec<Gate>,
}

impl TrotterCircuit {
    pub fn new(ordered: &OrderedTermList, dt: f64, noise: NoiseSpec, cap: usize) -> Result<Self> {
        check_dt(dt)?;
        let ops = ordered.base.compile(cap)?;
        let dim = ordered.base.full_dim()?;
        let theta = angular_frequency(1.0) * dt;
        let gates = ordered
            .order
            .iter()
            .map(|&i| {
                let t = &ordered.base.terms[i];
                Gate::new(&ops[i], theta * t.coeff, noise.gate_error(t.order))
            })
            .collect();
        Ok(Self { dim, gates })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Survival factor `Π(1 − ε_n)` of one step.
    pub fn step_fidelity(&self) -> f64 {
        self.gates.iter().map(|g| 1.0 - g.eps).product()
    }

    /// Unitary part of one step applied to a state vector.
    pub fn step_state(&self, psi: &mut [Complex64]) {
        for g in &self.gates {
            g.apply(psi, 0, 1, false);
        }
    }

    /// One noisy step on a column-major `dim × dim` density matrix.
    pub fn step_density(&self, rho: &mut [Complex64]) {
        let d = self.dim;
        for g in &self.gates {
            for col in 0..d {
                g.apply(rho, col * d, 1, false);
            }
            for row in 0..d {
                g.apply(rho, row, d, true);
            }
            if g.eps > 0.0 {
                let keep = 1.0 - g.eps;
                rho.iter_mut().for_each(|z| *z *= keep);
                let mix = g.eps / d as f64;
                for i in 0..d {
                    rho[i * d + i] += mix;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackedPopulation {
    pub state: BasisState,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionMeta {
    pub scheme: EncodingScheme,
    pub dt_ps: f64,
    pub n_steps: usize,
    pub eps2q: f64,
    pub engine: Engine,
    pub st_error: f64,
}

/// Sampled at `t = j·Δt` for `j = 0 … n_steps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub populations: Vec<TrackedPopulation>,
    pub fidelity: Vec<f64>,
    pub meta: EvolutionMeta,
}

impl EvolutionResult {
    pub fn population(&self, state: &BasisState) -> Option<&[f64]> {
        self.populations
            .iter()
            .find(|p| &p.state == state)
            .map(|p| p.values.as_slice())
    }

    /// Header `t_ps,fidelity,p_<label>…`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["t_ps".to_string(), "fidelity".to_string()];
        header.extend(
            self.populations
                .iter()
                .map(|p| format!("p_{}", p.state.label())),
        );
        writeln!(w, "{}", header.join(","))?;
        for (j, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.16e}"), format!("{:.16e}", self.fidelity[j])];
            row.extend(
                self.populations
                    .iter()
                    .map(|p| format!("{:.16e}", p.values[j])),
            );
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Propagate `v0` for `n_steps` Trotter steps of size `dt` (ps).
///
/// The state-vector engine relies on the global depolarizing channel
/// commuting with every unitary, so the noisy state is always
/// `F·|ψ⟩⟨ψ| + (1 − F)·I/D`.
pub fn evolve(
    ordered: &OrderedTermList,
    v0: &BasisState,
    dt: f64,
    n_steps: usize,
    noise: NoiseSpec,
    tracked: &[BasisState],
    engine: Engine,
) -> Result<EvolutionResult> {
    check_dt(dt)?;
    if n_steps == 0 {
        return invalid("at least one Trotter step is required");
    }
    NoiseSpec::new(noise.eps2q)?;
    let scheme = ordered.base.scheme;
    let x0 = encode_state(v0, &scheme)?;
    let tracked: Vec<BasisState> = if tracked.is_empty() {
        vec![v0.clone()]
    } else {
        tracked.to_vec()
    };
    let slots = tracked
        .iter()
        .map(|v| encode_state(v, &scheme))
        .collect::<Result<Vec<_>>>()?;

    let circuit = TrotterCircuit::new(ordered, dt, noise, engine.cap())?;
    let dim = circuit.dim();
    let uniform = 1.0 / dim as f64;
    let step_f = circuit.step_fidelity();

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut fidelity = Vec::with_capacity(n_steps + 1);
    let mut values = vec![Vec::with_capacity(n_steps + 1); slots.len()];
    let mut f = 1.0;

    match engine {
        Engine::StateVectorFidelity => {
            let mut psi = vec![ZERO; dim];
            psi[x0] = Complex64::new(1.0, 0.0);
            for j in 0..=n_steps {
                if j > 0 {
                    circuit.step_state(&mut psi);
                    f *= step_f;
                }
                times.push(j as f64 * dt);
                fidelity.push(f);
                for (vals, &x) in values.iter_mut().zip(&slots) {
                    let p = (1.0 - f) * uniform + f * psi[x].norm_sqr();
                    vals.push(p.clamp(0.0, 1.0));
                }
            }
        }
        Engine::DensityMatrix => {
            let mut rho = vec![ZERO; dim * dim];
            rho[x0 * dim + x0] = Complex64::new(1.0, 0.0);
            for j in 0..=n_steps {
                if j > 0 {
                    circuit.step_density(&mut rho);
                    f *= step_f;
                }
                times.push(j as f64 * dt);
                fidelity.push(f);
                for (vals, &x) in values.iter_mut().zip(&slots) {
                    vals.push(rho[x * dim + x].re.clamp(0.0, 1.0));
                }
            }
        }
    }

    Ok(EvolutionResult {
        times,
        populations: tracked
            .into_iter()
            .zip(values)
            .map(|(state, values)| TrackedPopulation { state, values })
            .collect(),
        fidelity,
        meta: EvolutionMeta {
            scheme,
            dt_ps: dt,
            n_steps,
            eps2q: noise.eps2q,
            engine,
            st_error: ordered.st_error_at(dt),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value_ps", rename_all = "snake_case")]
pub enum DecayTime {
    Finite(f64),
    /// No noisy two-site gates: populations never decay.
    Infinite,
}

impl DecayTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            DecayTime::Finite(t) => Some(t),
            DecayTime::Infinite => None,
        }
    }
}

/// `τ = Δt / (N₂q·ε₂q)`.
pub fn predicted_decay_time(terms: &TermList, dt: f64, eps2q: f64) -> Result<DecayTime> {
    check_dt(dt)?;
    NoiseSpec::new(eps2q)?;
    let n2q = terms.two_site_gate_count();
    if eps2q == 0.0 || n2q == 0 {
        return Ok(DecayTime::Infinite);
    }
    Ok(DecayTime::Finite(dt / (n2q as f64 * eps2q)))
}

/// Qudit gate error giving the same decay time as qubits at `eps_qubit`.
pub fn equal_decay_error(n2q_qubit: usize, n2q_qudit: usize, eps_qubit: f64) -> Result<f64> {
    if n2q_qudit == 0 || n2q_qubit == 0 {
        return invalid("two-site gate counts must be positive");
    }
    if eps_qubit.is_nan() || eps_qubit < 0.0 {
        return invalid(format!("gate error must be non-negative, got {eps_qubit}"));
    }
    Ok(n2q_qubit as f64 / n2q_qudit as f64 * eps_qubit)
}
