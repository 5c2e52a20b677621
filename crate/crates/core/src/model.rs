//! Vibrational model, harmonic-oscillator matrix elements, the exact product
//! basis Hamiltonian and everything derived from its eigendecomposition.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{check_cap, dimension_cap, units, Error, Result};

/// Harmonic frequencies and cubic force constants of one molecule.
///
/// Mode indices in coupling keys are 1-based and ordered `j <= k <= l`.
#[derive(Debug, Clone, PartialEq)]
pub struct VibrationalModel {
    omega: Vec<f64>,
    cubic: BTreeMap<(usize, usize, usize), f64>,
}

impl VibrationalModel {
    pub fn new<I>(omega: Vec<f64>, cubic: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize, usize), f64)>,
    {
        if omega.is_empty() {
            return invalid("a model needs at least one mode");
        }
        if let Some(w) = omega.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return invalid(format!("harmonic frequencies must be positive, got {w}"));
        }
        let m = omega.len();
        let mut map = BTreeMap::new();
        for ((j, k, l), f) in cubic {
            if !(1 <= j && j <= k && k <= l && l <= m) {
                return invalid(format!(
                    "cubic coupling ({j},{k},{l}) must satisfy 1 <= j <= k <= l <= {m}"
                ));
            }
            if !f.is_finite() {
                return invalid(format!("cubic coupling ({j},{k},{l}) is not finite"));
            }
            if map.insert((j, k, l), f).is_some() {
                return invalid(format!("duplicate cubic coupling ({j},{k},{l})"));
            }
        }
        Ok(Self { omega, cubic: map })
    }

    /// Purely harmonic model.
    pub fn harmonic(omega: Vec<f64>) -> Result<Self> {
        Self::new(omega, std::iter::empty())
    }

    /// Two-mode CO₂ model (symmetric stretch, bend) with the Fermi-resonant
    /// f₁₂₂ coupling.
    pub fn co2() -> Self {
        Self::new(
            vec![1354.31, 672.85],
            [((1, 1, 1), -45.78), ((1, 2, 2), 74.72)],
        )
        .expect("preset is valid")
    }

    /// Three-mode H₂O model (symmetric stretch, bend, antisymmetric stretch).
    pub fn h2o() -> Self {
        Self::new(
            vec![3843.74, 1641.18, 3948.48],
            [
                ((1, 1, 1), 303.64),
                ((1, 1, 2), 39.02),
                ((1, 2, 2), -162.13),
                ((2, 2, 2), -43.96),
                ((1, 3, 3), 911.05),
                ((2, 3, 3), 134.59),
            ],
        )
        .expect("preset is valid")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "co2" => Some(Self::co2()),
            "h2o" => Some(Self::h2o()),
            _ => None,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Nonzero cubic couplings keyed by 1-based `(j, k, l)`.
    pub fn cubic(&self) -> impl Iterator<Item = ((usize, usize, usize), f64)> + '_ {
        self.cubic.iter().map(|(&k, &v)| (k, v))
    }

    pub fn coupling(&self, j: usize, k: usize, l: usize) -> f64 {
        let mut idx = [j, k, l];
        idx.sort_unstable();
        self.cubic
            .get(&(idx[0], idx[1], idx[2]))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn is_harmonic(&self) -> bool {
        self.cubic.values().all(|&f| f == 0.0)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            n_modes: self.n_modes(),
            omega_cm1: self.omega.clone(),
            cubic: self
                .cubic()
                .map(|((j, k, l), f)| CubicEntry { j, k, l, f_cm1: f })
                .collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n_modes: usize,
    pub omega_cm1: Vec<f64>,
    #[serde(default)]
    pub cubic: Vec<CubicEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubicEntry {
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub f_cm1: f64,
}

impl TryFrom<ModelFile> for VibrationalModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        if file.n_modes != file.omega_cm1.len() {
            return invalid(format!(
                "n_modes = {} but omega_cm1 has {} entries",
                file.n_modes,
                file.omega_cm1.len()
            ));
        }
        VibrationalModel::new(
            file.omega_cm1,
            file.cubic.into_iter().map(|c| ((c.j, c.k, c.l), c.f_cm1)),
        )
    }
}

/// Product-basis state `|v₁ v₂ … v_M⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasisState(Vec<usize>);

impl BasisState {
    pub fn new(v: Vec<usize>) -> Self {
        Self(v)
    }

    pub fn ground(n_modes: usize) -> Self {
        Self(vec![0; n_modes])
    }

    pub fn quanta(&self) -> &[usize] {
        &self.0
    }

    pub fn n_modes(&self) -> usize {
        self.0.len()
    }

    pub fn validate(&self, n_modes: usize, vmax: usize) -> Result<()> {
        if self.0.len() != n_modes {
            return invalid(format!(
                "state {} has {} modes, expected {n_modes}",
                self,
                self.0.len()
            ));
        }
        if let Some(v) = self.0.iter().find(|&&v| v > vmax) {
            return invalid(format!(
                "state {self} has quantum number {v} > vmax = {vmax}"
            ));
        }
        Ok(())
    }

    /// Row index in the Kronecker-product basis, mode 1 most significant.
    pub fn product_index(&self, vmax: usize) -> usize {
        let n = vmax + 1;
        self.0.iter().fold(0, |acc, &v| acc * n + v)
    }

    pub fn from_product_index(mut index: usize, n_modes: usize, vmax: usize) -> Self {
        let n = vmax + 1;
        let mut v = vec![0; n_modes];
        for slot in v.iter_mut().rev() {
            *slot = index % n;
            index /= n;
        }
        Self(v)
    }

    /// Compact label such as `"102"`; digits are separated by `_` once any
    /// quantum number has more than one digit.
    pub fn label(&self) -> String {
        let sep = if self.0.iter().any(|&v| v > 9) {
            "_"
        } else {
            ""
        };
        self.0
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(sep)
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}⟩", self.label())
    }
}

impl FromStr for BasisState {
    type Err = Error;

    /// Parses comma- or space-separated quantum numbers, e.g. `"1,0"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .collect();
        if parts.is_empty() {
            return invalid(format!("empty basis state {s:?}"));
        }
        parts
            .iter()
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad quantum number {p:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl From<Vec<usize>> for BasisState {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// How powers of the truncated position operator are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixElementConvention {
    /// `q^κ` is the κ-th power of the truncated `q` matrix.
    ProjectedPower,
    /// `q^κ` carries the infinite-basis matrix elements restricted to `v ≤ vmax`.
    #[default]
    ExactElement,
}

impl MatrixElementConvention {
    pub const ALL: [Self; 2] = [Self::ExactElement, Self::ProjectedPower];

    pub fn name(self) -> &'static str {
        match self {
            Self::ProjectedPower => "projected_power",
            Self::ExactElement => "exact_element",
        }
    }
}

impl FromStr for MatrixElementConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "projected_power" | "projected" => Ok(Self::ProjectedPower),
            "exact_element" | "exact" => Ok(Self::ExactElement),
            _ => invalid(format!("unknown matrix-element convention {s:?}")),
        }
    }
}

impl fmt::Display for MatrixElementConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Single-mode operator in the truncated harmonic-oscillator basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// `q^κ`, κ ∈ {1, 2, 3}.
    Position(u32),
    /// `H₀ = ω·diag(0, 1, …, vmax)`, zero-point energy removed.
    Harmonic(f64),
}

fn position_matrix(dim: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(dim, dim);
    for v in 0..dim.saturating_sub(1) {
        let x = ((v + 1) as f64 / 2.0).sqrt();
        q[(v, v + 1)] = x;
        q[(v + 1, v)] = x;
    }
    q
}

fn matrix_power(m: &DMatrix<f64>, power: u32) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..power {
        out = &out * m;
    }
    out
}

/// Single-mode operator matrix of size `(vmax+1) × (vmax+1)`.
pub fn ho_operator_matrix(
    vmax: usize,
    kind: OperatorKind,
    convention: MatrixElementConvention,
) -> Result<DMatrix<f64>> {
    let n = vmax + 1;
    match kind {
        OperatorKind::Harmonic(w) => {
            if !w.is_finite() {
                return invalid("harmonic frequency must be finite");
            }
            Ok(DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    i as f64 * w
                } else {
                    0.0
                }
            }))
        }
        OperatorKind::Position(p @ 1..=3) => Ok(match convention {
            MatrixElementConvention::ProjectedPower => matrix_power(&position_matrix(n), p),
            // q^p only couples v to v ± p, so a basis padded by p levels
            // reproduces every infinite-basis element with v, v' <= vmax.
            MatrixElementConvention::ExactElement => {
                let big = matrix_power(&position_matrix(n + p as usize), p);
                big.view((0, 0), (n, n)).into_owned()
            }
        }),
        OperatorKind::Position(p) => {
            invalid(format!("position powers 1..=3 are supported, got q^{p}"))
        }
    }
}

/// Exact Hamiltonian in the `(vmax+1)^M` product basis using the default
/// dimension cap.
pub fn build_full_hamiltonian(
    model: &VibrationalModel,
    vmax: usize,
    convention: MatrixElementConvention,
) -> Result<DMatrix<f64>> {
    build_full_hamiltonian_capped(model, vmax, convention, dimension_cap())
}

pub fn build_full_hamiltonian_capped(
    model: &VibrationalModel,
    vmax: usize,
    convention: MatrixElementConvention,
    cap: usize,
) -> Result<DMatrix<f64>> {
    let m = model.n_modes();
    let n = vmax + 1;
    let dim = n.checked_pow(m as u32).ok_or(Error::ResourceLimit {
        what: "product basis",
        requested: usize::MAX,
        cap,
    })?;
    check_cap("product basis", dim, cap)?;

    let eye = DMatrix::<f64>::identity(n, n);
    let kron_all = |factors: &[DMatrix<f64>]| {
        factors
            .iter()
            .skip(1)
            .fold(factors[0].clone(), |acc, f| acc.kronecker(f))
    };

    let mut h = DMatrix::zeros(dim, dim);
    for (k, &w) in model.omega().iter().enumerate() {
        let mut factors = vec![eye.clone(); m];
        factors[k] = ho_operator_matrix(vmax, OperatorKind::Harmonic(w), convention)?;
        h += kron_all(&factors);
    }
    for ((j, k, l), f) in model.cubic() {
        let mut powers = vec![0u32; m];
        for idx in [j, k, l] {
            powers[idx - 1] += 1;
        }
        let factors = powers
            .iter()
            .map(|&p| {
                if p == 0 {
                    Ok(eye.clone())
                } else {
                    ho_operator_matrix(vmax, OperatorKind::Position(p), convention)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        h += kron_all(&factors) * f;
    }
    Ok(h)
}

/// Eigenvalues (ascending, cm⁻¹) and eigenvectors (columns) of the product
/// basis Hamiltonian.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub energies: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// ψ_vn for basis row `v` and eigenstate `n`.
    pub fn coefficient(&self, basis_index: usize, state: usize) -> f64 {
        self.vectors[(basis_index, state)]
    }
}

/// Full symmetric eigendecomposition with a reproducible gauge: eigenvalues
/// ascending, degenerate clusters resolved onto basis-aligned vectors ordered
/// by their dominant basis index, and each vector's largest component positive.
pub fn diagonalize(h: &DMatrix<f64>) -> Result<EigenSystem> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return invalid(format!(
            "expected a non-empty square matrix, got {}x{}",
            n,
            h.ncols()
        ));
    }
    let scale = h.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (h[(i, j)] - h[(j, i)]).abs() > 1e-10 * scale {
                return invalid(format!("matrix is not symmetric at ({i},{j})"));
            }
        }
    }

    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let range = (energies[n - 1] - energies[0]).abs().max(1.0);
    let tol = 1e-9 * range;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && energies[end] - energies[end - 1] <= tol {
            end += 1;
        }
        if end - start > 1 {
            canonicalize_cluster(&mut vectors, start, end);
            let mean = energies[start..end].iter().sum::<f64>() / (end - start) as f64;
            // Rayleigh quotients of the rotated vectors differ only at round-off.
            for e in &mut energies[start..end] {
                *e = mean;
            }
        }
        start = end;
    }

    for c in 0..n {
        let col = vectors.column(c);
        let pivot = dominant_index(col.iter().copied());
        if col[pivot] < 0.0 {
            vectors.column_mut(c).neg_mut();
        }
    }
    Ok(EigenSystem { energies, vectors })
}

fn dominant_index(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v.abs() > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = v.abs();
        }
    }
    best
}

/// Replace the columns `start..end` (spanning one eigenspace) with a basis
/// built greedily from the projections of unit vectors, then order them by
/// dominant basis index.
fn canonicalize_cluster(vectors: &mut DMatrix<f64>, start: usize, end: usize) {
    let n = vectors.nrows();
    let k = end - start;
    let span = vectors.columns(start, k).into_owned();
    let mut chosen: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(f64, nalgebra::DVector<f64>)> = None;
        for i in 0..n {
            // projection of e_i onto the eigenspace
            let mut p = &span * span.row(i).transpose();
            for q in &chosen {
                let overlap = q.dot(&p);
                p.axpy(-overlap, q, 1.0);
            }
            let norm = p.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b * (1.0 + 1e-9)) {
                best = Some((norm, p));
            }
        }
        let (norm, p) = best.expect("non-empty basis");
        chosen.push(p / norm);
    }
    chosen.sort_by_key(|v| dominant_index(v.iter().copied()));
    for (offset, v) in chosen.into_iter().enumerate() {
        vectors.set_column(start + offset, &v);
    }
}

fn checked_state_index(
    eig: &EigenSystem,
    state: &BasisState,
    n_modes: usize,
    vmax: usize,
) -> Result<usize> {
    state.validate(n_modes, vmax)?;
    let idx = state.product_index(vmax);
    if idx >= eig.dim() {
        return invalid(format!("state {state} lies outside the eigenbasis"));
    }
    Ok(idx)
}

fn basis_shape(eig: &EigenSystem, n_modes: usize) -> Result<usize> {
    let dim = eig.dim();
    if n_modes == 0 {
        return invalid("states must have at least one mode");
    }
    let per_mode = (dim as f64).powf(1.0 / n_modes as f64).round() as usize;
    if per_mode.checked_pow(n_modes as u32) != Some(dim) {
        return invalid(format!(
            "eigensystem of dimension {dim} is not a {n_modes}-mode product basis"
        ));
    }
    Ok(per_mode - 1)
}

/// Trotter-free populations `|⟨v|e^{-iHt}|v₀⟩|²` at the given times (ps).
pub fn exact_populations(
    eig: &EigenSystem,
    v0: &BasisState,
    v: &BasisState,
    times: &[f64],
) -> Result<Vec<f64>> {
    let m = v0.n_modes();
    let vmax = basis_shape(eig, m)?;
    let i0 = checked_state_index(eig, v0, m, vmax)?;
    let i1 = checked_state_index(eig, v, m, vmax)?;
    let weights: Vec<f64> = (0..eig.dim())
        .map(|n| eig.coefficient(i1, n) * eig.coefficient(i0, n))
        .collect();
    Ok(times
        .iter()
        .map(|&t| {
            let amp: Complex64 = weights
                .iter()
                .zip(&eig.energies)
                .map(|(&w, &e)| Complex64::from_polar(w, -units::phase(e, t)))
                .sum();
            amp.norm_sqr().clamp(0.0, 1.0)
        })
        .collect())
}

/// One Fourier component of an exact population trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionStick {
    pub delta_e_cm1: f64,
    pub alpha_abs: f64,
    pub upper: usize,
    pub lower: usize,
}

/// Transition energies `E_m − E_n > 0` with weight `|α_mn|` at or above
/// `weight_floor`, sorted by energy gap.
pub fn transition_sticks(
    eig: &EigenSystem,
    v0: &BasisState,
    v: &BasisState,
    weight_floor: f64,
) -> Result<Vec<TransitionStick>> {
    if weight_floor.is_nan() || weight_floor < 0.0 {
        return invalid("weight floor must be non-negative");
    }
    let m = v0.n_modes();
    let vmax = basis_shape(eig, m)?;
    let i0 = checked_state_index(eig, v0, m, vmax)?;
    let i1 = checked_state_index(eig, v, m, vmax)?;
    let dim = eig.dim();
    let w: Vec<f64> = (0..dim)
        .map(|n| eig.coefficient(i0, n) * eig.coefficient(i1, n))
        .collect();
    let range = (eig.energies[dim - 1] - eig.energies[0]).abs().max(1.0);
    let mut sticks = Vec::new();
    for upper in 0..dim {
        for lower in 0..upper {
            let gap = eig.energies[upper] - eig.energies[lower];
            let alpha = (w[upper] * w[lower]).abs();
            if gap > 1e-9 * range && alpha >= weight_floor {
                sticks.push(TransitionStick {
                    delta_e_cm1: gap,
                    alpha_abs: alpha,
                    upper,
                    lower,
                });
            }
        }
    }
    sticks.sort_by(|a, b| {
        a.delta_e_cm1
            .total_cmp(&b.delta_e_cm1)
            .then(a.upper.cmp(&b.upper))
    });
    Ok(sticks)
}

/// C₂ᵥ species for a three-mode bent triatomic; the antisymmetric stretch
/// (mode 3) carries B₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Symmetry {
    A1,
    B2,
    Undetermined,
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::A1 => "a1",
            Symmetry::B2 => "b2",
            Symmetry::Undetermined => "?",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenstateLabel {
    pub index: usize,
    pub energy_cm1: f64,
    pub symmetry: Option<Symmetry>,
    /// Basis states with ψ²_vn at or above the threshold, largest first.
    pub configurations: Vec<(BasisState, f64)>,
}

impl EigenstateLabel {
    /// Configurations formatted like `101(0.46), 201(0.21)`.
    pub fn configuration_string(&self) -> String {
        self.configurations
            .iter()
            .map(|(s, w)| format!("{}({:.2})", s.label(), w))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Dominant configurations of every eigenstate and, for three-mode models,
/// the parity label from v₃.
pub fn label_eigenstates(
    eig: &EigenSystem,
    model: &VibrationalModel,
    threshold: f64,
) -> Result<Vec<EigenstateLabel>> {
    let m = model.n_modes();
    let vmax = basis_shape(eig, m)?;
    let dim = eig.dim();
    Ok((0..dim)
        .map(|n| {
            let mut configurations: Vec<(BasisState, f64)> = (0..dim)
                .filter_map(|row| {
                    let w = eig.coefficient(row, n).powi(2);
                    (w >= threshold).then(|| (BasisState::from_product_index(row, m, vmax), w))
                })
                .collect();
            configurations.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let symmetry = (m == 3).then(|| {
                let mut parities = configurations.iter().map(|(s, _)| s.quanta()[2] % 2);
                match parities.next() {
                    None => Symmetry::Undetermined,
                    Some(first) if parities.all(|p| p == first) => {
                        if first == 0 {
                            Symmetry::A1
                        } else {
                            Symmetry::B2
                        }
                    }
                    Some(_) => Symmetry::Undetermined,
                }
            });
            EigenstateLabel {
                index: n,
                energy_cm1: eig.energies[n],
                symmetry,
                configurations,
            }
        })
        .collect())
}
