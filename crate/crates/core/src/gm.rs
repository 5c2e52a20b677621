//! Generalized Gell-Mann operator basis and the encoded Hamiltonian.
//!
//! Index layout for site dimension `d` (frozen, see `tests/golden`):
//!
//! | index | matrix |
//! |-------|--------|
//! | 0 | `√(2/d)·I` |
//! | 1 ..= P | `E_jk + E_kj`, pairs `j < k` in lexicographic order |
//! | P+1 ..= 2P | `−i(E_jk − E_kj)`, same pair order |
//! | 2P+1 ..= d²−1 | `√(2/(l(l+1)))·(Σ_{i<l} E_ii − l·E_ll)`, `l = 1 … d−1` |
//!
//! with `P = d(d−1)/2`. Every element satisfies `tr(λ_j λ_k) = 2δ_jk`, and for
//! `d = 2` the layout is `(I, X, Y, Z)`.
//!
//! Each basis matrix has at most one nonzero per column, and so has every
//! tensor product of them. [`MonomialOp`] stores strings in that form.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::encoding::{decode_index, encode_state, EncodingKind, EncodingScheme};
use crate::error::invalid;
use crate::model::{ho_operator_matrix, MatrixElementConvention, OperatorKind, VibrationalModel};
use crate::{check_cap, dimension_cap, Error, Result};

/// Coefficients below this magnitude (cm⁻¹) are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GellMannKind {
    Identity,
    Symmetric(usize, usize),
    Antisymmetric(usize, usize),
    Diagonal(usize),
}

#[derive(Debug, Clone)]
pub struct GellMannBasis {
    d: usize,
    kinds: Vec<GellMannKind>,
    matrices: Vec<DMatrix<Complex64>>,
    /// `columns[j][c]` is the single nonzero `(row, value)` of column `c` of λ_j.
    columns: Vec<Vec<Option<(usize, Complex64)>>>,
}

pub fn gell_mann_basis(d: usize) -> Result<GellMannBasis> {
    if d < 2 {
        return invalid(format!("Gell-Mann basis needs d >= 2, got {d}"));
    }
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
        .collect();
    let mut kinds = vec![GellMannKind::Identity];
    kinds.extend(pairs.iter().map(|&(j, k)| GellMannKind::Symmetric(j, k)));
    kinds.extend(
        pairs
            .iter()
            .map(|&(j, k)| GellMannKind::Antisymmetric(j, k)),
    );
    kinds.extend((1..d).map(GellMannKind::Diagonal));

    let matrices: Vec<DMatrix<Complex64>> = kinds
        .iter()
        .map(|&kind| {
            let mut m = DMatrix::from_element(d, d, ZERO);
            match kind {
                GellMannKind::Identity => {
                    let s = (2.0 / d as f64).sqrt();
                    m.fill_diagonal(Complex64::new(s, 0.0));
                }
                GellMannKind::Symmetric(j, k) => {
                    m[(j, k)] = Complex64::new(1.0, 0.0);
                    m[(k, j)] = Complex64::new(1.0, 0.0);
                }
                GellMannKind::Antisymmetric(j, k) => {
                    m[(j, k)] = Complex64::new(0.0, -1.0);
                    m[(k, j)] = Complex64::new(0.0, 1.0);
                }
                GellMannKind::Diagonal(l) => {
                    let s = (2.0 / (l * (l + 1)) as f64).sqrt();
                    for i in 0..l {
                        m[(i, i)] = Complex64::new(s, 0.0);
                    }
                    m[(l, l)] = Complex64::new(-(l as f64) * s, 0.0);
                }
            }
            m
        })
        .collect();

    let columns = matrices
        .iter()
        .map(|m| {
            (0..d)
                .map(|c| (0..d).find(|&r| m[(r, c)] != ZERO).map(|r| (r, m[(r, c)])))
                .collect()
        })
        .collect();

    Ok(GellMannBasis {
        d,
        kinds,
        matrices,
        columns,
    })
}

impl GellMannBasis {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrix(&self, index: usize) -> &DMatrix<Complex64> {
        &self.matrices[index]
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    pub fn kind(&self, index: usize) -> GellMannKind {
        self.kinds[index]
    }

    /// `λ_index |level⟩` as `(row, value)`, `None` if it vanishes.
    #[inline]
    pub fn act(&self, index: usize, level: usize) -> Option<(usize, Complex64)> {
        self.columns[index][level]
    }

    /// Action of the tensor product `λ_{s₀} ⊗ λ_{s₁} ⊗ …` on computational
    /// basis state `column`; site 0 is the most significant digit.
    pub fn apply_string(&self, indices: &[u16], column: usize) -> Option<(usize, Complex64)> {
        let mut rest = column;
        let mut row = 0;
        let mut place = 1;
        let mut value = Complex64::new(1.0, 0.0);
        for &idx in indices.iter().rev() {
            let level = rest % self.d;
            rest /= self.d;
            let (r, v) = self.act(idx as usize, level)?;
            row += r * place;
            place *= self.d;
            value *= v;
        }
        Some((row, value))
    }

    /// Dense compiled form of a string on `d^indices.len()` states.
    pub fn compile_string(&self, indices: &[u16]) -> MonomialOp {
        let dim = self.d.pow(indices.len() as u32);
        let mut target = Vec::with_capacity(dim);
        let mut value = Vec::with_capacity(dim);
        for col in 0..dim {
            match self.apply_string(indices, col) {
                Some((r, v)) => {
                    target.push(r as u32);
                    value.push(v);
                }
                None => {
                    target.push(MonomialOp::NONE);
                    value.push(ZERO);
                }
            }
        }
        MonomialOp { target, value }
    }

    /// Dense Kronecker product of a string, for tests and small checks.
    pub fn string_matrix(&self, indices: &[u16]) -> DMatrix<Complex64> {
        indices.iter().fold(
            DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            |acc, &i| acc.kronecker(&self.matrices[i as usize]),
        )
    }
}

/// Operator with at most one nonzero per column: column `x` maps to
/// `value[x]·|target[x]⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialOp {
    target: Vec<u32>,
    value: Vec<Complex64>,
}

impl MonomialOp {
    pub const NONE: u32 = u32::MAX;

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    #[inline]
    pub fn column(&self, x: usize) -> Option<(usize, Complex64)> {
        let t = self.target[x];
        (t != Self::NONE).then(|| (t as usize, self.value[x]))
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; psi.len()];
        for (x, &amp) in psi.iter().enumerate() {
            if let Some((r, v)) = self.column(x) {
                out[r] += v * amp;
            }
        }
        out
    }

    /// Nonzero entries `(row, col, value)` of `[self, other]`.
    pub fn commutator_entries(&self, other: &MonomialOp) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::new();
        for x in 0..self.dim() {
            let ab = other
                .column(x)
                .and_then(|(y, b)| self.column(y).map(|(z, a)| (z, a * b)));
            let ba = self
                .column(x)
                .and_then(|(y, a)| other.column(y).map(|(z, b)| (z, a * b)));
            match (ab, ba) {
                (Some((r1, v1)), Some((r2, v2))) if r1 == r2 => {
                    let v = v1 - v2;
                    if v != ZERO {
                        out.push((r1, x, v));
                    }
                }
                (ab, ba) => {
                    if let Some((r, v)) = ab {
                        out.push((r, x, v));
                    }
                    if let Some((r, v)) = ba {
                        out.push((r, x, -v));
                    }
                }
            }
        }
        out
    }

    /// `‖[self, other]‖_F`.
    pub fn commutator_norm(&self, other: &MonomialOp) -> f64 {
        self.commutator_entries(other)
            .iter()
            .map(|(_, _, v)| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::from_element(n, n, ZERO);
        for x in 0..n {
            if let Some((r, v)) = self.column(x) {
                m[(r, x)] = v;
            }
        }
        m
    }
}

/// One weighted Gell-Mann string `h·Γ` from a single-mode expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct GmComponent {
    pub coeff: f64,
    pub gm_indices: Vec<u16>,
}

fn hermiticity_violation(op: &DMatrix<Complex64>) -> Option<(usize, usize)> {
    let scale = op.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let n = op.nrows();
    for i in 0..n {
        for j in 0..=i {
            if (op[(i, j)] - op[(j, i)].conj()).norm() > 1e-10 * scale {
                return Some((i, j));
            }
        }
    }
    None
}

/// Expand a Hermitian operator on `n_sites` sites of dimension `basis.d()`
/// as `Σ c·Γ` with `c = tr(op·Γ)/tr(Γ·Γ)`.
///
/// The expansion peels one site at a time: `op = Σ_j λ_j ⊗ B_j` with
/// `B_j = tr₁[(λ_j ⊗ I)·op]/2`.
pub fn decompose(
    op: &DMatrix<Complex64>,
    basis: &GellMannBasis,
    n_sites: usize,
) -> Result<Vec<GmComponent>> {
    let d = basis.d();
    let dim = d.pow(n_sites as u32);
    if op.nrows() != dim || op.ncols() != dim {
        return invalid(format!(
            "operator is {}x{}, expected {dim}x{dim} for {n_sites} sites of d={d}",
            op.nrows(),
            op.ncols()
        ));
    }
    if let Some((i, j)) = hermiticity_violation(op) {
        return invalid(format!("operator is not Hermitian at ({i},{j})"));
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n_sites);
    peel(op.clone(), basis, &mut prefix, &mut out);
    out.retain(|c| c.coeff.abs() >= PRUNE_THRESHOLD);
    Ok(out)
}

fn peel(
    op: DMatrix<Complex64>,
    basis: &GellMannBasis,
    prefix: &mut Vec<u16>,
    out: &mut Vec<GmComponent>,
) {
    let n = op.nrows();
    if n == 1 {
        let c = op[(0, 0)];
        // Hermitian op and Hermitian basis give real coefficients.
        out.push(GmComponent {
            coeff: c.re,
            gm_indices: prefix.clone(),
        });
        return;
    }
    let d = basis.d();
    let sub = n / d;
    for j in 0..basis.len() {
        let mut block = DMatrix::from_element(sub, sub, ZERO);
        for r in 0..d {
            if let Some((s, lam)) = basis.act(j, r) {
                // λ[s][r] pairs with the op block at (r, s)
                block += op.view((r * sub, s * sub), (sub, sub)) * (lam * 0.5);
            }
        }
        let amax = block.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if amax * (sub as f64) < PRUNE_THRESHOLD * 1e-3 {
            continue;
        }
        prefix.push(j as u16);
        peel(block, basis, prefix, out);
        prefix.pop();
    }
}

/// Lift a `(vmax+1)`-level single-mode operator onto the site space of one
/// mode block.
///
/// - Qudit: unchanged.
/// - Binary: levels sit at their binary codes; unused codes get zero rows and
///   columns.
/// - Direct: second-quantized form `Σ o_vv n_v + Σ_{v≠w} o_vw σ⁺_v σ⁻_w`,
///   which preserves the one-hot subspace and acts on at most two qubits per
///   matrix element.
pub fn embed_single_mode(op: &DMatrix<f64>, scheme: &EncodingScheme) -> Result<DMatrix<Complex64>> {
    let n = scheme.levels();
    if op.nrows() != n || op.ncols() != n {
        return invalid(format!(
            "single-mode operator is {}x{}, expected {n}x{n}",
            op.nrows(),
            op.ncols()
        ));
    }
    let dim = scheme.block_dim();
    let mut out = DMatrix::from_element(dim, dim, ZERO);
    match scheme.kind {
        EncodingKind::Qudit | EncodingKind::Binary => {
            for c in 0..n {
                for r in 0..n {
                    out[(r, c)] = Complex64::new(op[(r, c)], 0.0);
                }
            }
        }
        EncodingKind::Direct => {
            let bit = |v: usize| scheme.encode_level(v);
            for x in 0..dim {
                let occupied = |v: usize| x & bit(v) != 0;
                let diag: f64 = (0..n).filter(|&v| occupied(v)).map(|v| op[(v, v)]).sum();
                out[(x, x)] += diag;
                for w in (0..n).filter(|&w| occupied(w)) {
                    for v in (0..n).filter(|&v| v != w && !occupied(v)) {
                        let y = x ^ bit(w) ^ bit(v);
                        out[(y, x)] += op[(v, w)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gell-Mann expansion of a single-mode operator under `scheme`.
pub fn decompose_single_mode(
    op: &DMatrix<f64>,
    scheme: &EncodingScheme,
) -> Result<Vec<GmComponent>> {
    let embedded = embed_single_mode(op, scheme)?;
    let basis = gell_mann_basis(scheme.site_dim())?;
    decompose(&embedded, &basis, scheme.sites_per_mode())
}

/// One stored term `h·Γ` of the encoded Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedTerm {
    #[serde(rename = "coeff_cm1")]
    pub coeff: f64,
    pub gm_indices: Vec<u16>,
    #[serde(skip)]
    pub order: usize,
}

impl EncodedTerm {
    pub fn new(coeff: f64, gm_indices: Vec<u16>) -> Self {
        let order = gm_indices.iter().filter(|&&i| i != 0).count();
        Self {
            coeff,
            gm_indices,
            order,
        }
    }
}

/// Encoded Hamiltonian `Σ h_n Γ_n + offset·I`.
///
/// The pure-identity string is kept as [`constant_offset`](Self::constant_offset)
/// (in units of the true identity) rather than as a stored term. It still
/// counts towards [`n_hq`](Self::n_hq).
#[derive(Debug, Clone, PartialEq)]
pub struct TermList {
    pub scheme: EncodingScheme,
    pub terms: Vec<EncodedTerm>,
    pub constant_offset: f64,
}

impl TermList {
    pub fn has_identity_term(&self) -> bool {
        self.constant_offset.abs() >= PRUNE_THRESHOLD
    }

    /// Number of Hamiltonian terms, identity included.
    pub fn n_hq(&self) -> usize {
        self.terms.len() + usize::from(self.has_identity_term())
    }

    /// Term count per operator order; order 0 is the identity term.
    pub fn order_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        if self.has_identity_term() {
            hist.insert(0, 1);
        }
        for t in &self.terms {
            *hist.entry(t.order).or_insert(0) += 1;
        }
        hist
    }

    pub fn two_site_gate_count(&self) -> usize {
        two_site_gate_count(self)
    }

    pub fn full_dim(&self) -> Result<usize> {
        self.scheme.full_dim().ok_or(Error::ResourceLimit {
            what: "register",
            requested: usize::MAX,
            cap: dimension_cap(),
        })
    }

    pub fn basis(&self) -> GellMannBasis {
        gell_mann_basis(self.scheme.site_dim()).expect("scheme has d >= 2")
    }

    /// Compile every stored term on the full register, subject to `cap`.
    pub fn compile(&self, cap: usize) -> Result<Vec<MonomialOp>> {
        check_cap("register", self.full_dim()?, cap)?;
        let basis = self.basis();
        Ok(self
            .terms
            .iter()
            .map(|t| basis.compile_string(&t.gm_indices))
            .collect())
    }

    /// Matrix of the encoded Hamiltonian between encoded states, in product
    /// basis order (mode 1 most significant).
    ///
    /// Fails if the Hamiltonian maps an encoded state outside the encoded subspace.
    pub fn encoded_matrix(&self) -> Result<DMatrix<f64>> {
        let scheme = &self.scheme;
        let dim = scheme.encoded_dim().ok_or(Error::ResourceLimit {
            what: "encoded subspace",
            requested: usize::MAX,
            cap: dimension_cap(),
        })?;
        check_cap("encoded subspace", dim, dimension_cap())?;
        let basis = self.basis();
        let mut h = DMatrix::<Complex64>::from_element(dim, dim, ZERO);
        for col in 0..dim {
            let state =
                crate::model::BasisState::from_product_index(col, scheme.n_modes, scheme.vmax);
            let x = encode_state(&state, scheme)?;
            h[(col, col)] += self.constant_offset;
            // single strings may leave the encoded subspace; only their sum must not
            let mut column: BTreeMap<usize, Complex64> = BTreeMap::new();
            for t in &self.terms {
                if let Some((y, v)) = basis.apply_string(&t.gm_indices, x) {
                    *column.entry(y).or_insert(ZERO) += v * t.coeff;
                }
            }
            let scale = column.values().map(|v| v.norm()).fold(1.0, f64::max);
            for (y, v) in column {
                match decode_index(y, scheme) {
                    Some(row) => h[(row.product_index(scheme.vmax), col)] += v,
                    None if v.norm() > 1e-9 * scale => {
                        return invalid(format!(
                            "encoded state {col} leaks to register index {y} with amplitude {:e}",
                            v.norm()
                        ));
                    }
                    None => {}
                }
            }
        }
        let worst_imag = h.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if worst_imag > 1e-9 {
            return invalid(format!(
                "encoded Hamiltonian has imaginary part {worst_imag:e}"
            ));
        }
        Ok(h.map(|z| z.re))
    }

    pub fn to_dump(&self) -> TermDump {
        TermDump {
            encoding: self.scheme.kind,
            d: self.scheme.site_dim(),
            n_sites: self.scheme.n_sites(),
            n_modes: self.scheme.n_modes,
            vmax: self.scheme.vmax,
            constant_offset_cm1: self.constant_offset,
            terms: self.terms.clone(),
        }
    }

    pub fn from_dump(dump: TermDump) -> Result<Self> {
        let scheme = EncodingScheme::new(dump.encoding, dump.n_modes, dump.vmax)?;
        if scheme.site_dim() != dump.d || scheme.n_sites() != dump.n_sites {
            return invalid("term dump site layout does not match its encoding");
        }
        let max_index = (dump.d * dump.d) as u16;
        let mut terms = Vec::with_capacity(dump.terms.len());
        for t in dump.terms {
            if t.gm_indices.len() != dump.n_sites || t.gm_indices.iter().any(|&i| i >= max_index) {
                return invalid(format!("malformed Gell-Mann string {:?}", t.gm_indices));
            }
            terms.push(EncodedTerm::new(t.coeff, t.gm_indices));
        }
        Ok(Self {
            scheme,
            terms,
            constant_offset: dump.constant_offset_cm1,
        })
    }

    /// One term per row: `coeff_cm1,order,gm_indices` with indices joined by
    /// spaces. The identity offset is the first row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "coeff_cm1,order,gm_indices")?;
        let n = self.scheme.n_sites();
        let ident = vec!["0"; n].join(" ");
        writeln!(w, "{:.16e},0,{}", self.constant_offset, ident)?;
        for t in &self.terms {
            let idx: Vec<String> = t.gm_indices.iter().map(|i| i.to_string()).collect();
            writeln!(w, "{:.16e},{},{}", t.coeff, t.order, idx.join(" "))?;
        }
        Ok(())
    }
}

/// Serialized term list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDump {
    pub encoding: EncodingKind,
    pub d: usize,
    pub n_sites: usize,
    pub n_modes: usize,
    pub vmax: usize,
    pub constant_offset_cm1: f64,
    pub terms: Vec<EncodedTerm>,
}

/// Two-site gate count of one Trotter step: `Σ (2𝒪 − 3)` over terms with 𝒪 ≥ 2.
pub fn two_site_gate_count(terms: &TermList) -> usize {
    terms
        .terms
        .iter()
        .filter(|t| t.order >= 2)
        .map(|t| 2 * t.order - 3)
        .sum()
}

type Expansion = Vec<(Vec<u16>, f64)>;

/// Assemble the encoded Hamiltonian from per-mode expansions of `H₀` and `q^κ`.
pub fn build_encoded_hamiltonian(
    model: &VibrationalModel,
    scheme: &EncodingScheme,
    convention: MatrixElementConvention,
) -> Result<TermList> {
    if model.n_modes() != scheme.n_modes {
        return invalid(format!(
            "model has {} modes but the encoding was built for {}",
            model.n_modes(),
            scheme.n_modes
        ));
    }
    check_cap("mode block", scheme.block_dim(), dimension_cap())?;
    let vmax = scheme.vmax;
    let b = scheme.sites_per_mode();
    let d = scheme.site_dim() as f64;

    let expand = |kind| -> Result<Expansion> {
        let op = ho_operator_matrix(vmax, kind, convention)?;
        Ok(decompose_single_mode(&op, scheme)?
            .into_iter()
            .map(|c| (c.gm_indices, c.coeff))
            .collect())
    };
    // I = (√(d/2))^b · λ₀^{⊗b} on one mode block
    let identity: Expansion = vec![(vec![0; b], (d / 2.0).sqrt().powi(b as i32))];
    let powers: Vec<Expansion> = (1..=3)
        .map(|p| expand(OperatorKind::Position(p)))
        .collect::<Result<_>>()?;

    let mut acc: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
    let mut add_product = |factors: Vec<&Expansion>, weight: f64| {
        let mut partial: Expansion = vec![(Vec::new(), weight)];
        for f in factors {
            partial = partial
                .iter()
                .flat_map(|(idx, c)| {
                    f.iter().map(move |(fi, fc)| {
                        let mut joined = idx.clone();
                        joined.extend_from_slice(fi);
                        (joined, c * fc)
                    })
                })
                .collect();
        }
        for (idx, c) in partial {
            *acc.entry(idx).or_insert(0.0) += c;
        }
    };

    for (k, &w) in model.omega().iter().enumerate() {
        let h0 = expand(OperatorKind::Harmonic(w))?;
        let factors = (0..model.n_modes())
            .map(|m| if m == k { &h0 } else { &identity })
            .collect();
        add_product(factors, 1.0);
    }
    for ((j, k, l), f) in model.cubic() {
        let mut count = vec![0usize; model.n_modes()];
        for i in [j, k, l] {
            count[i - 1] += 1;
        }
        let factors = count
            .iter()
            .map(|&c| if c == 0 { &identity } else { &powers[c - 1] })
            .collect();
        add_product(factors, f);
    }

    let identity_key = vec![0u16; scheme.n_sites()];
    let identity_coeff = acc.remove(&identity_key).unwrap_or(0.0);
    let constant_offset = identity_coeff * (2.0 / d).sqrt().powi(scheme.n_sites() as i32);
    let terms = acc
        .into_iter()
        .filter(|(_, c)| c.abs() >= PRUNE_THRESHOLD)
        .map(|(idx, c)| EncodedTerm::new(c, idx))
        .collect();
    Ok(TermList {
        scheme: *scheme,
        terms,
        constant_offset,
    })
}
