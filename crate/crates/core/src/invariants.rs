//! Affine-invariant operator bases between symbol fibers, brute-force
//! invariance testing, construction of the trace-free invariant families,
//! and the critical weight sets where unique equivariant quantization fails.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::geometry::{
    density_action, divergence_op, named_operator, symbol_action, AlgebraKind, AlgebraSpec,
    Metric, ModuleRole, NamedOperator, WeightedModuleSpec,
};
use crate::harmonic::{fiber_basis, trace_free_gradient_power};
use crate::linalg::{rat, rat_int, solve_linear, RationalMatrix, Rational, RowSpace};
use crate::weyl::{monomials_of_degree, zero_exp, OperatorElement, SymbolPoly};

/// One monomial of the affine-invariant operator family
/// R^r (G0)^g (L0)^l (D0)^d T^t, materialized on a concrete source fiber.
#[derive(Clone, Debug)]
pub struct AffineBasisElement {
    pub r_power: usize,
    pub g: usize,
    pub ell: usize,
    pub d: usize,
    pub t_power: usize,
    pub realized: OperatorElement,
}

impl AffineBasisElement {
    pub fn identity(n: usize) -> Self {
        AffineBasisElement {
            r_power: 0,
            g: 0,
            ell: 0,
            d: 0,
            t_power: 0,
            realized: OperatorElement::identity(n),
        }
    }

    pub fn is_identity_shape(&self) -> bool {
        self.r_power == 0 && self.g == 0 && self.ell == 0 && self.d == 0 && self.t_power == 0
    }

    pub fn label(&self) -> String {
        if self.is_identity_shape() {
            return "Id".into();
        }
        let mut parts = Vec::new();
        let push = |parts: &mut Vec<String>, base: &str, e: usize| match e {
            0 => {}
            1 => parts.push(base.to_string()),
            _ => parts.push(format!("{base}^{e}")),
        };
        push(&mut parts, "R", self.r_power);
        push(&mut parts, "G0", self.g);
        push(&mut parts, "L0", self.ell);
        push(&mut parts, "D0", self.d);
        push(&mut parts, "T", self.t_power);
        parts.join(" ")
    }
}

/// Materialize R^{s'} G0^g L0^l D0^d T^s on sources of degree k and trace
/// depth s. The gradient steps carry their trace corrections for the
/// intermediate harmonic degrees; the divergence and Laplacian need none
/// since they preserve the kernel of T.
fn materialize_monomial(
    metric: &Metric,
    k: usize,
    s: usize,
    s_out: usize,
    g: usize,
    ell: usize,
    d: usize,
) -> Result<OperatorElement> {
    let n = metric.n();
    let t = named_operator(NamedOperator::Trace, metric);
    let mut op = OperatorElement::identity(n);
    for _ in 0..s {
        op = t.mul(&op);
    }
    let dv = divergence_op(n);
    for _ in 0..d {
        op = dv.mul(&op);
    }
    let lap = named_operator(NamedOperator::Laplacian, metric);
    for _ in 0..ell {
        op = lap.mul(&op);
    }
    let harmonic_degree = (k - 2 * s).saturating_sub(d);
    op = trace_free_gradient_power(metric, harmonic_degree, g)?.mul(&op);
    let r = named_operator(NamedOperator::MetricSquare, metric);
    for _ in 0..s_out {
        op = r.mul(&op);
    }
    Ok(op)
}

/// A deterministic fingerprint of an operator's action on the submodule
/// spanned by the fiber with polynomial x-coefficients, used for exact
/// independence pruning.
fn operator_fingerprint(
    op: &OperatorElement,
    fiber: &[SymbolPoly],
    keys: &mut Vec<(Vec<u32>, Vec<u32>, usize, Vec<u32>)>,
) -> std::collections::BTreeMap<(Vec<u32>, Vec<u32>, usize, Vec<u32>), Rational> {
    let mut out = std::collections::BTreeMap::new();
    for ((xm, dx), group) in op.grouped_by_x() {
        for (bi, b) in fiber.iter().enumerate() {
            let v = group.apply(b);
            for ((_, pe), c) in v.terms() {
                let key = (xm.clone(), dx.clone(), bi, pe.clone());
                if !keys.contains(&key) {
                    keys.push(key.clone());
                }
                out.insert(key, c.clone());
            }
        }
    }
    out
}

/// Spanning set of the affine-invariant operators from the (k, s) fiber to
/// the (k', s') fiber at equal weight, with exact linear dependencies (and
/// elements vanishing on the source) removed by deterministic pivoting.
/// Unreachable targets give an empty list.
pub fn affine_basis(
    k: usize,
    s: usize,
    k_fin: usize,
    s_fin: usize,
    metric: &Metric,
) -> Result<Vec<AffineBasisElement>> {
    if 2 * s > k || 2 * s_fin > k_fin {
        return Err(Error::ContractViolation(
            "trace depth exceeds half the degree".into(),
        ));
    }
    if s_fin > s || k_fin > k + (s - s_fin) {
        return Ok(Vec::new());
    }
    let g_hat = s - s_fin;
    let Some(d_hat) = (k - k_fin).checked_sub(g_hat) else {
        return Ok(Vec::new());
    };
    let fiber = fiber_basis(k, s, metric)?.elements;
    let mut keys = Vec::new();
    let mut candidates = Vec::new();
    for ell in 0..=g_hat.min(d_hat) {
        let g = g_hat - ell;
        let d = d_hat - ell;
        let realized = materialize_monomial(metric, k, s, s_fin, g, ell, d)?;
        candidates.push(AffineBasisElement {
            r_power: s_fin,
            g,
            ell,
            d,
            t_power: s,
            realized,
        });
    }
    let prints: Vec<_> = candidates
        .iter()
        .map(|c| operator_fingerprint(&c.realized, &fiber, &mut keys))
        .collect();
    let mut space = RowSpace::new(keys.len());
    let mut out = Vec::new();
    for (cand, print) in candidates.into_iter().zip(prints) {
        let row: Vec<Rational> = keys
            .iter()
            .map(|k| print.get(k).cloned().unwrap_or_else(Rational::zero))
            .collect();
        if space.insert(row) {
            out.push(cand);
        }
    }
    Ok(out)
}

/// Assemble the exact linear system "sum_j c_j Op_j == Rhs on the submodule
/// spanned by the fiber with polynomial x-coefficients", in the grouped
/// representation (one block of equations per x-part of the operators, per
/// fiber element, per momentum monomial of the values). `project` is applied
/// to every group value on both sides; passing the projection onto the
/// target component restricts the equation accordingly.
pub(crate) fn grouped_linear_system(
    ops: &[&OperatorElement],
    rhs: Option<&OperatorElement>,
    fiber: &[SymbolPoly],
    project: Option<&dyn Fn(&SymbolPoly) -> Result<SymbolPoly>>,
) -> Result<(RationalMatrix, Vec<Rational>)> {
    use std::collections::BTreeSet;
    let mut group_keys: BTreeSet<(Vec<u32>, Vec<u32>)> = BTreeSet::new();
    let grouped_ops: Vec<_> = ops.iter().map(|o| o.grouped_by_x()).collect();
    for g in &grouped_ops {
        group_keys.extend(g.keys().cloned());
    }
    let grouped_rhs = rhs.map(|r| r.grouped_by_x());
    if let Some(g) = &grouped_rhs {
        group_keys.extend(g.keys().cloned());
    }
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let mut rhs_vec: Vec<Rational> = Vec::new();
    for key in &group_keys {
        for b in fiber {
            let mut values: Vec<SymbolPoly> = Vec::with_capacity(ops.len());
            for g in &grouped_ops {
                let v = match g.get(key) {
                    Some(p_op) => p_op.apply(b),
                    None => SymbolPoly::zero(b.n()),
                };
                values.push(match project {
                    Some(pr) => pr(&v)?,
                    None => v,
                });
            }
            let rv = match &grouped_rhs {
                Some(g) => {
                    let v = match g.get(key) {
                        Some(p_op) => p_op.apply(b),
                        None => SymbolPoly::zero(b.n()),
                    };
                    match project {
                        Some(pr) => pr(&v)?,
                        None => v,
                    }
                }
                None => SymbolPoly::zero(b.n()),
            };
            let mut monos: BTreeSet<Vec<u32>> = BTreeSet::new();
            for v in values.iter().chain(std::iter::once(&rv)) {
                for ((_, pe), _) in v.terms() {
                    monos.insert(pe.clone());
                }
            }
            for pe in monos {
                let coeff_of = |v: &SymbolPoly| {
                    v.terms()
                        .find(|((_, q), _)| q == &pe)
                        .map(|(_, c)| c.clone())
                        .unwrap_or_else(Rational::zero)
                };
                rows.push(values.iter().map(coeff_of).collect());
                rhs_vec.push(coeff_of(&rv));
            }
        }
    }
    if rows.is_empty() {
        rows.push(vec![Rational::zero(); ops.len()]);
        rhs_vec.push(Rational::zero());
    }
    Ok((RationalMatrix::from_rows(rows)?, rhs_vec))
}

/// Brute-force invariance test: the defect `L' A - A L` of every generator
/// must annihilate the source submodule. Symbol modules are tested on their
/// fiber bases, density modules on constants.
pub fn is_invariant(
    a: &OperatorElement,
    algebra: &AlgebraSpec,
    source: &WeightedModuleSpec,
    target: &WeightedModuleSpec,
) -> Result<bool> {
    if source.n != algebra.n() || target.n != algebra.n() || a.n() != algebra.n() {
        return Err(Error::DimensionMismatch(
            "operator, algebra and modules must share the dimension".into(),
        ));
    }
    match (&source.role, &target.role) {
        (
            ModuleRole::Symbols {
                delta: d_src,
                k,
                s,
            },
            ModuleRole::Symbols { delta: d_tgt, .. },
        ) => {
            let fiber: Vec<SymbolPoly> = match (algebra.kind, s) {
                (AlgebraKind::Conformal, Some(s)) => {
                    let metric = algebra
                        .metric
                        .as_ref()
                        .ok_or_else(|| Error::ContractViolation("conformal algebra lacks metric".into()))?;
                    fiber_basis(*k, *s, metric)?.elements
                }
                _ => monomials_of_degree(algebra.n(), *k as u32)
                    .into_iter()
                    .map(|pe| {
                        SymbolPoly::monomial(algebra.n(), zero_exp(algebra.n()), pe, Rational::one())
                    })
                    .collect(),
            };
            for x in algebra.generators() {
                let defect = symbol_action(x, d_tgt)
                    .mul(a)
                    .sub(&a.mul(&symbol_action(x, d_src)));
                if !defect.annihilates_fiber(&fiber)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        (
            ModuleRole::Density { lambda: l_src },
            ModuleRole::Density { lambda: l_tgt },
        ) => {
            let fiber = vec![SymbolPoly::one(algebra.n())];
            for x in algebra.generators() {
                let defect = density_action(x, l_tgt)
                    .mul(a)
                    .sub(&a.mul(&density_action(x, l_src)));
                if !defect.annihilates_fiber(&fiber)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        _ => Err(Error::ContractViolation(
            "invariance test needs both modules of the same kind".into(),
        )),
    }
}

/// A critical weight together with the exponent of the family member that
/// produces it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyCriticalValue {
    pub exponent: usize,
    pub delta: Rational,
}

/// The critical shifts at which unique equivariant quantization fails.
#[derive(Clone, Debug)]
pub enum CriticalValues {
    Conformal {
        d_family: Vec<FamilyCriticalValue>,
        g_family: Vec<FamilyCriticalValue>,
        l_family: Vec<FamilyCriticalValue>,
    },
    Projective {
        values: Vec<FamilyCriticalValue>,
    },
}

impl CriticalValues {
    pub fn contains(&self, delta: &Rational) -> bool {
        match self {
            CriticalValues::Conformal {
                d_family,
                g_family,
                l_family,
            } => d_family
                .iter()
                .chain(g_family)
                .chain(l_family)
                .any(|v| &v.delta == delta),
            CriticalValues::Projective { values } => values.iter().any(|v| &v.delta == delta),
        }
    }

    pub fn all_values(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = match self {
            CriticalValues::Conformal {
                d_family,
                g_family,
                l_family,
            } => d_family
                .iter()
                .chain(g_family)
                .chain(l_family)
                .map(|v| v.delta.clone())
                .collect(),
            CriticalValues::Projective { values } => {
                values.iter().map(|v| v.delta.clone()).collect()
            }
        };
        out.sort();
        out.dedup();
        out
    }
}

/// Conformal critical shifts on the (k, s) fiber:
/// divergence family d in [1, k-2s] at 1 + (2(k-s)-d-1)/n,
/// gradient family g in [1, s] at (2s+1-g)/n,
/// Laplacian family l in [1, s] at 1/2 + (k-l)/n.
pub fn conformal_critical_values(k: usize, s: usize, n: usize) -> Result<CriticalValues> {
    if 2 * s > k {
        return Err(Error::ContractViolation(
            "trace depth exceeds half the degree".into(),
        ));
    }
    let n_i = n as i64;
    let d_family = (1..=k.saturating_sub(2 * s))
        .map(|d| FamilyCriticalValue {
            exponent: d,
            delta: rat_int(1) + rat(2 * (k as i64 - s as i64) - d as i64 - 1, n_i),
        })
        .collect();
    let g_family = (1..=s)
        .map(|g| FamilyCriticalValue {
            exponent: g,
            delta: rat(2 * s as i64 + 1 - g as i64, n_i),
        })
        .collect();
    let l_family = (1..=s)
        .map(|l| FamilyCriticalValue {
            exponent: l,
            delta: rat(1, 2) + rat(k as i64 - l as i64, n_i),
        })
        .collect();
    Ok(CriticalValues::Conformal {
        d_family,
        g_family,
        l_family,
    })
}

/// Projective critical shifts on degree-k symbols:
/// 1 + (2k - l - 1)/(n+1), l in [1, k].
pub fn projective_critical_values(k: usize, n: usize) -> CriticalValues {
    let values = (1..=k)
        .map(|l| FamilyCriticalValue {
            exponent: l,
            delta: rat_int(1) + rat(2 * k as i64 - l as i64 - 1, n as i64 + 1),
        })
        .collect();
    CriticalValues::Projective { values }
}

/// Critical shift sets for either algebra. `s` is ignored in the projective
/// case where the grading has no trace refinement.
pub fn critical_values(k: usize, s: usize, n: usize, kind: AlgebraKind) -> Result<CriticalValues> {
    match kind {
        AlgebraKind::Conformal => conformal_critical_values(k, s, n),
        AlgebraKind::Projective => Ok(projective_critical_values(k, n)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvariantFamily {
    DPower,
    GPower,
    LFamily,
    DensityLaplacian,
}

/// A verified invariant operator between two weighted fibers.
#[derive(Clone, Debug)]
pub struct InvariantOperatorReport {
    pub family: InvariantFamily,
    pub k: usize,
    pub s: usize,
    pub target_k: usize,
    pub target_s: usize,
    pub exponent: usize,
    pub delta_or_lambda: Rational,
    /// Correction coefficients a_1..a_l of the Laplacian family; empty for
    /// the pure power families.
    pub coefficients: Vec<Rational>,
    pub operator: OperatorElement,
    pub verified: bool,
}

impl InvariantOperatorReport {
    /// Short display label, e.g. "D^2", "G0 T", "R D0 T", "L1 T".
    pub fn label(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        let push = |parts: &mut Vec<String>, base: &str, e: usize| match e {
            0 => {}
            1 => parts.push(base.to_string()),
            _ => parts.push(format!("{base}^{e}")),
        };
        match self.family {
            InvariantFamily::DPower => {
                push(&mut parts, "R", self.target_s);
                push(&mut parts, "D", self.exponent);
                push(&mut parts, "T", self.s);
            }
            InvariantFamily::GPower => {
                push(&mut parts, "R", self.target_s);
                push(&mut parts, "G0", self.exponent);
                push(&mut parts, "T", self.s);
            }
            InvariantFamily::LFamily => {
                push(&mut parts, "R", self.target_s);
                if self.k.saturating_sub(2 * self.s) == 0 {
                    push(&mut parts, "L0", self.exponent);
                } else {
                    parts.push(format!("L{}", self.exponent));
                }
                push(&mut parts, "T", self.s);
            }
            InvariantFamily::DensityLaplacian => {
                push(&mut parts, "Delta", self.exponent);
            }
        }
        if parts.is_empty() {
            "Id".into()
        } else {
            parts.join(" ")
        }
    }
}

/// Build the trace-free Laplacian-family operator of order `2*ell` on
/// degree-k harmonic symbols: L0^l + a_1 G0 L0^{l-1} D0 + ... + a_l G0^l D0^l
/// with the unique coefficients making it conformally invariant at
/// delta = 1/2 + (k - ell)/n. The coefficients are solved twice under
/// independent orderings and must agree; the result is verified against
/// every generator.
pub fn construct_l_family(ell: usize, k: usize, metric: &Metric) -> Result<InvariantOperatorReport> {
    let n = metric.n();
    let delta = rat(1, 2) + rat(k as i64 - ell as i64, n as i64);
    if ell == 0 {
        return Ok(InvariantOperatorReport {
            family: InvariantFamily::LFamily,
            k,
            s: 0,
            target_k: k,
            target_s: 0,
            exponent: 0,
            delta_or_lambda: delta,
            coefficients: Vec::new(),
            operator: OperatorElement::identity(n),
            verified: true,
        });
    }
    let delta_tgt = &delta + rat(2 * ell as i64, n as i64);
    let fiber = fiber_basis(k, 0, metric)?.elements;
    let lap = named_operator(NamedOperator::Laplacian, metric);
    let dv = divergence_op(n);
    // Candidate i: G0^i L0^{l-i} D0^i, materialized on degree-k harmonics.
    let mut terms: Vec<(usize, OperatorElement)> = Vec::new();
    let lead = lap.pow(ell);
    for i in 1..=ell {
        if i > k {
            break; // D0^i kills the fiber
        }
        let op = trace_free_gradient_power(metric, k - i, i)?
            .mul(&lap.pow(ell - i))
            .mul(&dv.pow(i));
        terms.push((i, op));
    }
    let x1 = crate::geometry::VectorField::conformal_inversion(metric, 0);
    let l_src = symbol_action(&x1, &delta);
    let l_tgt = symbol_action(&x1, &delta_tgt);
    let defect = |op: &OperatorElement| op.mul(&l_src).sub(&l_tgt.mul(op));
    let defects: Vec<OperatorElement> = terms.iter().map(|(_, op)| defect(op)).collect();
    let rhs = defect(&lead).neg();
    let refs: Vec<&OperatorElement> = defects.iter().collect();
    let (mat, rhs_vec) = grouped_linear_system(&refs, Some(&rhs), &fiber, None)?;
    let sol = solve_linear(&mat, &rhs_vec)?;
    let Some(coeffs) = sol.particular else {
        return Err(Error::InternalConsistency(format!(
            "no invariant Laplacian-family operator at ell={ell}, k={k}, n={n}"
        )));
    };
    if !sol.kernel_basis.is_empty() {
        return Err(Error::InternalConsistency(format!(
            "Laplacian-family coefficients not unique at ell={ell}, k={k}, n={n}"
        )));
    }
    // Independent re-derivation: reversed candidate and fiber orderings.
    {
        let rev_fiber: Vec<SymbolPoly> = fiber.iter().rev().cloned().collect();
        let rev_defects: Vec<&OperatorElement> = defects.iter().rev().collect();
        let (mat2, rhs2) = grouped_linear_system(&rev_defects, Some(&rhs), &rev_fiber, None)?;
        let sol2 = solve_linear(&mat2, &rhs2)?;
        let mut re: Vec<Rational> = sol2
            .particular
            .ok_or_else(|| Error::InternalConsistency("re-derivation failed to solve".into()))?;
        re.reverse();
        if re != coeffs {
            return Err(Error::InternalConsistency(
                "Laplacian-family coefficients disagree between orderings".into(),
            ));
        }
    }
    let mut op = lead;
    for ((_, term), c) in terms.iter().zip(&coeffs) {
        op = op.add(&term.scale(c));
    }
    let algebra = AlgebraSpec::conformal(metric.clone());
    let source = WeightedModuleSpec::symbols(n, Some(metric.clone()), delta.clone(), k, Some(0))?;
    let target =
        WeightedModuleSpec::symbols(n, Some(metric.clone()), delta_tgt, k, Some(0))?;
    if !is_invariant(&op, &algebra, &source, &target)? {
        return Err(Error::InternalConsistency(format!(
            "solved Laplacian-family operator fails full invariance at ell={ell}, k={k}, n={n}"
        )));
    }
    Ok(InvariantOperatorReport {
        family: InvariantFamily::LFamily,
        k,
        s: 0,
        target_k: k,
        target_s: 0,
        exponent: ell,
        delta_or_lambda: delta,
        coefficients: coeffs,
        operator: op,
        verified: true,
    })
}

/// Apply the closed-form classification between two conformal weighted
/// fibers: predict which family member (if any) is invariant, materialize
/// it, verify by brute force over the whole algebra, and return the
/// verified reports. Predicted-but-unverifiable operators raise an
/// internal-consistency error.
pub fn classify_invariants(
    k: usize,
    s: usize,
    k_fin: usize,
    s_fin: usize,
    delta: &Rational,
    delta_fin: &Rational,
    metric: &Metric,
) -> Result<Vec<InvariantOperatorReport>> {
    let n = metric.n();
    if 2 * s > k || 2 * s_fin > k_fin {
        return Err(Error::ContractViolation(
            "trace depth exceeds half the degree".into(),
        ));
    }
    let two_j = (delta_fin - delta) * rat_int(n as i64);
    let j = &two_j / rat_int(2);
    if !j.is_integer() {
        return Ok(Vec::new());
    }
    let j: i64 = match j.to_integer().try_into() {
        Ok(v) => v,
        Err(_) => return Ok(Vec::new()),
    };
    let algebra = AlgebraSpec::conformal(metric.clone());
    let source = WeightedModuleSpec::symbols(n, Some(metric.clone()), delta.clone(), k, Some(s))?;
    let target =
        WeightedModuleSpec::symbols(n, Some(metric.clone()), delta_fin.clone(), k_fin, Some(s_fin))?;
    let mut out = Vec::new();
    let ki = k as i64;
    let si = s as i64;
    let kfi = k_fin as i64;
    let sfi = s_fin as i64;

    // Divergence family R^{s'} D^d T^s.
    if sfi - si == j {
        let d = ki - kfi + 2 * j;
        if d >= 1
            && d <= ki - 2 * si
            && *delta == rat_int(1) + rat(2 * (ki - si) - d - 1, n as i64)
        {
            let op = materialize_monomial(metric, k, s, s_fin, 0, 0, d as usize)?;
            if !is_invariant(&op, &algebra, &source, &target)? {
                return Err(Error::InternalConsistency(format!(
                    "predicted divergence-family operator fails verification (k={k}, s={s}, d={d})"
                )));
            }
            out.push(InvariantOperatorReport {
                family: InvariantFamily::DPower,
                k,
                s,
                target_k: k_fin,
                target_s: s_fin,
                exponent: d as usize,
                delta_or_lambda: delta.clone(),
                coefficients: Vec::new(),
                operator: op,
                verified: true,
            });
        }
    }

    // Gradient family R^{s'} G0^g T^s.
    {
        let g = j - (sfi - si);
        if g >= 1 && ki - kfi == si - sfi - j && *delta == rat(2 * si + 1 - g, n as i64) {
            let op = materialize_monomial(metric, k, s, s_fin, g as usize, 0, 0)?;
            if !is_invariant(&op, &algebra, &source, &target)? {
                return Err(Error::InternalConsistency(format!(
                    "predicted gradient-family operator fails verification (k={k}, s={s}, g={g})"
                )));
            }
            out.push(InvariantOperatorReport {
                family: InvariantFamily::GPower,
                k,
                s,
                target_k: k_fin,
                target_s: s_fin,
                exponent: g as usize,
                delta_or_lambda: delta.clone(),
                coefficients: Vec::new(),
                operator: op,
                verified: true,
            });
        }
    }

    // Laplacian family R^{s'} Ll T^s.
    {
        let ell = j - (sfi - si);
        if ell >= 1
            && ki - kfi == 2 * (ell - j)
            && *delta == rat(1, 2) + rat(ki - ell, n as i64)
        {
            let inner = construct_l_family(ell as usize, k - 2 * s, metric)?;
            let t = named_operator(NamedOperator::Trace, metric);
            let r = named_operator(NamedOperator::MetricSquare, metric);
            let mut op = OperatorElement::identity(n);
            for _ in 0..s {
                op = t.mul(&op);
            }
            op = inner.operator.mul(&op);
            for _ in 0..s_fin {
                op = r.mul(&op);
            }
            if !is_invariant(&op, &algebra, &source, &target)? {
                return Err(Error::InternalConsistency(format!(
                    "predicted Laplacian-family operator fails verification (k={k}, s={s}, ell={ell})"
                )));
            }
            out.push(InvariantOperatorReport {
                family: InvariantFamily::LFamily,
                k,
                s,
                target_k: k_fin,
                target_s: s_fin,
                exponent: ell as usize,
                delta_or_lambda: delta.clone(),
                coefficients: inner.coefficients,
                operator: op,
                verified: true,
            });
        }
    }
    Ok(out)
}

/// Exact kernel of the invariance system over the affine basis from (k, s)
/// to (k', s') at shift delta: each returned pair is a coefficient vector
/// over the affine basis together with the materialized operator, verified
/// invariant under the whole conformal algebra.
pub fn invariant_combinations(
    k: usize,
    s: usize,
    k_fin: usize,
    s_fin: usize,
    delta: &Rational,
    metric: &Metric,
) -> Result<Vec<(Vec<Rational>, OperatorElement)>> {
    let n = metric.n();
    let basis = affine_basis(k, s, k_fin, s_fin, metric)?;
    if basis.is_empty() {
        return Ok(Vec::new());
    }
    let fiber = fiber_basis(k, s, metric)?.elements;
    let x1 = crate::geometry::VectorField::conformal_inversion(metric, 0);
    let l_src = symbol_action(&x1, delta);
    // Same-delta basis: source and target carry the same weight.
    let defects: Vec<OperatorElement> = basis
        .iter()
        .map(|b| b.realized.mul(&l_src).sub(&l_src.mul(&b.realized)))
        .collect();
    let refs: Vec<&OperatorElement> = defects.iter().collect();
    let (mat, _) = grouped_linear_system(&refs, None, &fiber, None)?;
    let kernel = crate::linalg::kernel(&mat);
    let algebra = AlgebraSpec::conformal(metric.clone());
    let source = WeightedModuleSpec::symbols(n, Some(metric.clone()), delta.clone(), k, Some(s))?;
    let target =
        WeightedModuleSpec::symbols(n, Some(metric.clone()), delta.clone(), k_fin, Some(s_fin))?;
    let mut out = Vec::new();
    for v in kernel {
        let mut op = OperatorElement::zero(n);
        for (c, b) in v.iter().zip(&basis) {
            op = op.add(&b.realized.scale(c));
        }
        if is_invariant(&op, &algebra, &source, &target)? {
            out.push((v, op));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorField;

    #[test]
    fn affine_basis_pure_divergence_for_harmonic_source() {
        let metric = Metric::euclidean(4);
        for k in 1..=4usize {
            for d in 1..=k {
                let basis = affine_basis(k, 0, k - d, 0, &metric).unwrap();
                assert_eq!(basis.len(), 1, "k={k} d={d}");
                assert_eq!(basis[0].d, d);
                assert_eq!(basis[0].g, 0);
                assert_eq!(basis[0].ell, 0);
            }
        }
    }

    #[test]
    fn affine_basis_single_gradient_for_depth_drop() {
        let metric = Metric::euclidean(4);
        let basis = affine_basis(2, 1, 1, 0, &metric).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!((basis[0].g, basis[0].ell, basis[0].d), (1, 0, 0));
        assert_eq!(basis[0].label(), "G0 T");
    }

    #[test]
    fn affine_basis_drops_vanishing_monomials() {
        // (3,1) -> (0,0): G0 D0^2 T dies on degree-1 harmonics, L0 D0 T
        // survives.
        let metric = Metric::euclidean(4);
        let basis = affine_basis(3, 1, 0, 0, &metric).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!((basis[0].g, basis[0].ell, basis[0].d), (0, 1, 1));
    }

    #[test]
    fn unreachable_target_gives_empty_basis() {
        let metric = Metric::euclidean(3);
        assert!(affine_basis(2, 0, 3, 0, &metric).unwrap().is_empty());
        assert!(affine_basis(2, 1, 2, 0, &metric).unwrap().is_empty()
            == false);
        // raising trace depth is unreachable
        assert!(affine_basis(2, 0, 2, 1, &metric).unwrap().is_empty());
    }

    #[test]
    fn dim_e_bookkeeping_matches() {
        // dim of the (d,0) and (0,g) level bases is 1.
        let metric = Metric::euclidean(4);
        for (k, s) in [(4usize, 2usize), (3, 1), (4, 1)] {
            for d in 1..=(k - 2 * s) {
                let b = affine_basis(k, s, k - d, s, &metric).unwrap();
                assert_eq!(b.len(), 1, "(d,0) level at k={k} s={s} d={d}");
            }
            for g in 1..=s {
                let b = affine_basis(k, s, k - g, s - g, &metric).unwrap();
                assert_eq!(b.len(), 1, "(0,g) level at k={k} s={s} g={g}");
            }
        }
    }

    #[test]
    fn projective_critical_values_example() {
        let cv = projective_critical_values(3, 2);
        let CriticalValues::Projective { values } = cv else {
            panic!()
        };
        let deltas: Vec<Rational> = values.iter().map(|v| v.delta.clone()).collect();
        assert_eq!(deltas, vec![rat(7, 3), rat_int(2), rat(5, 3)]);
    }

    #[test]
    fn conformal_critical_values_examples() {
        let cv = conformal_critical_values(2, 1, 4).unwrap();
        let CriticalValues::Conformal {
            d_family,
            g_family,
            l_family,
        } = cv
        else {
            panic!()
        };
        assert!(d_family.is_empty());
        assert_eq!(g_family, vec![FamilyCriticalValue { exponent: 1, delta: rat(1, 2) }]);
        assert_eq!(l_family, vec![FamilyCriticalValue { exponent: 1, delta: rat(3, 4) }]);

        let cv = conformal_critical_values(3, 0, 4).unwrap();
        let CriticalValues::Conformal { d_family, .. } = cv else {
            panic!()
        };
        let deltas: Vec<Rational> = d_family.iter().map(|v| v.delta.clone()).collect();
        assert_eq!(deltas, vec![rat_int(2), rat(7, 4), rat(3, 2)]);

        let cv = conformal_critical_values(0, 0, 4).unwrap();
        assert!(cv.all_values().is_empty());
    }

    #[test]
    fn divergence_power_invariance_condition() {
        // D^d invariant on (k,0) iff delta = 1 + (2k-d-1)/n.
        let metric = Metric::euclidean(3);
        let n = 3;
        let algebra = AlgebraSpec::conformal(metric.clone());
        let k = 2;
        let d = 1;
        let crit = rat_int(1) + rat(2 * k as i64 - d - 1, n as i64);
        let op = divergence_op(n);
        let source = |delta: &Rational| {
            WeightedModuleSpec::symbols(n, Some(metric.clone()), delta.clone(), k, Some(0)).unwrap()
        };
        let target = |delta: &Rational| {
            WeightedModuleSpec::symbols(n, Some(metric.clone()), delta.clone(), k - 1, Some(0))
                .unwrap()
        };
        assert!(is_invariant(&op, &algebra, &source(&crit), &target(&crit)).unwrap());
        let off = &crit + rat(1, 7);
        assert!(!is_invariant(&op, &algebra, &source(&off), &target(&off)).unwrap());
    }

    #[test]
    fn projective_divergence_power_condition() {
        // D^l projectively invariant on degree-k symbols iff
        // delta = 1 + (2k-l-1)/(n+1).
        let n = 2;
        let algebra = AlgebraSpec::projective(n);
        let k = 2;
        let l = 1;
        let crit = rat_int(1) + rat(2 * k as i64 - l - 1, n as i64 + 1);
        let op = divergence_op(n);
        let source = |delta: &Rational| {
            WeightedModuleSpec::symbols(n, None, delta.clone(), k, None).unwrap()
        };
        let target = |delta: &Rational| {
            WeightedModuleSpec::symbols(n, None, delta.clone(), k - 1, None).unwrap()
        };
        assert!(is_invariant(&op, &algebra, &source(&crit), &target(&crit)).unwrap());
        let off = &crit + rat(3, 11);
        assert!(!is_invariant(&op, &algebra, &source(&off), &target(&off)).unwrap());
    }

    #[test]
    fn l_family_first_order_coefficient() {
        // a_1 = -4/(n + 2k - 2): for n = 4, k = 2 the solved value is -1/2.
        let metric = Metric::euclidean(4);
        let report = construct_l_family(1, 2, &metric).unwrap();
        assert!(report.verified);
        assert_eq!(report.coefficients, vec![rat(-1, 2)]);
        let report = construct_l_family(1, 3, &metric).unwrap();
        assert_eq!(report.coefficients, vec![rat(-2, 5)]);
    }

    #[test]
    fn l_family_degenerate_degree_zero() {
        // On degree-0 harmonics the divergence terms die and the operator
        // reduces to the Laplacian power.
        let metric = Metric::euclidean(4);
        let report = construct_l_family(1, 0, &metric).unwrap();
        assert!(report.coefficients.is_empty());
        assert_eq!(
            report.operator,
            named_operator(NamedOperator::Laplacian, &metric)
        );
    }

    #[test]
    fn classify_matches_table_rows() {
        let metric = Metric::euclidean(4);
        let n = 4;
        // (3,1) at delta = (n+2)/n: the R D T operator.
        let delta = rat(n + 2, n);
        let reports = classify_invariants(3, 1, 2, 1, &delta, &delta, &metric).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].family, InvariantFamily::DPower);
        assert_eq!(reports[0].label(), "R D T");
        // (2,1) at delta = (n+2)/(2n): the Laplacian family member.
        let delta = rat(n + 2, 2 * n);
        let reports = classify_invariants(2, 1, 0, 0, &delta, &delta, &metric).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].family, InvariantFamily::LFamily);
        assert_eq!(reports[0].label(), "L0 T");
        // Generic shift: nothing.
        let delta = rat(13, 13 * 4 + 1);
        let reports = classify_invariants(2, 1, 1, 0, &delta, &delta, &metric).unwrap();
        assert!(reports.is_empty());
    }

    #[test]
    fn density_laplacian_invariance() {
        // N(R^t) invariant from weight (n-2t)/(2n) densities iff at that
        // weight, t <= 2.
        for n in [3usize, 4] {
            let metric = Metric::euclidean(n);
            let algebra = AlgebraSpec::conformal(metric.clone());
            for t in 1..=2usize {
                let lam = rat(n as i64 - 2 * t as i64, 2 * n as i64);
                let mu = &lam + rat(2 * t as i64, n as i64);
                let op = crate::geometry::normal_order(
                    &crate::geometry::metric_symbol(&metric).pow(t),
                );
                let src = WeightedModuleSpec::density(n, lam.clone());
                let tgt = WeightedModuleSpec::density(n, mu.clone());
                assert!(is_invariant(&op, &algebra, &src, &tgt).unwrap());
                let src_off = WeightedModuleSpec::density(n, &lam + rat(1, 7));
                let tgt_off = WeightedModuleSpec::density(n, &mu + rat(1, 7));
                assert!(!is_invariant(&op, &algebra, &src_off, &tgt_off).unwrap());
            }
        }
    }

    #[test]
    fn invariant_combinations_dimension() {
        let metric = Metric::euclidean(4);
        // At the (2,1) gradient-family critical value the invariance system
        // has a one-dimensional kernel; at a generic value it is trivial.
        let crit = rat(2, 4);
        let found = invariant_combinations(2, 1, 1, 0, &crit, &metric).unwrap();
        assert_eq!(found.len(), 1);
        let generic = rat(5, 17);
        let found = invariant_combinations(2, 1, 1, 0, &generic, &metric).unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn rotation_generators_preserve_invariance_of_euler() {
        // The momentum Euler operator commutes with every conformal symbol
        // action (same shift), on any fiber.
        let metric = Metric::new(2, 1).unwrap();
        let algebra = AlgebraSpec::conformal(metric.clone());
        let n = 3;
        let e = named_operator(NamedOperator::Euler, &metric);
        let delta = rat(4, 9);
        let src = WeightedModuleSpec::symbols(n, Some(metric.clone()), delta.clone(), 2, Some(0))
            .unwrap();
        assert!(is_invariant(&e, &algebra, &src, &src).unwrap());
        let _ = VectorField::translation(n, 0);
    }
}
