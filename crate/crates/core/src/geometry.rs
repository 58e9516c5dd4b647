//! The geometric layer: flat metrics, polynomial vector fields, the
//! projective and conformal Lie algebras with their gradations, the weight
//! actions on densities and symbols, normal ordering, and the adjoint action
//! on operators pulled back to symbols.
//!
//! The adjoint action is computed from first principles in the operator
//! algebra (left/right multiplication through the normal ordering), never
//! from the closed-form deficit formulas; those serve as oracles in tests.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{rat, rat_int, Rational};
use crate::weyl::{unit_exp, zero_exp, OpMonomial, OperatorElement, SymbolPoly};

/// Flat diagonal metric of signature (p, q): entries +1 first, then -1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metric {
    p_plus: usize,
    q_minus: usize,
}

impl Metric {
    pub fn new(p_plus: usize, q_minus: usize) -> Result<Self> {
        if p_plus + q_minus == 0 {
            return Err(Error::ContractViolation(
                "metric needs at least one dimension".into(),
            ));
        }
        Ok(Metric { p_plus, q_minus })
    }

    pub fn euclidean(n: usize) -> Self {
        Metric {
            p_plus: n,
            q_minus: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.p_plus + self.q_minus
    }

    pub fn signature(&self) -> (usize, usize) {
        (self.p_plus, self.q_minus)
    }

    /// Diagonal entry, +1 or -1. Equals its own inverse entry.
    pub fn eta(&self, i: usize) -> i64 {
        if i < self.p_plus {
            1
        } else {
            -1
        }
    }

    /// Validate a diagonal supplied from outside (must be +1s then -1s).
    pub fn from_diagonal(diag: &[i64]) -> Result<Self> {
        let p = diag.iter().take_while(|&&e| e == 1).count();
        if diag[p..].iter().any(|&e| e != -1) {
            return Err(Error::ContractViolation(
                "metric diagonal must be +1 entries followed by -1 entries".into(),
            ));
        }
        Metric::new(p, diag.len() - p)
    }
}

/// Polynomial vector field: n components, each constant in p.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    n: usize,
    components: Vec<SymbolPoly>,
}

impl VectorField {
    pub fn new(components: Vec<SymbolPoly>) -> Result<Self> {
        let n = components.len();
        for c in &components {
            if c.n() != n {
                return Err(Error::DimensionMismatch(
                    "component dimension differs from field dimension".into(),
                ));
            }
            if c.terms().any(|((_, pe), _)| pe.iter().any(|&e| e > 0)) {
                return Err(Error::ContractViolation(
                    "vector field components must have momentum degree zero".into(),
                ));
            }
        }
        Ok(VectorField { n, components })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[SymbolPoly] {
        &self.components
    }

    /// Translation generator d/dx^i.
    pub fn translation(n: usize, i: usize) -> Self {
        let mut components = vec![SymbolPoly::zero(n); n];
        components[i] = SymbolPoly::one(n);
        VectorField { n, components }
    }

    /// Linear generator x^i d/dx^j.
    pub fn linear(n: usize, i: usize, j: usize) -> Self {
        let mut components = vec![SymbolPoly::zero(n); n];
        components[j] = SymbolPoly::x_var(n, i);
        VectorField { n, components }
    }

    /// The dilation x^i d/dx^i (summed).
    pub fn dilation(n: usize) -> Self {
        let components = (0..n).map(|i| SymbolPoly::x_var(n, i)).collect();
        VectorField { n, components }
    }

    /// Rotation/boost x_i d/dx^j - x_j d/dx^i with indices lowered by eta.
    pub fn rotation(metric: &Metric, i: usize, j: usize) -> Self {
        let n = metric.n();
        let mut components = vec![SymbolPoly::zero(n); n];
        components[j] = SymbolPoly::x_var(n, i).scale(&rat_int(metric.eta(i)));
        components[i] = SymbolPoly::x_var(n, j).scale(&rat_int(-metric.eta(j)));
        VectorField { n, components }
    }

    /// Projective inversion: x^i x^j d/dx^j.
    pub fn projective_inversion(n: usize, i: usize) -> Self {
        let xi = SymbolPoly::x_var(n, i);
        let components = (0..n).map(|b| xi.mul(&SymbolPoly::x_var(n, b))).collect();
        VectorField { n, components }
    }

    /// Conformal inversion: x_j x^j d/dx^i - 2 x_i x^j d/dx^j.
    pub fn conformal_inversion(metric: &Metric, i: usize) -> Self {
        let n = metric.n();
        let mut norm = SymbolPoly::zero(n);
        for j in 0..n {
            let xj = SymbolPoly::x_var(n, j);
            norm = norm.add(&xj.mul(&xj).scale(&rat_int(metric.eta(j))));
        }
        let xi_low = SymbolPoly::x_var(n, i).scale(&rat_int(metric.eta(i)));
        let mut components = Vec::with_capacity(n);
        for b in 0..n {
            let mut comp = SymbolPoly::zero(n);
            if b == i {
                comp = comp.add(&norm);
            }
            comp = comp.sub(&xi_low.mul(&SymbolPoly::x_var(n, b)).scale(&rat_int(2)));
            components.push(comp);
        }
        VectorField { n, components }
    }

    /// Lie bracket [X, Y]^b = X^a d_a Y^b - Y^a d_a X^b.
    pub fn bracket(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "vector field dimension mismatch");
        let n = self.n;
        let components = (0..n)
            .map(|b| {
                let mut acc = SymbolPoly::zero(n);
                for a in 0..n {
                    acc = acc.add(&self.components[a].mul(&other.components[b].dx(a)));
                    acc = acc.sub(&other.components[a].mul(&self.components[b].dx(a)));
                }
                acc
            })
            .collect();
        VectorField { n, components }
    }

    /// Divergence with respect to the flat coordinates.
    pub fn divergence(&self) -> SymbolPoly {
        let mut acc = SymbolPoly::zero(self.n);
        for (i, c) in self.components.iter().enumerate() {
            acc = acc.add(&c.dx(i));
        }
        acc
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        VectorField {
            n: self.n,
            components: self.components.iter().map(|c| c.scale(factor)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        VectorField {
            n: self.n,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgebraKind {
    Projective,
    Conformal,
}

/// A graded finite-dimensional algebra of polynomial vector fields:
/// translations, linear part, inversions. Closure of the bracket with
/// respect to the gradation is checked at construction.
#[derive(Clone, Debug)]
pub struct AlgebraSpec {
    pub kind: AlgebraKind,
    pub metric: Option<Metric>,
    g_minus1: Vec<VectorField>,
    g_zero: Vec<VectorField>,
    g_one: Vec<VectorField>,
}

impl AlgebraSpec {
    /// sl(n+1) as projective vector fields on R^n.
    pub fn projective(n: usize) -> Self {
        let g_minus1 = (0..n).map(|i| VectorField::translation(n, i)).collect();
        let g_zero = (0..n)
            .flat_map(|i| (0..n).map(move |j| VectorField::linear(n, i, j)))
            .collect();
        let g_one = (0..n)
            .map(|i| VectorField::projective_inversion(n, i))
            .collect();
        let spec = AlgebraSpec {
            kind: AlgebraKind::Projective,
            metric: None,
            g_minus1,
            g_zero,
            g_one,
        };
        spec.assert_closure();
        spec
    }

    /// o(p+1, q+1) as conformal Killing fields of the flat metric.
    pub fn conformal(metric: Metric) -> Self {
        let n = metric.n();
        let g_minus1 = (0..n).map(|i| VectorField::translation(n, i)).collect();
        let mut g_zero: Vec<VectorField> = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                g_zero.push(VectorField::rotation(&metric, i, j));
            }
        }
        g_zero.push(VectorField::dilation(n));
        let g_one = (0..n)
            .map(|i| VectorField::conformal_inversion(&metric, i))
            .collect();
        let spec = AlgebraSpec {
            kind: AlgebraKind::Conformal,
            metric: Some(metric),
            g_minus1,
            g_zero,
            g_one,
        };
        spec.assert_closure();
        spec
    }

    pub fn n(&self) -> usize {
        self.g_minus1.len()
    }

    pub fn translations(&self) -> &[VectorField] {
        &self.g_minus1
    }

    pub fn linear_part(&self) -> &[VectorField] {
        &self.g_zero
    }

    pub fn inversions(&self) -> &[VectorField] {
        &self.g_one
    }

    pub fn first_inversion(&self) -> &VectorField {
        &self.g_one[0]
    }

    /// All generators, translations first.
    pub fn generators(&self) -> impl Iterator<Item = &VectorField> {
        self.g_minus1
            .iter()
            .chain(self.g_zero.iter())
            .chain(self.g_one.iter())
    }

    /// Affine generators only (translations and linear part).
    pub fn affine_generators(&self) -> impl Iterator<Item = &VectorField> {
        self.g_minus1.iter().chain(self.g_zero.iter())
    }

    fn assert_closure(&self) {
        let grades: [(&[VectorField], i32); 3] = [
            (&self.g_minus1, -1),
            (&self.g_zero, 0),
            (&self.g_one, 1),
        ];
        for (fields_a, grade_a) in grades.iter() {
            for (fields_b, grade_b) in grades.iter() {
                let target = grade_a + grade_b;
                for a in fields_a.iter() {
                    for b in fields_b.iter() {
                        let br = a.bracket(b);
                        let ok = match target {
                            -1 => in_span(&br, &self.g_minus1),
                            0 => in_span(&br, &self.g_zero),
                            1 => in_span(&br, &self.g_one),
                            _ => br.is_zero(),
                        };
                        assert!(
                            ok,
                            "bracket left the gradation: grades {grade_a},{grade_b}"
                        );
                    }
                }
            }
        }
    }
}

/// Membership of a vector field in the rational span of a family, by exact
/// linear solve over the monomial coefficients.
fn in_span(x: &VectorField, family: &[VectorField]) -> bool {
    if x.is_zero() {
        return true;
    }
    use crate::linalg::{solve_linear, RationalMatrix};
    use std::collections::BTreeSet;
    let n = x.n();
    let mut keys: BTreeSet<(usize, Vec<u32>)> = BTreeSet::new();
    let collect = |f: &VectorField, keys: &mut BTreeSet<(usize, Vec<u32>)>| {
        for (c, comp) in f.components().iter().enumerate() {
            for ((xe, _), _) in comp.terms() {
                keys.insert((c, xe.clone()));
            }
        }
    };
    collect(x, &mut keys);
    for f in family {
        collect(f, &mut keys);
    }
    let keys: Vec<_> = keys.into_iter().collect();
    let coeff = |f: &VectorField, key: &(usize, Vec<u32>)| -> Rational {
        f.components()[key.0]
            .terms()
            .find(|((xe, _), _)| xe == &key.1)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rational::zero)
    };
    let rows: Vec<Vec<Rational>> = keys
        .iter()
        .map(|k| family.iter().map(|f| coeff(f, k)).collect())
        .collect();
    let rhs: Vec<Rational> = keys.iter().map(|k| coeff(x, k)).collect();
    let mat = RationalMatrix::from_rows(rows).expect("rectangular by construction");
    let _ = n;
    solve_linear(&mat, &rhs)
        .map(|r| r.particular.is_some())
        .unwrap_or(false)
}

/// Multiplication operator by a polynomial in x (and possibly p).
pub fn mult_op(poly: &SymbolPoly) -> OperatorElement {
    let n = poly.n();
    OperatorElement::from_terms(
        n,
        poly.terms().map(|((xe, pe), c)| {
            (
                OpMonomial {
                    x_mul: xe.clone(),
                    p_mul: pe.clone(),
                    dx: zero_exp(n),
                    dp: zero_exp(n),
                },
                c.clone(),
            )
        }),
    )
}

/// Action on lambda-densities: X + lambda Div(X), as an operator with no
/// momentum content.
pub fn density_action(x: &VectorField, lambda: &Rational) -> OperatorElement {
    let n = x.n();
    let mut op = OperatorElement::zero(n);
    for (i, comp) in x.components().iter().enumerate() {
        for ((xe, _), c) in comp.terms() {
            op = op.add(&OperatorElement::from_term(
                n,
                OpMonomial {
                    x_mul: xe.clone(),
                    p_mul: zero_exp(n),
                    dx: unit_exp(n, i),
                    dp: zero_exp(n),
                },
                c.clone(),
            ));
        }
    }
    op.add(&mult_op(&x.divergence()).scale(lambda))
}

/// Action on weight-delta symbols:
/// X^i d_i - p_j (d_i X^j) d/dp_i + delta Div(X).
pub fn symbol_action(x: &VectorField, delta: &Rational) -> OperatorElement {
    let n = x.n();
    let mut op = OperatorElement::zero(n);
    for (j, comp) in x.components().iter().enumerate() {
        for ((xe, _), c) in comp.terms() {
            op = op.add(&OperatorElement::from_term(
                n,
                OpMonomial {
                    x_mul: xe.clone(),
                    p_mul: zero_exp(n),
                    dx: unit_exp(n, j),
                    dp: zero_exp(n),
                },
                c.clone(),
            ));
        }
        for i in 0..n {
            let deriv = comp.dx(i);
            for ((xe, _), c) in deriv.terms() {
                op = op.add(&OperatorElement::from_term(
                    n,
                    OpMonomial {
                        x_mul: xe.clone(),
                        p_mul: unit_exp(n, j),
                        dx: zero_exp(n),
                        dp: unit_exp(n, i),
                    },
                    -c.clone(),
                ));
            }
        }
    }
    op.add(&mult_op(&x.divergence()).scale(delta))
}

/// Normal ordering: relabel momentum exponents as x-derivative exponents.
pub fn normal_order(p: &SymbolPoly) -> OperatorElement {
    let n = p.n();
    OperatorElement::from_terms(
        n,
        p.terms().map(|((xe, pe), c)| {
            (
                OpMonomial {
                    x_mul: xe.clone(),
                    p_mul: zero_exp(n),
                    dx: pe.clone(),
                    dp: zero_exp(n),
                },
                c.clone(),
            )
        }),
    )
}

/// Inverse of normal ordering. Errors when the operator has momentum
/// multiplications or momentum derivatives.
pub fn normal_order_inverse(a: &OperatorElement) -> Result<SymbolPoly> {
    let n = a.n();
    let mut out = SymbolPoly::zero(n);
    for (m, c) in a.terms() {
        if m.p_mul.iter().any(|&e| e > 0) || m.dp.iter().any(|&e| e > 0) {
            return Err(Error::ContractViolation(
                "normal-order inverse requires an operator free of momentum content".into(),
            ));
        }
        out.add_term(m.x_mul.clone(), m.dx.clone(), c.clone());
    }
    Ok(out)
}

/// Left multiplication by a differential operator (pure x / d/dx content),
/// realized as an element of the operator algebra acting on symbols through
/// the normal ordering: left-composing with x^i is multiplication by x^i,
/// left-composing with d_i is (p_i + d/dx^i).
pub fn left_mult_op(a: &OperatorElement) -> Result<OperatorElement> {
    let n = a.n();
    let mut out = OperatorElement::zero(n);
    for (m, c) in a.terms() {
        if m.p_mul.iter().any(|&e| e > 0) || m.dp.iter().any(|&e| e > 0) {
            return Err(Error::ContractViolation(
                "left multiplication needs a density-type operator (x and d/dx only)".into(),
            ));
        }
        let mut factor = OperatorElement::from_term(
            n,
            OpMonomial {
                x_mul: m.x_mul.clone(),
                p_mul: zero_exp(n),
                dx: zero_exp(n),
                dp: zero_exp(n),
            },
            c.clone(),
        );
        for i in 0..n {
            let gen = OperatorElement::p_mult(n, i).add(&OperatorElement::dx(n, i));
            for _ in 0..m.dx[i] {
                factor = factor.mul(&gen);
            }
        }
        out = out.add(&factor);
    }
    Ok(out)
}

/// Right multiplication: right-composing with d_i is multiplication by p_i,
/// right-composing with x^i is (x^i + d/dp_i).
pub fn right_mult_op(a: &OperatorElement) -> Result<OperatorElement> {
    let n = a.n();
    let mut out = OperatorElement::zero(n);
    for (m, c) in a.terms() {
        if m.p_mul.iter().any(|&e| e > 0) || m.dp.iter().any(|&e| e > 0) {
            return Err(Error::ContractViolation(
                "right multiplication needs a density-type operator (x and d/dx only)".into(),
            ));
        }
        let mut factor = OperatorElement::from_term(
            n,
            OpMonomial {
                x_mul: zero_exp(n),
                p_mul: m.dx.clone(),
                dx: zero_exp(n),
                dp: zero_exp(n),
            },
            c.clone(),
        );
        for i in 0..n {
            let gen = OperatorElement::x_mult(n, i).add(&OperatorElement::dp(n, i));
            for _ in 0..m.x_mul[i] {
                factor = factor.mul(&gen);
            }
        }
        out = out.add(&factor);
    }
    Ok(out)
}

/// The adjoint action of a vector field on operators, pulled back to symbols
/// through the normal ordering, as one element of the operator algebra:
/// `W_X(S) = N^{-1}( l^mu_X N(S) - N(S) l^lambda_X )`.
pub fn adjoint_action_op(
    x: &VectorField,
    lambda: &Rational,
    mu: &Rational,
) -> OperatorElement {
    let left = left_mult_op(&density_action(x, mu)).expect("density action is x-only");
    let right = right_mult_op(&density_action(x, lambda)).expect("density action is x-only");
    left.sub(&right)
}

/// Adjoint action applied to a symbol.
pub fn adjoint_action(
    x: &VectorField,
    lambda: &Rational,
    mu: &Rational,
    p: &SymbolPoly,
) -> SymbolPoly {
    adjoint_action_op(x, lambda, mu).apply(p)
}

/// Reference implementation of the adjoint action by explicit composition in
/// the operator algebra; used to cross-check [`adjoint_action`].
pub fn adjoint_action_direct(
    x: &VectorField,
    lambda: &Rational,
    mu: &Rational,
    p: &SymbolPoly,
) -> Result<SymbolPoly> {
    let a = normal_order(p);
    let composed = density_action(x, mu)
        .mul(&a)
        .sub(&a.mul(&density_action(x, lambda)));
    normal_order_inverse(&composed)
}

/// The six metric-built generators of isometry-invariant operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedOperator {
    /// R: multiplication by the metric symbol eta^{ij} p_i p_j.
    MetricSquare,
    /// E: the momentum Euler operator p_i d/dp_i.
    Euler,
    /// T: the trace eta_{ij} d/dp_i d/dp_j.
    Trace,
    /// G: the gradient eta^{ij} p_i d_j.
    Gradient,
    /// D: the divergence d_i d/dp_i.
    Divergence,
    /// L: the Laplacian eta^{ij} d_i d_j.
    Laplacian,
}

impl NamedOperator {
    /// Weight shift n(delta' - delta) attached to the operator.
    pub fn weight_shift_numerator(self) -> i64 {
        match self {
            NamedOperator::Trace => -2,
            NamedOperator::Euler | NamedOperator::Divergence => 0,
            NamedOperator::MetricSquare | NamedOperator::Gradient | NamedOperator::Laplacian => 2,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "R" => Ok(NamedOperator::MetricSquare),
            "E" => Ok(NamedOperator::Euler),
            "T" => Ok(NamedOperator::Trace),
            "G" => Ok(NamedOperator::Gradient),
            "D" => Ok(NamedOperator::Divergence),
            "L" => Ok(NamedOperator::Laplacian),
            other => Err(Error::ContractViolation(format!(
                "unknown operator name {other:?}"
            ))),
        }
    }
}

/// Construct a named operator for the given metric.
pub fn named_operator(which: NamedOperator, metric: &Metric) -> OperatorElement {
    let n = metric.n();
    let mut out = OperatorElement::zero(n);
    match which {
        NamedOperator::MetricSquare => {
            for i in 0..n {
                let pi = OperatorElement::p_mult(n, i);
                out = out.add(&pi.mul(&pi).scale(&rat_int(metric.eta(i))));
            }
        }
        NamedOperator::Euler => {
            for i in 0..n {
                out = out.add(&OperatorElement::p_mult(n, i).mul(&OperatorElement::dp(n, i)));
            }
        }
        NamedOperator::Trace => {
            for i in 0..n {
                let di = OperatorElement::dp(n, i);
                out = out.add(&di.mul(&di).scale(&rat_int(metric.eta(i))));
            }
        }
        NamedOperator::Gradient => {
            for i in 0..n {
                out = out.add(
                    &OperatorElement::p_mult(n, i)
                        .mul(&OperatorElement::dx(n, i))
                        .scale(&rat_int(metric.eta(i))),
                );
            }
        }
        NamedOperator::Divergence => {
            for i in 0..n {
                out = out.add(&OperatorElement::dx(n, i).mul(&OperatorElement::dp(n, i)));
            }
        }
        NamedOperator::Laplacian => {
            for i in 0..n {
                let di = OperatorElement::dx(n, i);
                out = out.add(&di.mul(&di).scale(&rat_int(metric.eta(i))));
            }
        }
    }
    out
}

/// The divergence operator D = d_i d/dp_i; independent of the metric.
pub fn divergence_op(n: usize) -> OperatorElement {
    let mut out = OperatorElement::zero(n);
    for i in 0..n {
        out = out.add(&OperatorElement::dx(n, i).mul(&OperatorElement::dp(n, i)));
    }
    out
}

/// The metric symbol R as a polynomial.
pub fn metric_symbol(metric: &Metric) -> SymbolPoly {
    let n = metric.n();
    let mut out = SymbolPoly::zero(n);
    for i in 0..n {
        let pi = SymbolPoly::p_var(n, i);
        out = out.add(&pi.mul(&pi).scale(&rat_int(metric.eta(i))));
    }
    out
}

/// d/dp with the index lowered by eta: eta_{ij} d/dp_j (diagonal metric).
pub fn dp_lowered(metric: &Metric, i: usize) -> OperatorElement {
    OperatorElement::dp(metric.n(), i).scale(&rat_int(metric.eta(i)))
}

/// Which weighted module an operator maps between.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModuleRole {
    /// Densities of the given weight.
    Density { lambda: Rational },
    /// Symbols of the given shift; `s` restricts to one trace depth when
    /// present, otherwise the whole degree-k component is meant.
    Symbols {
        delta: Rational,
        k: usize,
        s: Option<usize>,
    },
    /// Differential operators between density modules, filtered by order.
    DiffOps {
        lambda: Rational,
        mu: Rational,
        order: usize,
    },
}

/// The data identifying a weighted module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedModuleSpec {
    pub n: usize,
    pub metric: Option<Metric>,
    pub role: ModuleRole,
}

impl WeightedModuleSpec {
    pub fn density(n: usize, lambda: Rational) -> Self {
        WeightedModuleSpec {
            n,
            metric: None,
            role: ModuleRole::Density { lambda },
        }
    }

    pub fn symbols(
        n: usize,
        metric: Option<Metric>,
        delta: Rational,
        k: usize,
        s: Option<usize>,
    ) -> Result<Self> {
        if let Some(s) = s {
            if 2 * s > k {
                return Err(Error::ContractViolation(format!(
                    "trace depth {s} exceeds half the degree {k}"
                )));
            }
        }
        Ok(WeightedModuleSpec {
            n,
            metric,
            role: ModuleRole::Symbols { delta, k, s },
        })
    }
}

/// Projective inversion deficit scalar: l_k(lambda) = -(k + lambda (n+1)).
pub fn projective_ell(k: i64, lambda: &Rational, n: usize) -> Rational {
    -(rat_int(k) + lambda * rat_int(n as i64 + 1))
}

/// Projective recursion denominator:
/// d^k_m(delta) = m(-2k + m + 1 + (delta - 1)(n+1)).
pub fn projective_denominator(k: i64, m: i64, delta: &Rational, n: usize) -> Rational {
    rat_int(m)
        * (rat_int(-2 * k + m + 1) + (delta - rat_int(1)) * rat_int(n as i64 + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rat;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn divergence_of_dilation_is_n() {
        for n in 1..5 {
            let div = VectorField::dilation(n).divergence();
            assert_eq!(div, SymbolPoly::constant(n, rat_int(n as i64)));
        }
    }

    #[test]
    fn divergence_of_conformal_inversion() {
        // Div(X_i) = -2n x_i
        for (p, q) in [(2usize, 0usize), (1, 1), (3, 0), (2, 1)] {
            let metric = Metric::new(p, q).unwrap();
            let n = metric.n();
            for i in 0..n {
                let x = VectorField::conformal_inversion(&metric, i);
                let expected = SymbolPoly::x_var(n, i)
                    .scale(&rat_int(-2 * (n as i64) * metric.eta(i)));
                assert_eq!(x.divergence(), expected);
            }
        }
    }

    #[test]
    fn density_action_examples() {
        let n = 2;
        // Translation: divergence-free, any weight.
        let a = density_action(&VectorField::translation(n, 0), &rat(5, 7));
        assert_eq!(a, OperatorElement::dx(n, 0));
        // Dilation: sum x^i d_i + lambda n.
        let lam = rat(1, 3);
        let a = density_action(&VectorField::dilation(n), &lam);
        let mut expected = OperatorElement::zero(n);
        for i in 0..n {
            expected = expected.add(&OperatorElement::x_mult(n, i).mul(&OperatorElement::dx(n, i)));
        }
        expected = expected.add(&OperatorElement::identity(n).scale(&(lam * rat_int(2))));
        assert_eq!(a, expected);
    }

    #[test]
    fn symbol_action_dilation_on_p() {
        // L^delta_dilation p_1 = (delta n - 1) p_1.
        let n = 3;
        let delta = rat(2, 5);
        let op = symbol_action(&VectorField::dilation(n), &delta);
        let p1 = SymbolPoly::p_var(n, 0);
        let expected = p1.scale(&(&delta * rat_int(n as i64) - rat_int(1)));
        assert_eq!(op.apply(&p1), expected);
    }

    #[test]
    fn symbol_action_translation() {
        let n = 2;
        let op = symbol_action(&VectorField::translation(n, 0), &rat(1, 2));
        let s = SymbolPoly::x_var(n, 0).mul(&SymbolPoly::p_var(n, 1));
        assert_eq!(op.apply(&s), SymbolPoly::p_var(n, 1));
    }

    #[test]
    fn normal_order_round_trip() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.gen_range(1..4);
            let mut s = SymbolPoly::zero(n);
            for _ in 0..rng.gen_range(1..5) {
                let xe = (0..n).map(|_| rng.gen_range(0..3)).collect::<Vec<u32>>();
                let pe = (0..n).map(|_| rng.gen_range(0..3)).collect::<Vec<u32>>();
                s.add_term(xe, pe, rat(rng.gen_range(-5..6), rng.gen_range(1..4)));
            }
            assert_eq!(normal_order_inverse(&normal_order(&s)).unwrap(), s);
        }
    }

    #[test]
    fn normal_order_example() {
        // x^1 p_1 p_2 maps to x^1 d_1 d_2.
        let n = 2;
        let s = SymbolPoly::x_var(n, 0)
            .mul(&SymbolPoly::p_var(n, 0))
            .mul(&SymbolPoly::p_var(n, 1));
        let op = normal_order(&s);
        let expected = OperatorElement::x_mult(n, 0)
            .mul(&OperatorElement::dx(n, 0))
            .mul(&OperatorElement::dx(n, 1));
        assert_eq!(op, expected);
        // Constant 1 maps to the identity operator.
        assert_eq!(normal_order(&SymbolPoly::one(n)), OperatorElement::identity(n));
    }

    #[test]
    fn normal_order_inverse_rejects_momentum_content() {
        let n = 2;
        assert!(normal_order_inverse(&OperatorElement::p_mult(n, 0)).is_err());
        assert!(normal_order_inverse(&OperatorElement::dp(n, 0)).is_err());
    }

    #[test]
    fn adjoint_matches_direct_composition() {
        let mut rng = StdRng::seed_from_u64(9);
        let metric = Metric::new(2, 1).unwrap();
        let n = metric.n();
        let algebra = AlgebraSpec::conformal(metric);
        let lambda = rat(2, 7);
        let mu = rat(-1, 3);
        for x in algebra.generators() {
            for _ in 0..3 {
                let mut s = SymbolPoly::zero(n);
                for _ in 0..3 {
                    let xe = (0..n).map(|_| rng.gen_range(0..3)).collect::<Vec<u32>>();
                    let pe = (0..n).map(|_| rng.gen_range(0..3)).collect::<Vec<u32>>();
                    s.add_term(xe, pe, rat(rng.gen_range(-4..5), rng.gen_range(1..3)));
                }
                let fast = adjoint_action(x, &lambda, &mu, &s);
                let slow = adjoint_action_direct(x, &lambda, &mu, &s).unwrap();
                assert_eq!(fast, slow);
            }
        }
    }

    #[test]
    fn adjoint_equals_symbol_action_for_affine_fields() {
        let metric = Metric::euclidean(3);
        let algebra = AlgebraSpec::conformal(metric);
        let lambda = rat(1, 4);
        let mu = rat(5, 6);
        let delta = &mu - &lambda;
        for x in algebra.affine_generators() {
            let w = adjoint_action_op(x, &lambda, &mu);
            assert_eq!(w, symbol_action(x, &delta));
        }
        let proj = AlgebraSpec::projective(2);
        for x in proj.affine_generators() {
            let w = adjoint_action_op(x, &lambda, &mu);
            assert_eq!(w, symbol_action(x, &delta));
        }
    }

    #[test]
    fn named_operator_commutators() {
        for (p, q) in [(2usize, 0usize), (1, 1), (3, 0), (2, 1), (4, 0), (3, 1)] {
            let metric = Metric::new(p, q).unwrap();
            let n = metric.n();
            let g = named_operator(NamedOperator::Gradient, &metric);
            let d = named_operator(NamedOperator::Divergence, &metric);
            let t = named_operator(NamedOperator::Trace, &metric);
            let l = named_operator(NamedOperator::Laplacian, &metric);
            // [D, G] = L
            assert_eq!(d.commutator(&g), l);
            // [T, G] = 2D (own normal-form computation, kept as regression)
            assert_eq!(t.commutator(&g), d.scale(&rat_int(2)));
            // [T, D] = 0
            assert!(t.commutator(&d).is_zero());
            // [D, E_x] = D with E_x the position Euler operator
            let mut ex = OperatorElement::zero(n);
            for i in 0..n {
                ex = ex.add(&OperatorElement::x_mult(n, i).mul(&OperatorElement::dx(n, i)));
            }
            assert_eq!(d.commutator(&ex), d);
        }
    }

    #[test]
    fn trace_of_metric_symbol() {
        for (p, q) in [(2usize, 0usize), (1, 1), (4, 0), (3, 1)] {
            let metric = Metric::new(p, q).unwrap();
            let n = metric.n();
            let t = named_operator(NamedOperator::Trace, &metric);
            let r = metric_symbol(&metric);
            assert_eq!(
                t.apply(&r),
                SymbolPoly::constant(n, rat_int(2 * n as i64))
            );
        }
    }

    #[test]
    fn metric_diagonal_validation() {
        assert!(Metric::from_diagonal(&[1, 1, -1]).is_ok());
        assert!(Metric::from_diagonal(&[1, -1, 1]).is_err());
        assert!(Metric::from_diagonal(&[1, 2]).is_err());
    }

    #[test]
    fn weight_shifts() {
        assert_eq!(NamedOperator::Trace.weight_shift_numerator(), -2);
        assert_eq!(NamedOperator::Euler.weight_shift_numerator(), 0);
        assert_eq!(NamedOperator::Divergence.weight_shift_numerator(), 0);
        assert_eq!(NamedOperator::MetricSquare.weight_shift_numerator(), 2);
        assert_eq!(NamedOperator::Gradient.weight_shift_numerator(), 2);
        assert_eq!(NamedOperator::Laplacian.weight_shift_numerator(), 2);
    }

    #[test]
    fn representation_property_exact() {
        // L^delta_[X,Y] == [L^delta_X, L^delta_Y] as normal forms, for all
        // generator pairs of both algebras.
        let delta = rat(3, 7);
        let proj = AlgebraSpec::projective(2);
        let conf = AlgebraSpec::conformal(Metric::new(1, 1).unwrap());
        for algebra in [&proj, &conf] {
            let gens: Vec<&VectorField> = algebra.generators().collect();
            for a in &gens {
                for b in &gens {
                    let lhs = symbol_action(&a.bracket(b), &delta);
                    let rhs = symbol_action(a, &delta).commutator(&symbol_action(b, &delta));
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }
}
