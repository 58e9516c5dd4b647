//! Momentum-space harmonic decomposition of symbols by trace depth.
//!
//! A degree-k symbol splits uniquely as a sum of R^s Q with T Q = 0, where R
//! is the metric symbol and T the trace operator. This module computes that
//! splitting by trace peeling with exact RT-eigenvalue denominators, builds
//! canonical fiber bases, and materializes the trace-corrected operators
//! (the trace-free gradient and friends) on a fixed source degree.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{rat_int, Rational, RowSpace};
use crate::weyl::{monomials_of_degree, zero_exp, OperatorElement, SymbolPoly};
use crate::geometry::{dp_lowered, metric_symbol, named_operator, Metric, NamedOperator};

/// Eigenvalue of RT on symbols of degree k and trace depth s:
/// 2s(n + 2(k - s - 1)).
pub fn rt_eigenvalue(k: usize, s: usize, n: usize) -> Result<Rational> {
    if 2 * s > k {
        return Err(Error::ContractViolation(format!(
            "trace depth {s} exceeds half the degree {k}"
        )));
    }
    let k = k as i64;
    let s = s as i64;
    let n = n as i64;
    Ok(rat_int(2 * s * (n + 2 * (k - s - 1))))
}

/// Dimension of the space of degree-d harmonics in n momentum variables.
pub fn harmonic_dimension(d: usize, n: usize) -> usize {
    fn full(d: usize, n: usize) -> usize {
        // C(d + n - 1, n - 1)
        let mut acc: usize = 1;
        for j in 1..n {
            acc = acc * (d + j) / j;
        }
        acc
    }
    if d < 2 {
        full(d, n)
    } else {
        full(d, n) - full(d - 2, n)
    }
}

/// Decompose a p-homogeneous symbol into trace components: returns the
/// nonzero pairs (s, Q_s) with P = sum R^s Q_s and T Q_s = 0. The
/// decomposition is unique; peeling denominators are products of RT
/// eigenvalues, which never vanish for admissible (k, s).
pub fn project_harmonic(
    p: &SymbolPoly,
    metric: &Metric,
) -> Result<Vec<(usize, SymbolPoly)>> {
    if p.is_zero() {
        return Ok(Vec::new());
    }
    let Some(k) = p.p_degree_homogeneous() else {
        return Err(Error::ContractViolation(
            "harmonic projection needs a p-homogeneous symbol".into(),
        ));
    };
    let k = k as usize;
    let n = metric.n();
    let trace = named_operator(NamedOperator::Trace, metric);
    let r = metric_symbol(metric);
    let mut out = Vec::new();
    let mut work = p.clone();
    for s in (0..=k / 2).rev() {
        // c_s = prod_{i=0..s-1} rho_{k-2i, s-i}
        let mut c = Rational::from_integer(1.into());
        let mut ok = true;
        for i in 0..s {
            let rho = rt_eigenvalue(k - 2 * i, s - i, n)?;
            if rho.is_zero() {
                ok = false;
                break;
            }
            c *= rho;
        }
        if !ok {
            return Err(Error::InternalConsistency(
                "vanishing RT eigenvalue during trace peeling".into(),
            ));
        }
        let mut ts = work.clone();
        for _ in 0..s {
            ts = trace.apply(&ts);
        }
        if ts.is_zero() {
            continue;
        }
        let q = ts.scale(&(Rational::from_integer(1.into()) / c));
        work = work.sub(&r.pow(s).mul(&q));
        out.push((s, q));
    }
    if !work.is_zero() {
        return Err(Error::InternalConsistency(
            "trace peeling left a nonzero remainder".into(),
        ));
    }
    out.sort_by_key(|(s, _)| *s);
    Ok(out)
}

/// The trace-free (depth-0) component of a p-homogeneous symbol.
pub fn harmonic_part(p: &SymbolPoly, metric: &Metric) -> Result<SymbolPoly> {
    Ok(project_harmonic(p, metric)?
        .into_iter()
        .find(|(s, _)| *s == 0)
        .map(|(_, q)| q)
        .unwrap_or_else(|| SymbolPoly::zero(metric.n())))
}

/// A canonical basis of one trace-depth fiber: the elements R^s Q over a
/// deterministic basis of degree-(k-2s) harmonics, constant in x.
#[derive(Clone, Debug)]
pub struct FiberBasis {
    pub k: usize,
    pub s: usize,
    pub metric: Metric,
    pub elements: Vec<SymbolPoly>,
}

impl FiberBasis {
    /// The harmonic factors Q of the elements R^s Q, in matching order.
    pub fn harmonic_factors(&self) -> Result<Vec<SymbolPoly>> {
        let trace = named_operator(NamedOperator::Trace, &self.metric);
        let n = self.metric.n();
        self.elements
            .iter()
            .map(|e| {
                let mut c = Rational::from_integer(1.into());
                for i in 0..self.s {
                    c *= rt_eigenvalue(self.k - 2 * i, self.s - i, n)?;
                }
                let mut q = e.clone();
                for _ in 0..self.s {
                    q = trace.apply(&q);
                }
                Ok(q.scale(&(Rational::from_integer(1.into()) / c)))
            })
            .collect()
    }
}

/// Build the canonical fiber basis of degree k, trace depth s: project each
/// degree-(k-2s) momentum monomial to its harmonic part and keep a maximal
/// independent subset by deterministic pivoting, then multiply by R^s.
pub fn fiber_basis(k: usize, s: usize, metric: &Metric) -> Result<FiberBasis> {
    if 2 * s > k {
        return Err(Error::ContractViolation(format!(
            "trace depth {s} exceeds half the degree {k}"
        )));
    }
    let n = metric.n();
    let d = k - 2 * s;
    let monomials = monomials_of_degree(n, d as u32);
    let coords: Vec<Vec<u32>> = monomials.clone();
    let index_of = |pe: &[u32]| -> usize {
        coords
            .iter()
            .position(|m| m.as_slice() == pe)
            .expect("projection stays in the degree")
    };
    let mut space = RowSpace::new(coords.len());
    let mut harmonics = Vec::new();
    for mono in &monomials {
        let m = SymbolPoly::monomial(
            n,
            zero_exp(n),
            mono.clone(),
            Rational::from_integer(1.into()),
        );
        let h = harmonic_part(&m, metric)?;
        if h.is_zero() {
            continue;
        }
        let mut row = vec![Rational::zero(); coords.len()];
        for ((_, pe), c) in h.terms() {
            row[index_of(pe)] = c.clone();
        }
        if space.insert(row) {
            harmonics.push(h);
        }
    }
    let expected = harmonic_dimension(d, n);
    if harmonics.len() != expected {
        return Err(Error::InternalConsistency(format!(
            "harmonic basis of degree {d} in {n} variables has {} elements, expected {expected}",
            harmonics.len()
        )));
    }
    let r = metric_symbol(metric).pow(s);
    let elements = harmonics.iter().map(|h| r.mul(h)).collect();
    Ok(FiberBasis {
        k,
        s,
        metric: metric.clone(),
        elements,
    })
}

/// One trace-free gradient step on harmonics of the given degree:
/// the corestriction of the gradient G to the kernel of T, realized as
/// G - (2 / rho_{m+1,1}) R D on degree-m harmonic inputs (plain G when the
/// correction has nothing to remove).
pub fn trace_free_gradient_on(metric: &Metric, source_degree: usize) -> Result<OperatorElement> {
    let g = named_operator(NamedOperator::Gradient, metric);
    if source_degree == 0 {
        return Ok(g);
    }
    let n = metric.n();
    let rho = rt_eigenvalue(source_degree + 1, 1, n)?;
    if rho.is_zero() {
        return Err(Error::InternalConsistency(format!(
            "degenerate trace correction at degree {source_degree}, n = {n}"
        )));
    }
    let r = named_operator(NamedOperator::MetricSquare, metric);
    let d = named_operator(NamedOperator::Divergence, metric);
    let corr = r.mul(&d).scale(&(rat_int(2) / rho));
    Ok(g.sub(&corr))
}

/// Iterated trace-free gradient: g steps starting from harmonics of
/// `source_degree`.
pub fn trace_free_gradient_power(
    metric: &Metric,
    source_degree: usize,
    g: usize,
) -> Result<OperatorElement> {
    let mut acc = OperatorElement::identity(metric.n());
    for j in 0..g {
        acc = trace_free_gradient_on(metric, source_degree + j)?.mul(&acc);
    }
    Ok(acc)
}

/// Trace-free part of multiplication by p_i on harmonics of the given
/// degree: p_i - (2 / rho_{m+1,1}) R d/dp^i.
pub fn trace_free_p_mult_on(
    metric: &Metric,
    i: usize,
    source_degree: usize,
) -> Result<OperatorElement> {
    let n = metric.n();
    let p = OperatorElement::p_mult(n, i);
    if source_degree == 0 {
        return Ok(p);
    }
    let rho = rt_eigenvalue(source_degree + 1, 1, n)?;
    if rho.is_zero() {
        return Err(Error::InternalConsistency(format!(
            "degenerate trace correction at degree {source_degree}, n = {n}"
        )));
    }
    let r = named_operator(NamedOperator::MetricSquare, metric);
    let corr = r.mul(&dp_lowered(metric, i)).scale(&(rat_int(2) / rho));
    Ok(p.sub(&corr))
}
