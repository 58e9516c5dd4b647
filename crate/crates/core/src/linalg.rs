//! Exact rational scalars and dense exact linear algebra.
//!
//! Every computation in this crate bottoms out here: arbitrary-precision
//! rationals ([`Rational`]), dense matrices over them, and exact solve /
//! kernel / rank routines. Elimination is fraction-free (Bareiss) over
//! integers after clearing denominators row-wise, which keeps intermediate
//! entries from swelling the way naive rational elimination does. Pivoting
//! is deterministic (first nonzero entry in row-major scan order), so
//! echelon forms, kernel bases and particular solutions are reproducible
//! across runs and platforms.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar. Always stored in lowest terms with positive
/// denominator (guaranteed by the underlying representation).
pub type Rational = num_rational::BigRational;

/// Rational from an integer pair. Panics on zero denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Rational from an integer.
pub fn rat_int(num: i64) -> Rational {
    Rational::from_integer(BigInt::from(num))
}

/// Parse "a/b" or "a" with optional leading minus.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let mk_err = || Error::ContractViolation(format!("cannot parse rational from {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| mk_err())?;
    let den: BigInt = den.parse().map_err(|_| mk_err())?;
    if den.is_zero() {
        return Err(mk_err());
    }
    Ok(Rational::new(num, den))
}

/// Render as "a/b", or "a" when the denominator is one.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Dense row-major matrix of rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            entries: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Rational>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(RationalMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(RationalMatrix {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Rational {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rational) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Result<Vec<Rational>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                let mut acc = Rational::zero();
                for c in 0..self.cols {
                    let e = self.get(r, c);
                    if !e.is_zero() && !v[c].is_zero() {
                        acc += e * &v[c];
                    }
                }
                acc
            })
            .collect())
    }
}

/// Outcome of an exact linear solve. `particular` is absent exactly when the
/// right-hand side is outside the column span; that is a reported fact, not
/// an error.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub particular: Option<Vec<Rational>>,
    pub kernel_basis: Vec<Vec<Rational>>,
}

/// As [`SolveResult`] plus the nonzero right-hand-side values of reduced
/// rows whose coefficient part vanished: a machine-readable witness of
/// inconsistency.
#[derive(Clone, Debug)]
pub struct DetailedSolveResult {
    pub particular: Option<Vec<Rational>>,
    pub kernel_basis: Vec<Vec<Rational>>,
    pub inconsistent_values: Vec<Rational>,
}

struct Echelon {
    mat: Vec<Vec<BigInt>>,
    // (row, col) pairs in elimination order; col < pivot_cols always.
    pivots: Vec<(usize, usize)>,
}

/// Clear denominators row-wise: each row scaled by the (positive) lcm of its
/// denominators. Row scaling preserves the solution set, kernel and rank.
fn to_integer_rows(a: &RationalMatrix, b: Option<&[Rational]>) -> Vec<Vec<BigInt>> {
    let extra = usize::from(b.is_some());
    let mut out = Vec::with_capacity(a.rows);
    for r in 0..a.rows {
        let mut lcm = BigInt::one();
        for c in 0..a.cols {
            lcm = lcm.lcm(a.get(r, c).denom());
        }
        if let Some(bv) = b {
            lcm = lcm.lcm(bv[r].denom());
        }
        let mut row = Vec::with_capacity(a.cols + extra);
        for c in 0..a.cols {
            let e = a.get(r, c);
            row.push(e.numer() * (&lcm / e.denom()));
        }
        if let Some(bv) = b {
            row.push(bv[r].numer() * (&lcm / bv[r].denom()));
        }
        out.push(row);
    }
    out
}

/// Fraction-free forward elimination. Pivot search runs over the first
/// `pivot_cols` columns only; any trailing columns are carried along (used
/// for augmented right-hand sides).
fn bareiss(mut m: Vec<Vec<BigInt>>, pivot_cols: usize) -> Echelon {
    let rows = m.len();
    let total_cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..pivot_cols {
        if r == rows {
            break;
        }
        let Some(pr) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, pr);
        for i in r + 1..rows {
            if m[i][c].is_zero() && m[i][c + 1..].iter().all(|x| x.is_zero()) {
                continue;
            }
            for j in c + 1..total_cols {
                let num = &m[r][c] * &m[i][j] - &m[i][c] * &m[r][j];
                let (q, rem) = num.div_rem(&prev);
                debug_assert!(rem.is_zero(), "Bareiss division must be exact");
                m[i][j] = q;
            }
            m[i][c] = BigInt::zero();
        }
        prev = m[r][c].clone();
        pivots.push((r, c));
        r += 1;
    }
    Echelon { mat: m, pivots }
}

/// Back-substitute a particular solution (free variables set to zero) from
/// an echelon of `[A|b]`. Returns `None` when a reduced row reads `0 = v`
/// with `v != 0`, along with those values.
fn back_substitute(ech: &Echelon, cols: usize) -> (Option<Vec<Rational>>, Vec<Rational>) {
    let rows = ech.mat.len();
    let pivot_rows = ech.pivots.len();
    let mut inconsistent = Vec::new();
    for row in ech.mat.iter().take(rows).skip(pivot_rows) {
        if !row[cols].is_zero() {
            inconsistent.push(Rational::from_integer(row[cols].clone()));
        }
    }
    if !inconsistent.is_empty() {
        return (None, inconsistent);
    }
    let mut x = vec![Rational::zero(); cols];
    for &(r, c) in ech.pivots.iter().rev() {
        let mut acc = Rational::from_integer(ech.mat[r][cols].clone());
        for j in c + 1..cols {
            if !ech.mat[r][j].is_zero() && !x[j].is_zero() {
                acc -= Rational::from_integer(ech.mat[r][j].clone()) * &x[j];
            }
        }
        x[c] = acc / Rational::from_integer(ech.mat[r][c].clone());
    }
    (Some(x), Vec::new())
}

/// Kernel basis from an echelon of `A`: one vector per free column, with a
/// `1` in the free coordinate. Deterministic given the fixed pivoting.
fn kernel_from_echelon(ech: &Echelon, cols: usize) -> Vec<Vec<Rational>> {
    let pivot_cols: Vec<usize> = ech.pivots.iter().map(|&(_, c)| c).collect();
    let mut basis = Vec::new();
    for f in 0..cols {
        if pivot_cols.contains(&f) {
            continue;
        }
        let mut v = vec![Rational::zero(); cols];
        v[f] = Rational::one();
        for &(r, c) in ech.pivots.iter().rev() {
            if c >= f {
                continue;
            }
            let mut acc = Rational::zero();
            for j in c + 1..cols {
                if !ech.mat[r][j].is_zero() && !v[j].is_zero() {
                    acc -= Rational::from_integer(ech.mat[r][j].clone()) * &v[j];
                }
            }
            v[c] = acc / Rational::from_integer(ech.mat[r][c].clone());
        }
        basis.push(v);
    }
    basis
}

/// Exact solve of `A x = b`: a particular solution when one exists, and a
/// basis of the kernel of `A`. Absence of a particular solution is reported
/// through the result, not as an error.
pub fn solve_linear(a: &RationalMatrix, b: &[Rational]) -> Result<SolveResult> {
    let detailed = solve_linear_detailed(a, b)?;
    Ok(SolveResult {
        particular: detailed.particular,
        kernel_basis: detailed.kernel_basis,
    })
}

/// [`solve_linear`] with the inconsistency witness exposed.
pub fn solve_linear_detailed(a: &RationalMatrix, b: &[Rational]) -> Result<DetailedSolveResult> {
    if a.rows != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, rhs has {} entries",
            a.rows,
            b.len()
        )));
    }
    let ech = bareiss(to_integer_rows(a, Some(b)), a.cols);
    let (particular, inconsistent_values) = back_substitute(&ech, a.cols);
    let kernel_basis = kernel_from_echelon(&ech, a.cols);
    Ok(DetailedSolveResult {
        particular,
        kernel_basis,
        inconsistent_values,
    })
}

/// Kernel basis of `A`.
pub fn kernel(a: &RationalMatrix) -> Vec<Vec<Rational>> {
    let ech = bareiss(to_integer_rows(a, None), a.cols);
    kernel_from_echelon(&ech, a.cols)
}

/// Exact rank via fraction-free elimination.
pub fn rank(a: &RationalMatrix) -> usize {
    bareiss(to_integer_rows(a, None), a.cols).pivots.len()
}

/// Incrementally maintained reduced row space; used to select maximal
/// independent subsets with deterministic pivoting.
#[derive(Clone, Debug)]
pub struct RowSpace {
    cols: usize,
    // Reduced rows, each normalized to leading coefficient 1, ordered by
    // leading column.
    rows: Vec<(usize, Vec<Rational>)>,
}

impl RowSpace {
    pub fn new(cols: usize) -> Self {
        RowSpace {
            cols,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce `row` against the space; if independent, absorb it and return
    /// true.
    pub fn insert(&mut self, mut row: Vec<Rational>) -> bool {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        for (lead, basis_row) in &self.rows {
            if !row[*lead].is_zero() {
                let factor = row[*lead].clone();
                for j in *lead..self.cols {
                    if !basis_row[j].is_zero() {
                        let delta = &factor * &basis_row[j];
                        row[j] -= delta;
                    }
                }
            }
        }
        let Some(lead) = row.iter().position(|v| !v.is_zero()) else {
            return false;
        };
        let inv = row[lead].clone();
        for v in row.iter_mut() {
            if !v.is_zero() {
                *v /= &inv;
            }
        }
        let pos = self
            .rows
            .binary_search_by(|(l, _)| l.cmp(&lead))
            .unwrap_err();
        self.rows.insert(pos, (lead, row));
        true
    }
}

fn sign_is_negative(r: &Rational) -> bool {
    r.numer().is_negative()
}

/// Scale so the first nonzero entry is +1; identity on the zero vector.
pub fn normalize_leading(v: &mut [Rational]) {
    if let Some(lead) = v.iter().position(|x| !x.is_zero()) {
        let inv = v[lead].clone();
        for x in v.iter_mut() {
            if !x.is_zero() {
                *x /= &inv;
            }
        }
    }
    let _ = sign_is_negative;
}
