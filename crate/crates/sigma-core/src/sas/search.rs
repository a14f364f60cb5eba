//! Bounded rational-ansatz search.
//!
//! The ansatz is `x = N/Q`: `N` a polynomial of total degree at most `d'`
//! in the ansatz variables (free generators at shifts `−w'..=w'`, affine
//! generators at shift 0) and `Q` a product of atoms of total degree at most
//! `d'`. Atoms are the irreducible-looking pieces of the coefficients and of
//! the affine rules, with their shifts. For each `Q` the equation is linear
//! in the coefficients of `N`. Enumeration is iterative deepening over `d'`,
//! then `w'`, then `Q` in generation order; the first hit is returned.
//!
//! Two prunings keep the search small without losing solutions inside the
//! bounds. Over an all-free presentation the extremal-shift window fixes
//! which shifts can occur. Over an affine top generator every ansatz shape
//! `(n, m)` forces a base equation on the leading coefficients; when none of
//! those is solvable within bounds, neither is the original equation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::Zero;

use super::freebase::{constant_case, shift_windows};
use super::{
    check_coefficients, Equation, Lin, MultiplicativeSas, SasError, SearchBounds, SolveResult,
    TwistedSas,
};
use crate::difference::{Element, Presentation};
use crate::linalg::SparseSystem;
use crate::poly::{lcm, MPoly, Monomial, VarId};
use crate::rat::Rat;
use crate::ratfunc::RatFunc;

/// Searches for `x` with `σ(x) − e1·x = e2` within `bounds`.
pub fn solve_twisted_bounded(
    p: &Presentation,
    eq: &TwistedSas,
    bounds: SearchBounds,
) -> Result<SolveResult, SasError> {
    check_coefficients(p, &[&eq.e1, &eq.e2])?;
    if eq.e1.is_zero() {
        return Err(SasError::ZeroTwist);
    }
    let lin = Lin::Twisted { e1: eq.e1.clone(), e2: eq.e2.clone() };
    let mut s = Searcher::new(bounds);
    Ok(match s.find(p, &lin) {
        Some(x) => {
            assert!(eq.is_solution(p, &x), "search returned a non-solution");
            SolveResult::Solution(x)
        }
        None => SolveResult::NoSolutionWithinBounds(bounds),
    })
}

/// Searches for nonzero `x` with `σ(x) = e^z·x`. Over an all-free
/// presentation with empty support windows the answer is exact.
pub fn solve_multiplicative_bounded(
    p: &Presentation,
    eq: &MultiplicativeSas,
    bounds: SearchBounds,
) -> Result<SolveResult, SasError> {
    check_coefficients(p, &[&eq.e])?;
    if eq.z == 0 {
        return Err(SasError::ZeroExponent);
    }
    if p.all_free() {
        let full = Equation::Multiplicative(eq.clone());
        if let super::FreeBaseDecision::Unsolvable(c) = super::decide_free_base(p, &full)? {
            return Ok(SolveResult::Unsolvable(c));
        }
    }
    let lin = Lin::Homog { f: eq.factor() };
    let mut s = Searcher::new(bounds);
    Ok(match s.find(p, &lin) {
        Some(x) => {
            assert!(eq.is_solution(p, &x), "search returned a non-solution");
            SolveResult::Solution(x)
        }
        None => SolveResult::NoSolutionWithinBounds(bounds),
    })
}

/// Residual search over an all-free presentation inside known windows.
pub(crate) fn window_search(
    p: &Presentation,
    lin: &Lin,
    windows: &BTreeMap<u32, (i64, i64)>,
    bounds: SearchBounds,
) -> Option<Element> {
    let vars: Vec<VarId> = windows
        .iter()
        .flat_map(|(&g, &(lo, hi))| (lo..=hi).map(move |k| VarId::new(g, k)))
        .collect();
    flat_search(p, lin, &|_| vars.clone(), bounds)
}

struct Searcher {
    bounds: SearchBounds,
    memo: HashMap<(Vec<u32>, Lin), bool>,
}

impl Searcher {
    fn new(bounds: SearchBounds) -> Self {
        Searcher { bounds, memo: HashMap::new() }
    }

    fn find(&mut self, p: &Presentation, lin: &Lin) -> Option<Element> {
        match lin {
            Lin::Twisted { e2, .. } if e2.is_zero() => return Some(RatFunc::zero()),
            Lin::Homog { f } if f.is_one() => return Some(RatFunc::one()),
            _ => {}
        }
        if p.all_free() {
            let windows = shift_windows(&lin.coefficients());
            if windows.is_empty() {
                return constant_case(lin).ok().filter(|x| lin.is_solution(p, x));
            }
            return window_search(p, lin, &windows, self.bounds);
        }
        if let Some((base, shapes)) = shape_equations(p, lin, self.bounds.degree) {
            let live = shapes
                .iter()
                .any(|s| s.as_ref().is_some_and(|derived| self.solvable(&base, derived)));
            if !live {
                return None;
            }
        }
        let vars_for = |w: u32| -> Vec<VarId> {
            let w = w as i64;
            p.generators()
                .iter()
                .flat_map(|g| {
                    let ks: Vec<i64> = if g.is_free() { (-w..=w).collect() } else { vec![0] };
                    ks.into_iter().map(move |k| VarId::new(g.id, k))
                })
                .collect()
        };
        flat_search(p, lin, &vars_for, self.bounds)
    }

    fn solvable(&mut self, p: &Presentation, lin: &Lin) -> bool {
        let key = (p.ids().into_iter().collect::<Vec<_>>(), lin.clone());
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let v = self.find(p, lin).is_some();
        self.memo.insert(key, v);
        v
    }
}

/// The affine top generator and its rule, if the last generator is affine.
pub(crate) fn affine_top(p: &Presentation) -> Option<(u32, Element, Element)> {
    let top = p.generators().last()?;
    let (alpha, beta) = p.affine_rule(top.id)?;
    Some((top.id, alpha.clone(), beta.clone()))
}

/// Degree in the top variable and leading coefficient, for an element whose
/// denominator does not mention it.
pub(crate) fn top_degree_and_lc(x: &Element, a: VarId) -> Option<(u32, Element)> {
    if x.den().contains_var(a) {
        return None;
    }
    let coeffs = x.num().coefficients_in(a);
    let lc_poly = coeffs.last()?.clone();
    let lc = RatFunc::from_poly(lc_poly).div(&RatFunc::from_poly(x.den().clone())).ok()?;
    Some(((coeffs.len() - 1) as u32, lc))
}

/// Base equations forced on `y = e_n/ẽ_m` by each degree difference
/// `d = n − m ∈ [−D, D]`; `None` entries are contradictory shapes.
/// Returns `None` when the equation is outside the handled shape.
fn shape_equations(
    p: &Presentation,
    lin: &Lin,
    degree: u32,
) -> Option<(Presentation, Vec<Option<Lin>>)> {
    let (top, alpha, _) = affine_top(p)?;
    let a = VarId::new(top, 0);
    let keep: BTreeSet<u32> = p.ids().into_iter().filter(|&i| i != top).collect();
    let base = p.restrict(&keep).ok()?;
    let d_max = degree as i64;
    let alpha_pow = |k: i64| alpha.pow(k).expect("alpha nonzero");
    let mut out = Vec::new();
    match lin {
        Lin::Twisted { e1, e2 } => {
            if e1.vars().contains(&a) {
                return None;
            }
            let (p2, lc) = top_degree_and_lc(e2, a)?;
            let p2 = p2 as i64;
            for d in -d_max..=d_max {
                out.push(if d < p2 {
                    None
                } else if d == p2 {
                    let s = alpha_pow(-p2);
                    Some(Lin::Twisted { e1: e1.mul(&s), e2: lc.mul(&s) })
                } else {
                    Some(Lin::Homog { f: e1.mul(&alpha_pow(-d)) })
                });
            }
        }
        Lin::Homog { f } => {
            if f.vars().contains(&a) {
                return None;
            }
            for d in -d_max..=d_max {
                out.push(Some(Lin::Homog { f: f.mul(&alpha_pow(-d)) }));
            }
        }
    }
    Some((base, out))
}

fn flat_search(
    p: &Presentation,
    lin: &Lin,
    vars_for: &dyn Fn(u32) -> Vec<VarId>,
    bounds: SearchBounds,
) -> Option<Element> {
    for dp in 0..=bounds.degree {
        let mut last: Option<(Vec<VarId>, Vec<MPoly>)> = None;
        for w in 0..=bounds.window {
            let vars = vars_for(w);
            let atoms = atoms(p, lin, &vars, w as i64);
            let key = (vars, atoms);
            if last.as_ref() == Some(&key) {
                continue;
            }
            let (vars, atoms) = &key;
            let monos = monomials(vars, dp);
            for q in denominators(atoms, dp) {
                if let Some(x) = try_ansatz(p, lin, &monos, &q) {
                    return Some(x);
                }
            }
            last = Some(key);
        }
    }
    None
}

/// All monomials of total degree ≤ `deg`, by degree then generation order.
pub(crate) fn monomials(vars: &[VarId], deg: u32) -> Vec<Monomial> {
    let mut by_degree: Vec<Vec<Vec<(VarId, u32)>>> = vec![vec![vec![]]];
    for d in 1..=deg {
        let mut layer = Vec::new();
        for prev in &by_degree[(d - 1) as usize] {
            // Extend only with variables at or after the last one used, so
            // each multiset appears once.
            let start = prev
                .last()
                .map(|(v, _)| vars.iter().position(|x| x == v).unwrap())
                .unwrap_or(0);
            for &v in vars.iter().skip(start) {
                let mut next = prev.clone();
                match next.last_mut() {
                    Some((lv, e)) if *lv == v => *e += 1,
                    _ => next.push((v, 1)),
                }
                layer.push(next);
            }
        }
        by_degree.push(layer);
    }
    by_degree
        .into_iter()
        .flatten()
        .map(Monomial::from_pairs)
        .collect()
}

fn split_atoms(poly: &MPoly, out: &mut Vec<MPoly>) {
    if poly.is_constant() || poly.is_zero() {
        return;
    }
    if poly.num_terms() == 1 {
        let (m, _) = poly.leading().unwrap();
        for &(v, _) in m.pairs() {
            out.push(MPoly::var(v));
        }
    } else {
        out.push(poly.monic());
    }
}

fn atoms(p: &Presentation, lin: &Lin, vars: &[VarId], w: i64) -> Vec<MPoly> {
    let mut raw = Vec::new();
    match lin {
        Lin::Twisted { e1, e2 } => {
            split_atoms(e1.den(), &mut raw);
            split_atoms(e2.den(), &mut raw);
            split_atoms(e1.num(), &mut raw);
        }
        Lin::Homog { f } => {
            split_atoms(f.den(), &mut raw);
            split_atoms(f.num(), &mut raw);
        }
    }
    for g in p.generators() {
        if let Some((alpha, beta)) = p.affine_rule(g.id) {
            split_atoms(alpha.den(), &mut raw);
            split_atoms(alpha.num(), &mut raw);
            split_atoms(beta.den(), &mut raw);
        }
    }
    let allowed: BTreeSet<VarId> = vars.iter().copied().collect();
    let mut out: Vec<MPoly> = Vec::new();
    for atom in raw {
        let free_only = atom.vars().iter().all(|v| p.is_free(v.gen));
        let shifts: Vec<i64> = if free_only { (-w..=w).collect() } else { vec![0] };
        for k in shifts {
            let s = atom.map_vars(|v| v.shifted(k));
            if s.vars().is_subset(&allowed) && !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

/// Products of atoms with total degree ≤ `deg`, starting with 1.
fn denominators(atoms: &[MPoly], deg: u32) -> Vec<MPoly> {
    let degs: Vec<u32> = atoms.iter().map(|a| a.total_degree().unwrap_or(0)).collect();
    let mut out: Vec<(u32, MPoly)> = vec![(0, MPoly::one())];
    fn rec(
        atoms: &[MPoly],
        degs: &[u32],
        start: usize,
        left: u32,
        cur: (u32, MPoly),
        out: &mut Vec<(u32, MPoly)>,
    ) {
        for i in start..atoms.len() {
            if degs[i] == 0 || degs[i] > left {
                continue;
            }
            let next = (cur.0 + degs[i], cur.1.mul(&atoms[i]));
            out.push(next.clone());
            rec(atoms, degs, i, left - degs[i], next, out);
        }
    }
    rec(atoms, &degs, 0, deg, (0, MPoly::one()), &mut out);
    out.sort_by_key(|(d, _)| *d);
    let mut seen = Vec::new();
    for (_, q) in out {
        if !seen.contains(&q) {
            seen.push(q);
        }
    }
    seen
}

/// Writes each rational function over one common denominator.
pub(crate) fn clear_denominators(items: &[RatFunc]) -> Vec<MPoly> {
    let mut dens: Vec<&MPoly> = Vec::new();
    for it in items {
        if !it.is_zero() && !it.den().is_one() && !dens.contains(&it.den()) {
            dens.push(it.den());
        }
    }
    let mut common = MPoly::one();
    for d in dens {
        if common.div_exact(d).is_none() {
            common = lcm(&common, d);
        }
    }
    items
        .iter()
        .map(|it| {
            if it.is_zero() {
                MPoly::zero()
            } else {
                it.num().mul(&common.div_exact(it.den()).expect("common multiple"))
            }
        })
        .collect()
}

fn try_ansatz(p: &Presentation, lin: &Lin, monos: &[Monomial], q: &MPoly) -> Option<Element> {
    let qf = RatFunc::from_poly(q.clone());
    let sq = p.sigma(&qf, 1);
    let coeff = match lin {
        Lin::Twisted { e1, .. } => e1,
        Lin::Homog { f } => f,
    };
    let mut items: Vec<RatFunc> = monos
        .iter()
        .map(|m| {
            let mf = RatFunc::from_poly(MPoly::term(m.clone(), Rat::from_integer(1.into())));
            let left = p.sigma(&mf, 1).div(&sq).expect("sigma of nonzero");
            let right = coeff.mul(&mf).div(&qf).expect("q nonzero");
            left.sub(&right)
        })
        .collect();
    let rhs_index = items.len();
    if let Lin::Twisted { e2, .. } = lin {
        items.push(e2.clone());
    }
    let polys = clear_denominators(&items);
    let mut rows: BTreeMap<Monomial, usize> = BTreeMap::new();
    let mut row_of = |m: &Monomial| -> usize {
        let n = rows.len();
        *rows.entry(m.clone()).or_insert(n)
    };
    let mut sys = SparseSystem::new();
    for poly in &polys[..rhs_index] {
        let col: BTreeMap<usize, Rat> = poly.terms().map(|(m, c)| (row_of(m), c.clone())).collect();
        sys.push_column(col);
    }
    let coeffs = match lin {
        Lin::Twisted { .. } => {
            let rhs: BTreeMap<usize, Rat> =
                polys[rhs_index].terms().map(|(m, c)| (row_of(m), c.clone())).collect();
            sys.solve(&rhs)?
        }
        Lin::Homog { .. } => sys.kernel_vector()?,
    };
    let num = MPoly::from_terms(
        monos
            .iter()
            .zip(coeffs)
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, c)| (m.clone(), c)),
    );
    let x = RatFunc::from_poly(num).div(&qf).ok()?;
    if lin.is_solution(p, &x) {
        Some(x)
    } else {
        None
    }
}
