//! SL2(Z) machinery: exact integer matrices, breadth-first enumeration over
//! the generators S, T, T^{-1}, canonical coset representatives modulo a
//! cyclic subgroup <g0>, and the grouping of cosets into orbits of left
//! multiplication by T.
//!
//! Left multiplication by T preserves the bottom row of a matrix, and the
//! bottom row modulo the right <g0>-action (and global sign) is a complete
//! orbit invariant; series evaluation sums each orbit over all integer
//! translates, which is what makes the translation-modularity test exact.

use super::{HyperbolicError, MoebiusElement};
use std::collections::{HashMap, HashSet, VecDeque};

/// Exact SL2(Z) element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupElement {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { a: 1, b: 0, c: 0, d: 1 };
    pub const S: GroupElement = GroupElement { a: 0, b: -1, c: 1, d: 0 };
    pub const T: GroupElement = GroupElement { a: 1, b: 1, c: 0, d: 1 };
    pub const T_INV: GroupElement = GroupElement { a: 1, b: -1, c: 0, d: 1 };

    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self, HyperbolicError> {
        if a * d - b * c != 1 {
            return Err(HyperbolicError::NotUnimodular((a * d - b * c) as f64));
        }
        Ok(Self { a, b, c, d })
    }

    /// Rounds a real matrix to integers; rejects entries off the lattice.
    pub fn from_moebius(m: &MoebiusElement) -> Result<Self, HyperbolicError> {
        let round = |x: f64| -> Result<i64, HyperbolicError> {
            let r = x.round();
            if (x - r).abs() > 1e-9 {
                return Err(HyperbolicError::NotInteger);
            }
            Ok(r as i64)
        };
        Self::new(round(m.a)?, round(m.b)?, round(m.c)?, round(m.d)?)
    }

    pub fn to_moebius(self) -> MoebiusElement {
        MoebiusElement {
            a: self.a as f64,
            b: self.b as f64,
            c: self.c as f64,
            d: self.d as f64,
        }
    }

    pub fn mul(self, o: GroupElement) -> GroupElement {
        GroupElement {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inverse(self) -> GroupElement {
        GroupElement { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn neg(self) -> GroupElement {
        GroupElement { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }

    pub fn trace(self) -> i64 {
        self.a + self.d
    }

    pub fn frobenius_sq(self) -> i128 {
        let [a, b, c, d] = [self.a as i128, self.b as i128, self.c as i128, self.d as i128];
        a * a + b * b + c * c + d * d
    }

    fn tuple(self) -> [i64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Sign-normalized tuple: first nonzero entry positive (PSL2 form).
    fn psl_tuple(self) -> [i64; 4] {
        let t = self.tuple();
        for &x in &t {
            if x != 0 {
                return if x < 0 { self.neg().tuple() } else { t };
            }
        }
        t
    }

    pub fn is_identity_up_to_sign(self) -> bool {
        self.b == 0 && self.c == 0 && self.a == self.d && self.a.abs() == 1
    }
}

/// How minus-identity is counted in coset sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CosetConvention {
    /// One representative per Moebius transformation (default).
    Psl2Distinct,
    /// Count g and -g separately: every series term doubles.
    Sl2WithMinusIdentity,
}

impl CosetConvention {
    pub fn multiplicity(self) -> f64 {
        match self {
            CosetConvention::Psl2Distinct => 1.0,
            CosetConvention::Sl2WithMinusIdentity => 2.0,
        }
    }
}

/// Canonical representative of a right coset g <g0>.
#[derive(Debug, Clone, Copy)]
pub struct Coset {
    pub rep: GroupElement,
    pub word_length: u32,
}

/// Canonical representative of a T-orbit { T^m g <g0> : m in Z } of cosets.
#[derive(Debug, Clone, Copy)]
pub struct Orbit {
    pub rep: GroupElement,
    /// Smallest word length seen among the orbit's cosets.
    pub word_length: u32,
}

/// Enumerated coset representatives of SL2(Z) / <g0> with truncation
/// metadata and the T-orbit grouping used by series evaluation.
#[derive(Debug, Clone)]
pub struct CosetTable {
    generator: GroupElement,
    convention: CosetConvention,
    max_word_length: u32,
    /// None for hyperbolic g0 (infinite cyclic), Some(order) for elliptic
    /// (order in PSL2).
    subgroup_order: Option<u32>,
    cosets: Vec<Coset>,
    orbits: Vec<Orbit>,
}

impl CosetTable {
    pub fn generator(&self) -> GroupElement {
        self.generator
    }

    pub fn convention(&self) -> CosetConvention {
        self.convention
    }

    pub fn max_word_length(&self) -> u32 {
        self.max_word_length
    }

    pub fn subgroup_order(&self) -> Option<u32> {
        self.subgroup_order
    }

    pub fn cosets(&self) -> &[Coset] {
        &self.cosets
    }

    pub fn orbits(&self) -> &[Orbit] {
        &self.orbits
    }

    /// Subgroup powers g0^k covering the canonicalization window.
    fn subgroup_powers(g0: GroupElement, order: Option<u32>) -> Vec<GroupElement> {
        match order {
            Some(n) => {
                // Elliptic: the k-range cycles through 2n signed matrices.
                let mut out = Vec::with_capacity(2 * n as usize);
                let mut cur = GroupElement::IDENTITY;
                for _ in 0..2 * n {
                    out.push(cur);
                    cur = cur.mul(g0);
                }
                out
            }
            None => {
                let mut out = vec![GroupElement::IDENTITY];
                let mut fwd = GroupElement::IDENTITY;
                let inv = g0.inverse();
                let mut bwd = GroupElement::IDENTITY;
                // Norms grow like lambda^{|k|}; 1e14 covers any reduction of
                // the word-length balls used here.
                for _ in 0..64 {
                    fwd = fwd.mul(g0);
                    if fwd.frobenius_sq() > 1_000_000_000_000_00 {
                        break;
                    }
                    out.push(fwd);
                }
                for _ in 0..64 {
                    bwd = bwd.mul(inv);
                    if bwd.frobenius_sq() > 1_000_000_000_000_00 {
                        break;
                    }
                    out.push(bwd);
                }
                out
            }
        }
    }
}

fn lex_min(a: [i64; 4], b: [i64; 4]) -> [i64; 4] {
    if b < a {
        b
    } else {
        a
    }
}

/// Canonical PSL2 tuple of the right coset g <g0>: minimal Frobenius norm
/// over g g0^k, ties broken lexicographically.
fn coset_key(g: GroupElement, powers: &[GroupElement]) -> [i64; 4] {
    let mut best_norm = i128::MAX;
    let mut best = g.psl_tuple();
    for &p in powers {
        let cand = g.mul(p);
        let n = cand.frobenius_sq();
        if n < best_norm {
            best_norm = n;
            best = cand.psl_tuple();
        } else if n == best_norm {
            best = lex_min(best, cand.psl_tuple());
        }
    }
    best
}

/// Canonical signed bottom row of the coset's T-orbit: left multiplication
/// by T fixes (c, d) exactly, so the row modulo the right <g0>-action and
/// sign classifies the orbit.
fn orbit_key(g: GroupElement, powers: &[GroupElement]) -> (i64, i64) {
    let mut best_norm = i128::MAX;
    let mut best = (i64::MAX, i64::MAX);
    for &p in powers {
        let c = g.c * p.a + g.d * p.c;
        let d = g.c * p.b + g.d * p.d;
        let (c, d) = if c < 0 || (c == 0 && d < 0) { (-c, -d) } else { (c, d) };
        let n = c as i128 * c as i128 + d as i128 * d as i128;
        if n < best_norm || (n == best_norm && (c, d) < best) {
            if n < best_norm {
                best = (c, d);
            } else {
                best = best.min((c, d));
            }
            best_norm = n;
        }
    }
    best
}

/// Order of an elliptic SL2(Z) element in PSL2 (2 or 3 for the modular group).
fn elliptic_order(g0: GroupElement) -> Result<u32, HyperbolicError> {
    let mut cur = g0;
    for k in 1..=6 {
        if cur.is_identity_up_to_sign() {
            return Ok(k);
        }
        cur = cur.mul(g0);
    }
    Err(HyperbolicError::NotElliptic(g0.trace().abs() as f64))
}

/// Breadth-first enumeration of coset representatives of SL2(Z) / <g0> from
/// words in S, T, T^{-1} up to `max_word_length`, with canonical per-coset
/// reduction and exact integer deduplication.
pub fn coset_reps(
    g0: &MoebiusElement,
    max_word_length: u32,
    convention: CosetConvention,
) -> Result<CosetTable, HyperbolicError> {
    let g0i = GroupElement::from_moebius(g0)?;
    let tr = g0i.trace().abs();
    let subgroup_order = if tr > 2 {
        None
    } else if tr < 2 {
        Some(elliptic_order(g0i)?)
    } else {
        return Err(HyperbolicError::NotHyperbolic(2.0));
    };
    let powers = CosetTable::subgroup_powers(g0i, subgroup_order);

    let gens = [GroupElement::S, GroupElement::T, GroupElement::T_INV];
    let mut seen: HashSet<[i64; 4]> = HashSet::new();
    let mut queue: VecDeque<(GroupElement, u32)> = VecDeque::new();
    seen.insert(GroupElement::IDENTITY.psl_tuple());
    queue.push_back((GroupElement::IDENTITY, 0));

    let mut cosets_by_key: HashMap<[i64; 4], Coset> = HashMap::new();
    let mut orbits_by_key: HashMap<(i64, i64), Orbit> = HashMap::new();

    while let Some((g, depth)) = queue.pop_front() {
        let ckey = coset_key(g, &powers);
        cosets_by_key
            .entry(ckey)
            .and_modify(|c| {
                if depth < c.word_length {
                    *c = Coset { rep: g, word_length: depth };
                }
            })
            .or_insert(Coset { rep: g, word_length: depth });
        let okey = orbit_key(g, &powers);
        orbits_by_key
            .entry(okey)
            .and_modify(|o| {
                if depth < o.word_length {
                    *o = Orbit { rep: g, word_length: depth };
                }
            })
            .or_insert(Orbit { rep: g, word_length: depth });

        if depth == max_word_length {
            continue;
        }
        for gen in gens {
            let next = g.mul(gen);
            if seen.insert(next.psl_tuple()) {
                queue.push_back((next, depth + 1));
            }
        }
    }

    let mut cosets: Vec<Coset> = cosets_by_key.into_values().collect();
    cosets.sort_by_key(|c| (c.word_length, c.rep.psl_tuple()));
    let mut orbits: Vec<Orbit> = orbits_by_key.into_values().collect();
    orbits.sort_by_key(|o| (o.word_length, o.rep.psl_tuple()));

    Ok(CosetTable {
        generator: g0i,
        convention,
        max_word_length,
        subgroup_order,
        cosets,
        orbits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_g0() -> MoebiusElement {
        MoebiusElement::new(2.0, 1.0, 1.0, 1.0).unwrap()
    }

    /// Brute-force coset equivalence: g' = +/- g g0^k for |k| <= 50.
    fn equivalent(g: GroupElement, h: GroupElement, g0: GroupElement) -> bool {
        let q = g.inverse().mul(h);
        let mut fwd = GroupElement::IDENTITY;
        let mut bwd = GroupElement::IDENTITY;
        let inv = g0.inverse();
        for _ in 0..=50 {
            if q == fwd || q == fwd.neg() || q == bwd || q == bwd.neg() {
                return true;
            }
            fwd = fwd.mul(g0);
            bwd = bwd.mul(inv);
        }
        false
    }

    #[test]
    fn word_length_zero_is_identity_only() {
        let table = coset_reps(&std_g0(), 0, CosetConvention::Psl2Distinct).unwrap();
        assert_eq!(table.cosets().len(), 1);
        assert_eq!(table.cosets()[0].rep, GroupElement::IDENTITY);
        assert_eq!(table.orbits().len(), 1);
    }

    #[test]
    fn counts_grow_with_word_length() {
        let mut prev = 0;
        for w in 0..=8 {
            let table = coset_reps(&std_g0(), w, CosetConvention::Psl2Distinct).unwrap();
            assert!(table.cosets().len() >= prev, "w={w}");
            prev = table.cosets().len();
        }
        assert!(prev > 10);
    }

    #[test]
    fn representatives_pairwise_inequivalent() {
        let table = coset_reps(&std_g0(), 6, CosetConvention::Psl2Distinct).unwrap();
        let g0 = table.generator();
        let reps: Vec<GroupElement> = table.cosets().iter().map(|c| c.rep).collect();
        for i in 0..reps.len() {
            for j in (i + 1)..reps.len() {
                assert!(
                    !equivalent(reps[i], reps[j], g0),
                    "cosets {i} and {j} are equivalent: {:?} {:?}",
                    reps[i],
                    reps[j]
                );
            }
        }
    }

    #[test]
    fn orbits_pairwise_t_inequivalent() {
        // No two orbit reps satisfy g' = +/- T^m g g0^k.
        let table = coset_reps(&std_g0(), 5, CosetConvention::Psl2Distinct).unwrap();
        let g0 = table.generator();
        let reps: Vec<GroupElement> = table.orbits().iter().map(|o| o.rep).collect();
        for i in 0..reps.len() {
            for j in (i + 1)..reps.len() {
                for m in -12i64..=12 {
                    let tm = GroupElement { a: 1, b: m, c: 0, d: 1 };
                    assert!(
                        !equivalent(tm.mul(reps[i]), reps[j], g0),
                        "orbits {i},{j} equivalent at m={m}"
                    );
                }
            }
        }
    }

    #[test]
    fn orbit_key_constant_along_orbit() {
        let table = coset_reps(&std_g0(), 4, CosetConvention::Psl2Distinct).unwrap();
        let powers =
            CosetTable::subgroup_powers(table.generator(), table.subgroup_order());
        for o in table.orbits() {
            let base = orbit_key(o.rep, &powers);
            for m in -6i64..=6 {
                let tm = GroupElement { a: 1, b: m, c: 0, d: 1 };
                let moved = orbit_key(tm.mul(o.rep), &powers);
                assert_eq!(base, moved);
                // Right g0-action too.
                let gk = o.rep.mul(table.generator());
                assert_eq!(base, orbit_key(tm.mul(gk), &powers));
            }
        }
    }

    #[test]
    fn elliptic_subgroup_orders() {
        let s = MoebiusElement::new(0.0, -1.0, 1.0, 0.0).unwrap();
        let table = coset_reps(&s, 3, CosetConvention::Psl2Distinct).unwrap();
        assert_eq!(table.subgroup_order(), Some(2));

        let st = MoebiusElement::new(0.0, -1.0, 1.0, 1.0).unwrap();
        let table = coset_reps(&st, 3, CosetConvention::Psl2Distinct).unwrap();
        assert_eq!(table.subgroup_order(), Some(3));
    }

    #[test]
    fn rejects_non_integer_and_parabolic() {
        let m = MoebiusElement::new(1.5, 0.25, 1.0, 0.5).unwrap();
        assert!(matches!(
            coset_reps(&m, 2, CosetConvention::Psl2Distinct),
            Err(HyperbolicError::NotInteger)
        ));
        let t = MoebiusElement::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            coset_reps(&t, 2, CosetConvention::Psl2Distinct),
            Err(HyperbolicError::NotHyperbolic(_))
        ));
    }
}
