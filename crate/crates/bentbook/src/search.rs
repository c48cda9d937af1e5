//! Exhaustive search for compatible-permutation sets.
//!
//! `IS_n` is the set of non-identity permutations compatible with the
//! identity. Since `pi ~ sigma` iff `sigma^(-1) o pi ~ I`, the whole
//! compatibility structure at dimension `n` is determined by `IS_n`:
//! pairwise compatibility is a table of compositions, compatible sets are
//! cliques in the graph on `{I} u IS_n`, and the largest sets the quadratic
//! construction can ever reach are bounded by `n(n-1)/2` blocks.
//!
//! Enumeration walks all `n!` permutations (guarded; factorials bite), edge
//! tests use the exact rank route for `n >= 8` and the dual rank/spectrum
//! route below that, and maximal cliques come from Bron-Kerbosch with pivot
//! selection over a degeneracy ordering. All outputs are canonically sorted
//! so repeated runs are byte-identical.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quadperm::{compatible, compatible_rank, compose, CompatVerdict, Perm};
use crate::{Error, Result};

/// Largest `n` that [`enumerate_is`] will walk without `force`.
pub const ENUMERATION_GUARD: usize = 9;

/// Edge test tuned for searches: dual-route checking below dimension 8,
/// rank-only at and above it.
fn edge_verdict(p: &Perm, q: &Perm) -> Result<CompatVerdict> {
    if p.n() < 8 {
        compatible(p, q)
    } else {
        compatible_rank(p, q)
    }
}

/// Enumerates `IS_n`: every non-identity permutation of `{1..n}` compatible
/// with the identity, in lexicographic order.
///
/// Refuses `n > ENUMERATION_GUARD` unless `force` is set; `n!` candidates
/// are tested, so the guard is where laptops stop being happy.
pub fn enumerate_is(n: usize, force: bool) -> Result<Vec<Perm>> {
    if n == 0 {
        return Err(Error::VarCount(0));
    }
    if n > ENUMERATION_GUARD && !force {
        return Err(Error::Guard(format!(
            "enumerate_is walks {n}! permutations; pass force for n > {ENUMERATION_GUARD}"
        )));
    }
    let identity = Perm::identity(n);
    let candidates: Vec<Vec<usize>> = (1..=n).permutations(n).collect();
    let flags: Vec<bool> = candidates
        .par_iter()
        .map(|map| {
            let p = Perm::new(map.clone()).expect("generator yields permutations");
            !p.is_identity()
                && edge_verdict(&p, &identity)
                    .expect("sizes match by construction")
                    .compatible
        })
        .collect();
    Ok(candidates
        .into_iter()
        .zip(flags)
        .filter(|(_, keep)| *keep)
        .map(|(map, _)| Perm::new(map).expect("already validated"))
        .collect())
}

/// Serialized form of an `IS_n` enumeration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsEnumeration {
    pub n: usize,
    pub is_size: usize,
    pub members: Vec<Perm>,
}

impl IsEnumeration {
    pub fn new(n: usize, members: Vec<Perm>) -> Self {
        IsEnumeration {
            n,
            is_size: members.len(),
            members,
        }
    }
}

// ---------------------------------------------------------------------------
// Composition table
// ---------------------------------------------------------------------------

/// One cell of a composition table: what `rho_i^(-1) o rho_j` turned out to be.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableEntry {
    Identity,
    /// 1-based index into the member list.
    Member(usize),
    NonMember,
}

impl TableEntry {
    fn render(&self) -> String {
        match self {
            TableEntry::Identity => "0".to_string(),
            TableEntry::Member(k) => k.to_string(),
            TableEntry::NonMember => "-".to_string(),
        }
    }
}

/// The full table of pairwise compositions over a member list.
#[derive(Clone, Debug)]
pub struct CompositionTable {
    pub members: Vec<Perm>,
    /// `entries[i][j]` classifies `members[i]^(-1) o members[j]`.
    pub entries: Vec<Vec<TableEntry>>,
}

/// Builds the composition table for a list of distinct non-identity
/// permutations: entry `(i, j)` locates `rho_i^(-1) o rho_j` in the list,
/// or marks it as the identity or as absent.
pub fn composition_table(members: &[Perm]) -> Result<CompositionTable> {
    if members.is_empty() {
        return Err(Error::Invalid("composition table needs members".into()));
    }
    let n = members[0].n();
    for m in members {
        if m.n() != n {
            return Err(Error::SizeMismatch(n, m.n()));
        }
        if m.is_identity() {
            return Err(Error::Invalid(
                "member lists exclude the identity; it renders as 0 implicitly".into(),
            ));
        }
    }
    if members.iter().duplicates().next().is_some() {
        return Err(Error::Invalid(
            "duplicate member in composition table".into(),
        ));
    }
    let mut entries = Vec::with_capacity(members.len());
    for mi in members {
        let inv = mi.inverse();
        let mut row = Vec::with_capacity(members.len());
        for mj in members {
            let comp = compose(&inv, mj)?;
            let entry = if comp.is_identity() {
                TableEntry::Identity
            } else if let Some(k) = members.iter().position(|m| *m == comp) {
                TableEntry::Member(k + 1)
            } else {
                TableEntry::NonMember
            };
            row.push(entry);
        }
        entries.push(row);
    }
    Ok(CompositionTable {
        members: members.to_vec(),
        entries,
    })
}

impl CompositionTable {
    /// Plain-text rendering with a header row and right-aligned columns.
    pub fn render(&self) -> String {
        let k = self.members.len();
        let width = k.to_string().len().max(2) + 1;
        let mut out = String::new();
        out.push_str(&" ".repeat(width));
        for j in 1..=k {
            out.push_str(&format!("{j:>width$}"));
        }
        out.push('\n');
        for (i, row) in self.entries.iter().enumerate() {
            out.push_str(&format!("{:>width$}", i + 1));
            for e in row {
                out.push_str(&format!("{:>width$}", e.render()));
            }
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Compatibility graphs and maximal cliques
// ---------------------------------------------------------------------------

/// Fixed-capacity bit set used for adjacency rows and clique bookkeeping.
#[derive(Clone, PartialEq, Eq)]
struct VertexSet {
    words: Vec<u64>,
}

impl VertexSet {
    fn empty(capacity: usize) -> Self {
        VertexSet {
            words: vec![0; capacity.div_ceil(64)],
        }
    }

    fn insert(&mut self, v: usize) {
        self.words[v / 64] |= 1 << (v % 64);
    }

    fn remove(&mut self, v: usize) {
        self.words[v / 64] &= !(1 << (v % 64));
    }

    fn contains(&self, v: usize) -> bool {
        self.words[v / 64] >> (v % 64) & 1 == 1
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn intersection(&self, other: &VertexSet) -> VertexSet {
        VertexSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    fn intersection_len(&self, other: &VertexSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Ascending iteration over set members.
    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }
}

/// An undirected compatibility graph over a list of permutations.
pub struct CompatGraph {
    perms: Vec<Perm>,
    adj: Vec<VertexSet>,
}

impl CompatGraph {
    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn perm(&self, v: usize) -> &Perm {
        &self.perms[v]
    }

    pub fn perms(&self) -> &[Perm] {
        &self.perms
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(b)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }
}

/// Builds the compatibility graph over `candidates` (distinct, same size).
pub fn build_graph(candidates: &[Perm]) -> Result<CompatGraph> {
    if candidates.is_empty() {
        return Err(Error::Invalid("graph needs at least one vertex".into()));
    }
    let n = candidates[0].n();
    for c in candidates {
        if c.n() != n {
            return Err(Error::SizeMismatch(n, c.n()));
        }
    }
    if candidates.iter().duplicates().next().is_some() {
        return Err(Error::Invalid("duplicate vertex in graph".into()));
    }
    let v = candidates.len();
    let edges: Vec<(usize, usize)> = (0..v)
        .flat_map(|a| ((a + 1)..v).map(move |b| (a, b)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .filter(|&(a, b)| {
            edge_verdict(&candidates[a], &candidates[b])
                .expect("sizes already checked")
                .compatible
        })
        .collect();
    let mut adj = vec![VertexSet::empty(v); v];
    for (a, b) in edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    Ok(CompatGraph {
        perms: candidates.to_vec(),
        adj,
    })
}

/// All maximal cliques with at least `min_size` vertices, each returned as an
/// ascending vertex-index list; the list of cliques is sorted
/// lexicographically. Bron-Kerbosch with pivoting over a degeneracy ordering.
pub fn maximal_cliques(g: &CompatGraph, min_size: usize) -> Vec<Vec<usize>> {
    let v = g.len();
    let order = degeneracy_order(g);
    let mut position = vec![0usize; v];
    for (idx, &vert) in order.iter().enumerate() {
        position[vert] = idx;
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &vert in &order {
        let mut p = VertexSet::empty(v);
        let mut x = VertexSet::empty(v);
        for u in g.adj[vert].iter() {
            if position[u] > position[vert] {
                p.insert(u);
            } else {
                x.insert(u);
            }
        }
        let mut r = vec![vert];
        bron_kerbosch(g, &mut r, p, x, min_size, &mut out);
    }
    for clique in &mut out {
        clique.sort_unstable();
    }
    out.sort();
    out
}

fn bron_kerbosch(
    g: &CompatGraph,
    r: &mut Vec<usize>,
    p: VertexSet,
    x: VertexSet,
    min_size: usize,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        if r.len() >= min_size {
            out.push(r.clone());
        }
        return;
    }
    // Pivot: the vertex of P u X covering most of P.
    let pivot = p
        .iter()
        .chain(x.iter())
        .max_by_key(|&u| p.intersection_len(&g.adj[u]))
        .expect("P u X nonempty here");
    let mut p = p;
    let mut x = x;
    let expand: Vec<usize> = p.iter().filter(|&v| !g.adj[pivot].contains(v)).collect();
    for v in expand {
        r.push(v);
        bron_kerbosch(
            g,
            r,
            p.intersection(&g.adj[v]),
            x.intersection(&g.adj[v]),
            min_size,
            out,
        );
        r.pop();
        p.remove(v);
        x.insert(v);
    }
}

/// Vertices in degeneracy order: repeatedly extract a minimum-degree vertex
/// (lowest index breaking ties) from the shrinking graph.
fn degeneracy_order(g: &CompatGraph) -> Vec<usize> {
    let v = g.len();
    let mut degree: Vec<usize> = (0..v).map(|i| g.degree(i)).collect();
    let mut removed = vec![false; v];
    let mut order = Vec::with_capacity(v);
    for _ in 0..v {
        let next = (0..v)
            .filter(|&i| !removed[i])
            .min_by_key(|&i| degree[i])
            .expect("vertices remain");
        removed[next] = true;
        order.push(next);
        for u in g.adj[next].iter() {
            if !removed[u] {
                degree[u] -= 1;
            }
        }
    }
    order
}

/// Upper bound on the size of any compatible set at dimension `n`:
/// `n(n-1)/2` distinct path forms can never exceed the count of independent
/// quadratics, matching the classical seed-set bound.
pub fn paterson_bound(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Serialized form of a maximal-set search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaximalSets {
    pub n: usize,
    pub min_size: usize,
    pub count: usize,
    pub sets: Vec<Vec<Perm>>,
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadperm::tests::is4;

    fn rho(k: usize) -> Perm {
        is4()[k - 1].clone()
    }

    #[test]
    fn test_enumerate_is_dimension_4() {
        let got = enumerate_is(4, false).unwrap();
        assert_eq!(got.len(), 12);
        // Lexicographic order.
        let mut sorted = got.clone();
        sorted.sort();
        assert_eq!(got, sorted);
        // Same set as the published family.
        let mut expect = is4();
        expect.sort();
        assert_eq!(got, expect);
    }

    #[test]
    fn test_enumerate_is_small_dimensions() {
        assert!(enumerate_is(2, false).unwrap().is_empty());
        let is3 = enumerate_is(3, false).unwrap();
        assert_eq!(
            is3,
            ["[1,3,2]", "[2,1,3]", "[2,3,1]", "[3,1,2]"]
                .map(|s| s.parse::<Perm>().unwrap())
                .to_vec()
        );
        // Reverse of the identity shares its path form: never a member.
        assert!(!is3.contains(&Perm::new(vec![3, 2, 1]).unwrap()));
    }

    #[test]
    fn test_enumerate_guard() {
        assert!(matches!(enumerate_is(10, false), Err(Error::Guard(_))));
        assert!(matches!(enumerate_is(0, false), Err(Error::VarCount(0))));
    }

    #[test]
    fn test_composition_table_spot_checks() {
        let table = composition_table(&is4()).unwrap();
        assert_eq!(table.entries[0][2], TableEntry::Member(6));
        assert_eq!(table.entries[0][6], TableEntry::Member(1));
        assert_eq!(table.entries[2][0], TableEntry::Member(11));
        for j in 0..12 {
            let expect = if j == 1 {
                TableEntry::Identity
            } else {
                TableEntry::NonMember
            };
            assert_eq!(table.entries[1][j], expect, "row 2 column {}", j + 1);
        }
        for i in 0..12 {
            assert_eq!(table.entries[i][i], TableEntry::Identity);
        }
    }

    #[test]
    fn test_composition_table_marks_exactly_the_incompatible_pairs() {
        let members = is4();
        let table = composition_table(&members).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let non = table.entries[i][j] == TableEntry::NonMember;
                let compat = compatible(&members[i], &members[j]).unwrap().compatible;
                // Composition lands outside {I} u IS_4 exactly for
                // incompatible pairs; the diagonal composes to the identity.
                if i == j {
                    assert_eq!(table.entries[i][j], TableEntry::Identity);
                    assert!(!compat);
                } else {
                    assert_eq!(non, !compat, "entry ({}, {})", i + 1, j + 1);
                }
            }
        }
    }

    #[test]
    fn test_composition_table_rejects_identity_and_duplicates() {
        let mut with_id = is4();
        with_id.push(Perm::identity(4));
        assert!(composition_table(&with_id).is_err());
        let mut dup = is4();
        dup.push(rho(3));
        assert!(composition_table(&dup).is_err());
    }

    #[test]
    fn test_render_layout() {
        let table = composition_table(&is4()).unwrap();
        let text = table.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 13);
        assert_eq!(
            lines[0].split_whitespace().collect::<Vec<_>>(),
            (1..=12)
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
        );
        assert_eq!(
            lines[2].split_whitespace().collect::<Vec<_>>(),
            vec!["2", "-", "0", "-", "-", "-", "-", "-", "-", "-", "-", "-", "-"]
        );
    }

    #[test]
    fn test_build_graph_family_degrees() {
        let mut verts = vec![Perm::identity(4)];
        verts.extend(is4());
        let g = build_graph(&verts).unwrap();
        assert_eq!(g.len(), 13);
        // The identity is compatible with all twelve members.
        assert_eq!(g.degree(0), 12);
        // rho_2 and rho_5 pair with the identity only.
        assert_eq!(g.degree(2), 1);
        assert_eq!(g.degree(5), 1);
        assert!(g.has_edge(0, 2));
        assert!(!g.has_edge(2, 5));
    }

    #[test]
    fn test_build_graph_rejects_mixed_sizes_and_duplicates() {
        assert!(build_graph(&[Perm::identity(4), Perm::identity(5)]).is_err());
        assert!(build_graph(&[rho(1), rho(1)]).is_err());
        assert!(build_graph(&[]).is_err());
    }

    #[test]
    fn test_maximal_cliques_small_graphs() {
        // Complete graph on a mutually compatible triple.
        let tri = build_graph(&[Perm::identity(4), rho(1), rho(3)]).unwrap();
        let cliques = maximal_cliques(&tri, 1);
        assert_eq!(cliques, vec![vec![0, 1, 2]]);

        // rho_2 and rho_5 are incompatible: graph is a path through I.
        let path = build_graph(&[Perm::identity(4), rho(2), rho(5)]).unwrap();
        assert_eq!(maximal_cliques(&path, 1), vec![vec![0, 1], vec![0, 2]]);
        assert_eq!(maximal_cliques(&path, 3), Vec::<Vec<usize>>::new());
    }

    #[test]
    fn test_maximal_cliques_on_family_graph() {
        let mut verts = vec![Perm::identity(4)];
        verts.extend(is4());
        let g = build_graph(&verts).unwrap();
        let cliques = maximal_cliques(&g, 6);
        assert_eq!(cliques.len(), 32);
        for c in &cliques {
            assert_eq!(c.len(), 6);
            // Every published maximal set contains the identity (vertex 0).
            assert_eq!(c[0], 0);
            for (a, &u) in c.iter().enumerate() {
                for &w in &c[a + 1..] {
                    assert!(g.has_edge(u, w));
                }
            }
        }
        // Size-2 maximal cliques: {I, rho_2} and {I, rho_5}.
        let small = maximal_cliques(&g, 1);
        assert_eq!(small.len(), 34);
        assert!(small.contains(&vec![0, 2]));
        assert!(small.contains(&vec![0, 5]));
    }

    #[test]
    fn test_maximal_cliques_deterministic_across_vertex_order() {
        let mut verts = vec![Perm::identity(4)];
        verts.extend(is4());
        let forward = build_graph(&verts).unwrap();
        let mut rev = verts.clone();
        rev.reverse();
        let backward = build_graph(&rev).unwrap();
        let canon = |g: &CompatGraph, cliques: Vec<Vec<usize>>| {
            let mut sets: Vec<Vec<Perm>> = cliques
                .into_iter()
                .map(|c| {
                    let mut perms: Vec<Perm> = c.iter().map(|&v| g.perm(v).clone()).collect();
                    perms.sort();
                    perms
                })
                .collect();
            sets.sort();
            sets
        };
        assert_eq!(
            canon(&forward, maximal_cliques(&forward, 6)),
            canon(&backward, maximal_cliques(&backward, 6))
        );
    }

    #[test]
    fn test_paterson_bound() {
        assert_eq!(paterson_bound(4), 6);
        assert_eq!(paterson_bound(8), 28);
        assert_eq!(paterson_bound(12), 66);
        // The dimension-4 family meets the bound with equality.
        let mut verts = vec![Perm::identity(4)];
        verts.extend(is4());
        let g = build_graph(&verts).unwrap();
        for c in maximal_cliques(&g, 6) {
            assert!(c.len() <= paterson_bound(4));
        }
    }

    #[test]
    fn test_is_enumeration_json_shape() {
        let e = IsEnumeration::new(4, enumerate_is(4, false).unwrap());
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.starts_with("{\"n\":4,\"is_size\":12,\"members\":[["));
        let back: IsEnumeration = serde_json::from_str(&json).unwrap();
        assert_eq!(back.members.len(), 12);
    }

    #[test]
    fn test_enumeration_sizes_five_and_six() {
        assert_eq!(enumerate_is(5, false).unwrap().len(), 88);
        assert_eq!(enumerate_is(6, false).unwrap().len(), 256);
    }

    #[test]
    fn test_composition_table_inverse_symmetry() {
        // Transposing the table inverts the entries: rho_i^-1 rho_j is a
        // member exactly when its inverse rho_j^-1 rho_i is, and the two
        // member indices point at mutually inverse permutations.
        let members = is4();
        let table = composition_table(&members).unwrap();
        for i in 0..members.len() {
            for j in 0..members.len() {
                match (table.entries[i][j], table.entries[j][i]) {
                    (TableEntry::Member(a), TableEntry::Member(b)) => {
                        assert_eq!(members[a - 1].inverse(), members[b - 1]);
                    }
                    (TableEntry::Identity, TableEntry::Identity) => assert_eq!(i, j),
                    (TableEntry::NonMember, TableEntry::NonMember) => {}
                    (lhs, rhs) => panic!("asymmetric entries at ({i},{j}): {lhs:?} vs {rhs:?}"),
                }
            }
        }
    }

    #[test]
    fn test_maximal_sets_closed_under_reversal() {
        let mut verts = vec![Perm::identity(4)];
        verts.extend(is4());
        let g = build_graph(&verts).unwrap();
        let mut sets: Vec<Vec<Perm>> = maximal_cliques(&g, 6)
            .into_iter()
            .map(|c| {
                let mut set: Vec<Perm> = c.iter().map(|&v| g.perm(v).clone()).collect();
                set.sort();
                set
            })
            .collect();
        sets.sort();
        // Reversal fixes every path form, so swapping each non-identity
        // member for its reverse lands on another maximal set.
        for set in &sets {
            let mut reversed: Vec<Perm> = set
                .iter()
                .map(|p| {
                    if p.is_identity() {
                        p.clone()
                    } else {
                        p.reverse()
                    }
                })
                .collect();
            reversed.sort();
            assert!(sets.binary_search(&reversed).is_ok());
        }
    }
}
