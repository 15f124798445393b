//! Tree topologies, edge splits and region counting.
//!
//! Topologies are written as nested parentheses over taxa `1..N`, e.g.
//! `(((1(23))4)56)`. With at most nine taxa every digit is one taxon; larger
//! trees separate labels with commas, as in `((1,2),(10,11),3,...)`.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;

use crate::{Error, Result};

/// Largest number of taxa representable in a split mask.
pub const MAX_TAXA: usize = 64;
/// Largest `N` accepted by [`enumerate_topologies`].
pub const MAX_ENUMERATE: usize = 8;

/// Bipartition of the taxa induced by an internal edge, stored as the side
/// that does not contain the outgroup. Bit `i` stands for taxon `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgePartition {
    mask: u64,
    n_taxa: usize,
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl EdgePartition {
    /// Normalises `mask` against `outgroup` (1-based) by complementing it when
    /// the outgroup bit is set. Returns `None` for trivial splits.
    pub fn new(mask: u64, n_taxa: usize, outgroup: usize) -> Option<Self> {
        let full = full_mask(n_taxa);
        let mut mask = mask & full;
        if mask & (1 << (outgroup - 1)) != 0 {
            mask = !mask & full;
        }
        let size = mask.count_ones() as usize;
        (size >= 2 && size + 2 <= n_taxa).then_some(EdgePartition { mask, n_taxa })
    }

    /// Parses a `+`/`-` string such as `-++---`.
    pub fn from_display(text: &str, outgroup: usize) -> Result<Self> {
        let n = text.chars().count();
        if !(4..=MAX_TAXA).contains(&n) || outgroup == 0 || outgroup > n {
            return Err(Error::parse(1, 1, format!("bad split pattern '{text}'")));
        }
        let mut mask = 0u64;
        for (i, c) in text.chars().enumerate() {
            match c {
                '+' => mask |= 1 << i,
                '-' => {}
                _ => return Err(Error::parse(1, i + 1, format!("unexpected '{c}' in split pattern"))),
            }
        }
        EdgePartition::new(mask, n, outgroup)
            .ok_or_else(|| Error::parse(1, 1, format!("'{text}' is a trivial split")))
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn n_taxa(&self) -> usize {
        self.n_taxa
    }

    /// Taxa (1-based) on the non-outgroup side.
    pub fn taxa(&self) -> Vec<usize> {
        (0..self.n_taxa).filter(|i| self.mask >> i & 1 == 1).map(|i| i + 1).collect()
    }

    pub fn display(&self) -> String {
        (0..self.n_taxa)
            .map(|i| if self.mask >> i & 1 == 1 { '+' } else { '-' })
            .collect()
    }

    pub fn compatible(&self, other: &EdgePartition) -> bool {
        let (a, b) = (self.mask, other.mask);
        a & b == 0 || a & b == a || a & b == b
    }
}

impl fmt::Display for EdgePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

/// Unrooted topology identified by its set of internal splits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    n_taxa: usize,
    outgroup: usize,
    splits: BTreeSet<EdgePartition>,
}

impl Topology {
    /// Builds a topology from pairwise compatible splits.
    pub fn from_splits(
        n_taxa: usize,
        outgroup: usize,
        splits: impl IntoIterator<Item = EdgePartition>,
    ) -> Result<Self> {
        check_taxa(n_taxa, outgroup)?;
        let splits: BTreeSet<EdgePartition> = splits.into_iter().collect();
        if let Some(bad) = splits.iter().find(|s| s.n_taxa != n_taxa) {
            return Err(Error::Precondition(format!("split {bad} is not over {n_taxa} taxa")));
        }
        for a in &splits {
            for b in &splits {
                if !a.compatible(b) {
                    return Err(Error::Precondition(format!("splits {a} and {b} conflict")));
                }
            }
        }
        Ok(Topology {
            n_taxa,
            outgroup,
            splits,
        })
    }

    pub fn n_taxa(&self) -> usize {
        self.n_taxa
    }

    pub fn outgroup(&self) -> usize {
        self.outgroup
    }

    pub fn splits(&self) -> impl Iterator<Item = &EdgePartition> {
        self.splits.iter()
    }

    pub fn contains(&self, edge: &EdgePartition) -> bool {
        self.splits.contains(edge)
    }

    pub fn is_resolved(&self) -> bool {
        self.splits.len() + 3 == self.n_taxa
    }

    /// Canonical text: the outgroup sits at the top level and the children
    /// of every node are ordered by their smallest taxon.
    pub fn text(&self) -> String {
        let clades: Vec<u64> = self.splits.iter().map(|s| s.mask).collect();
        let sep = if self.n_taxa > 9 { "," } else { "" };
        let mut out = String::new();
        write_node(full_mask(self.n_taxa), &clades, sep, &mut out);
        out
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

fn write_node(mask: u64, clades: &[u64], sep: &str, out: &mut String) {
    // maximal proper sub-clades of `mask`, then leftover leaves
    let children: Vec<u64> = clades
        .iter()
        .copied()
        .filter(|&c| c != mask && c & mask == c)
        .filter(|&c| !clades.iter().any(|&d| d != c && d != mask && d & mask == d && d & c == c))
        .collect();
    let covered = children.iter().fold(0, |a, c| a | c);
    let mut items: Vec<u64> = children;
    let mut rest = mask & !covered;
    while rest != 0 {
        let bit = rest & rest.wrapping_neg();
        items.push(bit);
        rest &= !bit;
    }
    items.sort_by_key(|m| m.trailing_zeros());
    out.push('(');
    for (i, &item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        if item.count_ones() == 1 {
            out.push_str(&(item.trailing_zeros() + 1).to_string());
        } else {
            write_node(item, clades, sep, out);
        }
    }
    out.push(')');
}

fn check_taxa(n_taxa: usize, outgroup: usize) -> Result<()> {
    if !(4..=MAX_TAXA).contains(&n_taxa) {
        return Err(Error::Domain(format!("{n_taxa} taxa (supported: 4..={MAX_TAXA})")));
    }
    if outgroup == 0 || outgroup > n_taxa {
        return Err(Error::Config(format!("outgroup {outgroup} is not a taxon of 1..={n_taxa}")));
    }
    Ok(())
}

/// Parses a topology with the highest-numbered taxon as outgroup.
pub fn parse_topology(text: &str, n_taxa: usize) -> Result<Topology> {
    parse_topology_with_outgroup(text, n_taxa, n_taxa)
}

pub fn parse_topology_with_outgroup(text: &str, n_taxa: usize, outgroup: usize) -> Result<Topology> {
    check_taxa(n_taxa, outgroup)?;
    let multi_digit = text.contains(',') || n_taxa > 9;
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut stack: Vec<u64> = Vec::new();
    let mut seen = 0u64;
    let mut clades = Vec::new();
    let mut root = None;
    let err = |p: usize, m: String| Error::parse(1, p + 1, m);
    while pos < chars.len() {
        let c = chars[pos];
        match c {
            '(' => {
                if root.is_some() {
                    return Err(err(pos, "text after the closing parenthesis".into()));
                }
                stack.push(0);
                pos += 1;
            }
            ')' => {
                let node = stack.pop().ok_or_else(|| err(pos, "unbalanced ')'".into()))?;
                if node == 0 {
                    return Err(err(pos, "empty parentheses".into()));
                }
                match stack.last_mut() {
                    Some(parent) => {
                        *parent |= node;
                        clades.push(node);
                    }
                    None => root = Some(node),
                }
                pos += 1;
            }
            ',' | ' ' | '\t' | ';' => pos += 1,
            d if d.is_ascii_digit() => {
                let start = pos;
                pos += 1;
                if multi_digit {
                    while pos < chars.len() && chars[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
                let label: String = chars[start..pos].iter().collect();
                let taxon: usize = label.parse().map_err(|_| err(start, format!("bad taxon '{label}'")))?;
                if taxon == 0 || taxon > n_taxa {
                    return Err(err(start, format!("taxon {taxon} outside 1..={n_taxa}")));
                }
                let bit = 1u64 << (taxon - 1);
                if seen & bit != 0 {
                    return Err(err(start, format!("taxon {taxon} appears twice")));
                }
                seen |= bit;
                let parent = stack
                    .last_mut()
                    .ok_or_else(|| err(start, "taxon outside parentheses".into()))?;
                *parent |= bit;
            }
            other => return Err(err(pos, format!("unexpected character '{other}'"))),
        }
    }
    if !stack.is_empty() || root.is_none() {
        return Err(err(chars.len(), "unbalanced '('".into()));
    }
    if seen != full_mask(n_taxa) {
        let missing: Vec<String> = (0..n_taxa)
            .filter(|i| seen >> i & 1 == 0)
            .map(|i| (i + 1).to_string())
            .collect();
        return Err(err(chars.len(), format!("missing taxa {}", missing.join(","))));
    }
    let splits = clades
        .into_iter()
        .filter_map(|m| EdgePartition::new(m, n_taxa, outgroup));
    Topology::from_splits(n_taxa, outgroup, splits)
}

/// Reads one topology per line; blank lines and `#` comments are skipped.
/// `N` is taken from the first topology when not given.
pub fn read_topology_list<R: BufRead>(
    source: R,
    n_taxa: Option<usize>,
    outgroup: Option<usize>,
) -> Result<Vec<Topology>> {
    let mut out = Vec::new();
    let mut n = n_taxa;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let taxa = *n.get_or_insert_with(|| count_taxa(text));
        let og = outgroup.unwrap_or(taxa);
        let topo = parse_topology_with_outgroup(text, taxa, og).map_err(|e| match e {
            Error::Parse { column, message, .. } => Error::Parse {
                line: idx + 1,
                column: column + (line.len() - line.trim_start().len()),
                message,
            },
            other => other,
        })?;
        out.push(topo);
    }
    Ok(out)
}

fn count_taxa(text: &str) -> usize {
    if text.contains(',') {
        text.split(|c: char| !c.is_ascii_digit()).filter(|s| !s.is_empty()).count()
    } else {
        text.chars().filter(char::is_ascii_digit).count()
    }
}

/// Edges with the indices of the trees containing them, ordered by first
/// appearance (tree order, then split order within a tree).
pub fn associate(trees: &[Topology]) -> Vec<(EdgePartition, Vec<usize>)> {
    let mut out: Vec<(EdgePartition, Vec<usize>)> = Vec::new();
    for (i, t) in trees.iter().enumerate() {
        for s in t.splits() {
            match out.iter_mut().find(|(e, _)| e == s) {
                Some((_, members)) => members.push(i),
                None => out.push((*s, vec![i])),
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionTarget {
    Tree,
    Edge,
}

impl std::str::FromStr for RegionTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" | "trees" => Ok(RegionTarget::Tree),
            "edge" | "edges" => Ok(RegionTarget::Edge),
            other => Err(Error::Config(format!("unknown target '{other}' (tree or edge)"))),
        }
    }
}

/// Number of regions, regions that can be selected, and regions whose
/// hypothesis is true.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionCounts {
    pub all: u128,
    pub select: u128,
    pub true_: u128,
}

/// `(2m - 5)!!` unrooted resolved topologies on `m` leaves (1 for `m <= 3`).
pub fn n_unrooted_trees(m: usize) -> Option<u128> {
    (4..=m as u128).try_fold(1u128, |acc, i| acc.checked_mul(2 * i - 5))
}

pub fn region_counts(
    n_taxa: usize,
    target: RegionTarget,
    mode: crate::TestMode,
) -> Result<RegionCounts> {
    if n_taxa < 4 {
        return Err(Error::Domain(format!("region counts need N >= 4, got {n_taxa}")));
    }
    let overflow = || Error::Overflow(format!("region counts for N = {n_taxa} exceed 128 bits"));
    let (all, inside) = match target {
        RegionTarget::Tree => (n_unrooted_trees(n_taxa).ok_or_else(overflow)?, 1),
        RegionTarget::Edge => {
            let p = 1u128.checked_shl(n_taxa as u32 - 1).filter(|_| n_taxa <= 128).ok_or_else(overflow)?;
            (p - (n_taxa as u128 + 1), n_taxa as u128 - 3)
        }
    };
    let select = match mode {
        crate::TestMode::Inside => inside,
        crate::TestMode::Outside => all - inside,
    };
    Ok(RegionCounts {
        all,
        select,
        true_: all - select,
    })
}

/// All resolved unrooted topologies on `N <= 8` taxa, by stepwise insertion
/// of taxa `4..=N` onto every edge.
pub fn enumerate_topologies(n_taxa: usize) -> Result<Vec<Topology>> {
    enumerate_topologies_with_outgroup(n_taxa, n_taxa)
}

pub fn enumerate_topologies_with_outgroup(n_taxa: usize, outgroup: usize) -> Result<Vec<Topology>> {
    if n_taxa > MAX_ENUMERATE {
        return Err(Error::Precondition(format!(
            "refusing to enumerate topologies for N = {n_taxa} > {MAX_ENUMERATE}"
        )));
    }
    check_taxa(n_taxa, outgroup)?;
    // every edge is stored as the side away from taxon 1
    let mut trees: Vec<Vec<u64>> = vec![vec![0b010, 0b100, 0b110]];
    for k in 3..n_taxa {
        let bit = 1u64 << k;
        let mut next = Vec::with_capacity(trees.len() * (2 * k - 1));
        for edges in &trees {
            for &e in edges {
                let mut grown: Vec<u64> = edges
                    .iter()
                    .map(|&f| if f != e && e & f == e { f | bit } else { f })
                    .collect();
                grown.push(e | bit);
                grown.push(bit);
                next.push(grown);
            }
        }
        trees = next;
    }
    trees
        .into_iter()
        .map(|edges| {
            let splits = edges.into_iter().filter_map(|m| EdgePartition::new(m, n_taxa, outgroup));
            Topology::from_splits(n_taxa, outgroup, splits)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::TestMode;

    // topologies T1..T20 with their edges as printed for the six-taxon data
    const TABLE: [(&str, [&str; 3]); 20] = [
        ("(((1(23))4)56)", ["E1", "E2", "E3"]),
        ("((1((23)4))56)", ["E1", "E2", "E4"]),
        ("(((14)(23))56)", ["E1", "E2", "E5"]),
        ("((1(23))(45)6)", ["E1", "E3", "E6"]),
        ("(1((23)(45))6)", ["E1", "E6", "E7"]),
        ("(1(((23)4)5)6)", ["E1", "E4", "E7"]),
        ("((1(45))(23)6)", ["E1", "E6", "E8"]),
        ("((15)((23)4)6)", ["E1", "E4", "E9"]),
        ("(((1(23))5)46)", ["E1", "E3", "E10"]),
        ("(((15)4)(23)6)", ["E1", "E8", "E9"]),
        ("(((14)5)(23)6)", ["E1", "E5", "E8"]),
        ("(((15)(23))46)", ["E1", "E9", "E10"]),
        ("(1(((23)5)4)6)", ["E1", "E7", "E11"]),
        ("((14)((23)5)6)", ["E1", "E5", "E11"]),
        ("((1((23)5))46)", ["E1", "E10", "E11"]),
        ("((((13)2)4)56)", ["E2", "E3", "E12"]),
        ("((((12)3)4)56)", ["E2", "E3", "E13"]),
        ("(((13)2)(45)6)", ["E3", "E6", "E12"]),
        ("(((12)3)(45)6)", ["E3", "E6", "E13"]),
        ("(((1(45))2)36)", ["E6", "E8", "E14"]),
    ];

    const EDGES: [(&str, &str); 14] = [
        ("E1", "-++---"),
        ("E2", "++++--"),
        ("E3", "+++---"),
        ("E4", "-+++--"),
        ("E5", "+--+--"),
        ("E6", "---++-"),
        ("E7", "-++++-"),
        ("E8", "+--++-"),
        ("E9", "+---+-"),
        ("E10", "+++-+-"),
        ("E11", "-++-+-"),
        ("E12", "+-+---"),
        ("E13", "++----"),
        ("E14", "++-++-"),
    ];

    fn edge(name: &str) -> EdgePartition {
        let pattern = EDGES.iter().find(|(n, _)| *n == name).unwrap().1;
        EdgePartition::from_display(pattern, 6).unwrap()
    }

    fn table_trees() -> Vec<Topology> {
        TABLE.iter().map(|(t, _)| parse_topology(t, 6).unwrap()).collect()
    }

    #[test]
    fn table_topologies_have_listed_edges() {
        for (text, names) in TABLE {
            let t = parse_topology(text, 6).unwrap();
            let expected: BTreeSet<EdgePartition> = names.iter().map(|n| edge(n)).collect();
            assert_eq!(t.splits, expected, "{text}");
            assert!(t.is_resolved());
        }
    }

    #[test]
    fn association_matches_table() {
        let trees = table_trees();
        let map = associate(&trees);
        let members = |name: &str| map.iter().find(|(e, _)| *e == edge(name)).unwrap().1.clone();
        assert_eq!(members("E1"), (0..15).collect::<Vec<_>>());
        assert_eq!(members("E2"), vec![0, 1, 2, 15, 16]);
        // restricted to the 15 best trees, E2 is shared by T1..T3 only
        let best = associate(&trees[..15]);
        let e2 = best.iter().find(|(e, _)| *e == edge("E2")).unwrap();
        assert_eq!(e2.1, vec![0, 1, 2]);
        // first-appearance order
        assert_eq!(map[0].0, edge("E1"));
        assert_eq!(map.len(), 14);

        let single = associate(&trees[6..7]);
        assert_eq!(single.len(), 3);
        assert!(single.iter().all(|(_, m)| m == &vec![0]));
    }

    #[test]
    fn split_display() {
        assert_eq!(edge("E1").display(), "-++---");
        assert_eq!(edge("E1").taxa(), vec![2, 3]);
        // complementing through the outgroup
        let e = EdgePartition::new(0b111001, 6, 6).unwrap();
        assert_eq!(e.display(), "-++---");
        assert!(EdgePartition::new(0b000001, 6, 6).is_none());
        assert!(EdgePartition::new(0b011111, 6, 6).is_none());
        assert!(EdgePartition::from_display("-+----", 6).is_err());
        assert!(EdgePartition::from_display("-+x---", 6).is_err());
    }

    #[test]
    fn star_and_errors() {
        let star = parse_topology("(123456)", 6).unwrap();
        assert_eq!(star.splits().count(), 0);
        assert_eq!(star.text(), "(123456)");
        for bad in ["((123456)", "(123456))", "(12345)", "(1234556)", "(1234567)", "(12x3456)", "()", "(12)(3456)"] {
            assert!(matches!(parse_topology(bad, 6), Err(Error::Parse { .. })), "{bad}");
        }
    }

    #[test]
    fn canonical_text() {
        let t = parse_topology("(6(5(4((32)1))))", 6).unwrap();
        assert_eq!(t.text(), "(((1(23))4)56)");
        assert_eq!(t, parse_topology("(((1(23))4)56)", 6).unwrap());
        let t7 = parse_topology("((23)6(1(54)))", 6).unwrap();
        assert_eq!(t7.text(), "((1(45))(23)6)");
        for (text, _) in TABLE {
            let t = parse_topology(text, 6).unwrap();
            assert_eq!(parse_topology(&t.text(), 6).unwrap(), t);
        }
    }

    #[test]
    fn many_taxa_use_commas() {
        let text = "((1,2),(10,11),3,4,5,6,7,8,9,12)";
        let t = parse_topology(text, 12).unwrap();
        assert_eq!(t.splits().count(), 2);
        assert_eq!(parse_topology(&t.text(), 12).unwrap(), t);
        assert_eq!(count_taxa(text), 12);
    }

    #[test]
    fn topology_list_file() {
        let text = "# trees\n(((1(23))4)56)\n\n((1((23)4))56)\n";
        let trees = read_topology_list(text.as_bytes(), None, None).unwrap();
        assert_eq!(trees.len(), 2);
        let bad = read_topology_list("(((1(23))4)56)\n((1((23)4))5)\n".as_bytes(), None, None);
        assert!(matches!(bad, Err(Error::Parse { line: 2, .. })), "{bad:?}");
    }

    #[test]
    fn counts_table() {
        let rc = |n, t, m| region_counts(n, t, m).unwrap();
        assert_eq!(rc(6, RegionTarget::Tree, TestMode::Inside), RegionCounts { all: 105, select: 1, true_: 104 });
        assert_eq!(rc(6, RegionTarget::Tree, TestMode::Outside), RegionCounts { all: 105, select: 104, true_: 1 });
        assert_eq!(rc(6, RegionTarget::Edge, TestMode::Inside), RegionCounts { all: 25, select: 3, true_: 22 });
        assert_eq!(rc(6, RegionTarget::Edge, TestMode::Outside), RegionCounts { all: 25, select: 22, true_: 3 });
        assert_eq!(rc(4, RegionTarget::Tree, TestMode::Inside), RegionCounts { all: 3, select: 1, true_: 2 });
        assert_eq!(rc(4, RegionTarget::Edge, TestMode::Outside).all, 3);
        assert!(matches!(region_counts(3, RegionTarget::Tree, TestMode::Inside), Err(Error::Domain(_))));
        assert_eq!(n_unrooted_trees(10), Some(2_027_025));
        assert!(region_counts(60, RegionTarget::Tree, TestMode::Inside).is_err());
    }

    #[test]
    fn enumeration_counts() {
        for n in 4..=8 {
            let all = enumerate_topologies(n).unwrap();
            let expected = region_counts(n, RegionTarget::Tree, TestMode::Inside).unwrap().all;
            assert_eq!(all.len() as u128, expected, "N = {n}");
            assert!(all.iter().all(Topology::is_resolved));
            let distinct: BTreeSet<String> = all.iter().map(Topology::text).collect();
            assert_eq!(distinct.len(), all.len(), "duplicate topologies for N = {n}");
            let edges: BTreeSet<EdgePartition> = all.iter().flat_map(|t| t.splits().copied()).collect();
            let expected = region_counts(n, RegionTarget::Edge, TestMode::Inside).unwrap().all;
            assert_eq!(edges.len() as u128, expected, "N = {n}");
        }
        assert!(enumerate_topologies(9).is_err());
        assert!(enumerate_topologies(3).is_err());
    }

    #[test]
    fn split_frequency_in_enumeration() {
        for n in 4..=6 {
            let all = enumerate_topologies(n).unwrap();
            for (e, members) in associate(&all) {
                let a = e.mask().count_ones() as usize;
                let b = n - a;
                let expected = n_unrooted_trees(a + 1).unwrap() * n_unrooted_trees(b + 1).unwrap();
                assert_eq!(members.len() as u128, expected, "{e}");
            }
        }
    }

    #[test]
    fn table_trees_are_enumerated() {
        let all: std::collections::HashSet<Topology> = enumerate_topologies(6).unwrap().into_iter().collect();
        assert!(table_trees().iter().all(|t| all.contains(t)));
    }

    #[test]
    fn outgroup_choice() {
        let t = parse_topology_with_outgroup("(((1(23))4)56)", 6, 1).unwrap();
        assert_eq!(t.splits().count(), 3);
        assert!(t.splits().all(|s| s.mask() & 1 == 0));
        assert!(parse_topology_with_outgroup("(((1(23))4)56)", 6, 7).is_err());
    }
}
