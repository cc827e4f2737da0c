use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse undirected bipartite graph between `n_visible` visible nodes and
/// `n_hidden` hidden nodes.
///
/// Indices are 0-based. Edges are stored visible-major and sorted by
/// `(visible, hidden)`; the position of an edge in that order is its *edge id*,
/// which is also the index of its weight in a model. A transposed index gives
/// O(deg) iteration from the hidden side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "EdgeList", try_from = "EdgeList")]
pub struct BipartiteGraph {
    n_visible: usize,
    n_hidden: usize,
    visible_offsets: Vec<usize>,
    visible_adj: Vec<usize>,
    hidden_offsets: Vec<usize>,
    hidden_adj: Vec<usize>,
    hidden_edge_ids: Vec<usize>,
}

/// Plain edge-list form used for serde.
#[derive(Serialize, Deserialize)]
struct EdgeList {
    n_visible: usize,
    n_hidden: usize,
    edges: Vec<(usize, usize)>,
}

impl From<BipartiteGraph> for EdgeList {
    fn from(g: BipartiteGraph) -> Self {
        EdgeList {
            n_visible: g.n_visible,
            n_hidden: g.n_hidden,
            edges: g.edges().collect(),
        }
    }
}

impl TryFrom<EdgeList> for BipartiteGraph {
    type Error = Error;
    fn try_from(e: EdgeList) -> Result<Self> {
        BipartiteGraph::from_edges(e.n_visible, e.n_hidden, e.edges)
    }
}

impl BipartiteGraph {
    /// Builds a graph from 0-based `(visible, hidden)` pairs. Duplicates are
    /// merged; out-of-range indices are rejected.
    pub fn from_edges<I>(n_visible: usize, n_hidden: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
        for &(i, j) in &edges {
            if i >= n_visible || j >= n_hidden {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) out of range for {n_visible}x{n_hidden} graph"
                )));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted_unique(n_visible, n_hidden, &edges))
    }

    fn from_sorted_unique(n_visible: usize, n_hidden: usize, edges: &[(usize, usize)]) -> Self {
        let mut visible_offsets = vec![0usize; n_visible + 1];
        let mut hidden_offsets = vec![0usize; n_hidden + 1];
        for &(i, j) in edges {
            visible_offsets[i + 1] += 1;
            hidden_offsets[j + 1] += 1;
        }
        for k in 0..n_visible {
            visible_offsets[k + 1] += visible_offsets[k];
        }
        for k in 0..n_hidden {
            hidden_offsets[k + 1] += hidden_offsets[k];
        }
        let visible_adj: Vec<usize> = edges.iter().map(|&(_, j)| j).collect();
        let mut hidden_adj = vec![0usize; edges.len()];
        let mut hidden_edge_ids = vec![0usize; edges.len()];
        let mut cursor = hidden_offsets.clone();
        // edges are visible-major, so each hidden list comes out sorted by visible index
        for (id, &(i, j)) in edges.iter().enumerate() {
            let slot = cursor[j];
            hidden_adj[slot] = i;
            hidden_edge_ids[slot] = id;
            cursor[j] += 1;
        }
        BipartiteGraph {
            n_visible,
            n_hidden,
            visible_offsets,
            visible_adj,
            hidden_offsets,
            hidden_adj,
            hidden_edge_ids,
        }
    }

    /// Complete bipartite graph K_{n_visible, n_hidden} (the dense RBM mask).
    pub fn complete(n_visible: usize, n_hidden: usize) -> Self {
        let edges: Vec<(usize, usize)> = (0..n_visible)
            .flat_map(|i| (0..n_hidden).map(move |j| (i, j)))
            .collect();
        Self::from_sorted_unique(n_visible, n_hidden, &edges)
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_edges(&self) -> usize {
        self.visible_adj.len()
    }

    /// True when every possible visible/hidden pair is connected.
    pub fn is_complete(&self) -> bool {
        self.n_edges() == self.n_visible * self.n_hidden
    }

    /// Hidden neighbours of visible node `i`, ascending. The k-th entry has
    /// edge id `visible_edge_range(i).start + k`.
    pub fn visible_neighbors(&self, i: usize) -> &[usize] {
        &self.visible_adj[self.visible_offsets[i]..self.visible_offsets[i + 1]]
    }

    pub fn visible_edge_range(&self, i: usize) -> std::ops::Range<usize> {
        self.visible_offsets[i]..self.visible_offsets[i + 1]
    }

    /// Visible neighbours of hidden node `j`, ascending.
    pub fn hidden_neighbors(&self, j: usize) -> &[usize] {
        &self.hidden_adj[self.hidden_offsets[j]..self.hidden_offsets[j + 1]]
    }

    /// Edge ids of hidden node `j`, aligned with [`Self::hidden_neighbors`].
    pub fn hidden_edge_ids(&self, j: usize) -> &[usize] {
        &self.hidden_edge_ids[self.hidden_offsets[j]..self.hidden_offsets[j + 1]]
    }

    pub fn visible_degree(&self, i: usize) -> usize {
        self.visible_offsets[i + 1] - self.visible_offsets[i]
    }

    pub fn hidden_degree(&self, j: usize) -> usize {
        self.hidden_offsets[j + 1] - self.hidden_offsets[j]
    }

    pub fn visible_degrees(&self) -> Vec<usize> {
        (0..self.n_visible).map(|i| self.visible_degree(i)).collect()
    }

    pub fn hidden_degrees(&self) -> Vec<usize> {
        (0..self.n_hidden).map(|j| self.hidden_degree(j)).collect()
    }

    /// Edge id of `(i, j)` if present.
    pub fn edge_id(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n_visible {
            return None;
        }
        self.visible_neighbors(i)
            .binary_search(&j)
            .ok()
            .map(|k| self.visible_offsets[i] + k)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_id(i, j).is_some()
    }

    /// All edges in edge-id order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_visible).flat_map(move |i| self.visible_neighbors(i).iter().map(move |&j| (i, j)))
    }

    /// Relabels visible nodes: node `i` becomes `perm[i]`.
    pub fn relabel_visible(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n_visible)?;
        let edges = self.edges().map(|(i, j)| (perm[i], j));
        Self::from_edges(self.n_visible, self.n_hidden, edges)
    }

    /// Relabels hidden nodes: node `j` becomes `perm[j]`.
    pub fn relabel_hidden(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n_hidden)?;
        let edges = self.edges().map(|(i, j)| (i, perm[j]));
        Self::from_edges(self.n_visible, self.n_hidden, edges)
    }

    /// Subgraph keeping only the edges whose id satisfies `keep`.
    pub fn retain_edges(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let edges: Vec<(usize, usize)> = self
            .edges()
            .enumerate()
            .filter(|(id, _)| keep(*id))
            .map(|(_, e)| e)
            .collect();
        Self::from_sorted_unique(self.n_visible, self.n_hidden, &edges)
    }

    /// Writes the text format: a `bipartite <n_v> <n_h> <|E|>` header and one
    /// 1-based `i j` pair per line in `(i, j)` order.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bipartite {} {} {}", self.n_visible, self.n_hidden, self.n_edges())?;
        for (i, j) in self.edges() {
            writeln!(w, "{} {}", i + 1, j + 1)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Reads the text format. Lines starting with `#` are comments.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| !matches!(l, Ok(s) if s.trim_start().starts_with('#')));
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            row: 1,
            col: 1,
            msg: "empty graph file".into(),
        })?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "bipartite" {
            return Err(Error::Parse {
                row: 1,
                col: 1,
                msg: format!("expected `bipartite <n_v> <n_h> <edges>`, got `{header}`"),
            });
        }
        let num = |col: usize| -> Result<usize> {
            fields[col].parse().map_err(|_| Error::Parse {
                row: 1,
                col: col + 1,
                msg: format!("not an integer: `{}`", fields[col]),
            })
        };
        let (n_v, n_h, n_e) = (num(1)?, num(2)?, num(3)?);
        let mut edges = Vec::with_capacity(n_e);
        for (row, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut next = |col: usize| -> Result<usize> {
                let tok = parts.next().ok_or_else(|| Error::Parse {
                    row: row + 1,
                    col,
                    msg: "missing field".into(),
                })?;
                let v: usize = tok.parse().map_err(|_| Error::Parse {
                    row: row + 1,
                    col,
                    msg: format!("not an integer: `{tok}`"),
                })?;
                if v == 0 {
                    return Err(Error::Parse {
                        row: row + 1,
                        col,
                        msg: "indices are 1-based".into(),
                    });
                }
                Ok(v - 1)
            };
            let i = next(1)?;
            let j = next(2)?;
            edges.push((i, j));
        }
        if edges.len() != n_e {
            return Err(Error::Parse {
                row: 1,
                col: 4,
                msg: format!("header declares {n_e} edges, found {}", edges.len()),
            });
        }
        Self::from_edges(n_v, n_h, edges)
    }

    /// Binary format: magic `XBMG`, u32 version, three u64 counts, then u32
    /// `(i, j)` pairs; all little-endian, 0-based.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        for n in [self.n_visible, self.n_hidden, self.n_edges()] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for (i, j) in self.edges() {
            w.write_all(&(i as u32).to_le_bytes())?;
            w.write_all(&(j as u32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let mut cur = ByteCursor::new(&buf);
        if cur.take(4)? != BINARY_MAGIC {
            return Err(Error::Format {
                offset: 0,
                msg: "bad graph magic".into(),
            });
        }
        let version = cur.u32()?;
        if version != BINARY_VERSION {
            return Err(Error::Format {
                offset: 4,
                msg: format!("unsupported graph format version {version}"),
            });
        }
        let n_v = cur.u64()? as usize;
        let n_h = cur.u64()? as usize;
        let n_e = cur.u64()? as usize;
        let mut edges = Vec::with_capacity(n_e.min(buf.len() / 8));
        for _ in 0..n_e {
            let i = cur.u32()? as usize;
            let j = cur.u32()? as usize;
            edges.push((i, j));
        }
        Self::from_edges(n_v, n_h, edges)
    }
}

const BINARY_MAGIC: &[u8; 4] = b"XBMG";
const BINARY_VERSION: u32 = 1;

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::ShapeMismatch {
            what: "permutation",
            got: perm.len(),
            expected: n,
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
    }
    Ok(())
}

struct ByteCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        ByteCursor { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: "truncated input".into(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
