//! Directed link graph with per-channel packet reception ratios.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{Channel, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    /// PRR on every channel without an override.
    pub prr: f64,
    pub per_channel: BTreeMap<Channel, f64>,
}

impl Link {
    pub fn prr_on(&self, ch: Channel) -> f64 {
        self.per_channel.get(&ch).copied().unwrap_or(self.prr)
    }

    fn is_edge(&self) -> bool {
        self.prr > 0.0 || self.per_channel.values().any(|&p| p > 0.0)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Topology {
    node_count: usize,
    links: Vec<Link>,
    index: BTreeMap<(NodeId, NodeId), usize>,
    inbound: Vec<Vec<usize>>,
    outbound: Vec<Vec<usize>>,
    /// Unit-square coordinates, only set by the geometric generators.
    pub positions: Option<Vec<(f64, f64)>>,
    pub symmetric: bool,
}

impl Topology {
    pub fn new(node_count: usize) -> Self {
        Topology {
            node_count,
            links: Vec::new(),
            index: BTreeMap::new(),
            inbound: vec![Vec::new(); node_count],
            outbound: vec![Vec::new(); node_count],
            positions: None,
            symmetric: false,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count).map(NodeId::from)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.node_count
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownNode(id))
        }
    }

    /// Adds (or replaces) the directed link `src -> dst`.
    pub fn set_link(&mut self, src: NodeId, dst: NodeId, prr: f64) -> Result<()> {
        self.check(src)?;
        self.check(dst)?;
        if src == dst {
            return Err(Error::Topology(format!("self-link on node {src}")));
        }
        if !(0.0..=1.0).contains(&prr) {
            return Err(Error::Topology(format!("PRR {prr} outside [0,1]")));
        }
        if let Some(&i) = self.index.get(&(src, dst)) {
            self.links[i].prr = prr;
        } else {
            let i = self.links.len();
            self.links.push(Link {
                src,
                dst,
                prr,
                per_channel: BTreeMap::new(),
            });
            self.index.insert((src, dst), i);
            self.outbound[src.index()].push(i);
            self.inbound[dst.index()].push(i);
        }
        Ok(())
    }

    pub fn set_bidirectional(&mut self, a: NodeId, b: NodeId, prr: f64) -> Result<()> {
        self.set_link(a, b, prr)?;
        self.set_link(b, a, prr)
    }

    /// Overrides the PRR of an existing link on one channel.
    pub fn set_channel_prr(&mut self, src: NodeId, dst: NodeId, ch: Channel, prr: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&prr) {
            return Err(Error::Topology(format!("PRR {prr} outside [0,1]")));
        }
        let i = *self
            .index
            .get(&(src, dst))
            .ok_or_else(|| Error::Topology(format!("no link {src} -> {dst}")))?;
        self.links[i].per_channel.insert(ch, prr);
        Ok(())
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, src: NodeId, dst: NodeId) -> Option<&Link> {
        self.index.get(&(src, dst)).map(|&i| &self.links[i])
    }

    /// PRR of `src -> dst` on `ch`; zero when there is no link.
    pub fn prr(&self, src: NodeId, dst: NodeId, ch: Channel) -> f64 {
        self.link(src, dst).map_or(0.0, |l| l.prr_on(ch))
    }

    /// Links arriving at `dst`.
    pub fn inbound(&self, dst: NodeId) -> impl Iterator<Item = &Link> {
        self.inbound[dst.index()].iter().map(|&i| &self.links[i])
    }

    /// Links leaving `src`.
    pub fn outbound(&self, src: NodeId) -> impl Iterator<Item = &Link> {
        self.outbound[src.index()].iter().map(|&i| &self.links[i])
    }

    /// Nodes reachable over one edge from `src`.
    pub fn neighbors(&self, src: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.outbound(src).filter(|l| l.is_edge()).map(|l| l.dst)
    }

    pub fn is_symmetric(&self) -> bool {
        self.links.iter().all(|l| match self.link(l.dst, l.src) {
            Some(r) => {
                r.prr == l.prr
                    && r.per_channel == l.per_channel
            }
            None => !l.is_edge(),
        })
    }

    /// BFS hop counts from `from`; `None` marks unreachable nodes.
    pub fn bfs(&self, from: NodeId) -> Result<Vec<Option<u32>>> {
        self.check(from)?;
        let mut dist = vec![None; self.node_count];
        dist[from.index()] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()].unwrap();
            for v in self.neighbors(u) {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    /// Shortest-path hop count, `Ok(None)` when `to` is unreachable.
    pub fn hop_distance(&self, from: NodeId, to: NodeId) -> Result<Option<u32>> {
        self.check(to)?;
        Ok(self.bfs(from)?[to.index()])
    }

    /// Largest hop distance from `from`, `None` if some node is unreachable.
    pub fn eccentricity(&self, from: NodeId) -> Result<Option<u32>> {
        let d = self.bfs(from)?;
        Ok(d.into_iter().try_fold(0, |acc, x| x.map(|x| acc.max(x))))
    }

    pub fn diameter(&self) -> Option<u32> {
        let mut best = 0;
        for n in self.nodes() {
            best = best.max(self.eccentricity(n).ok()??);
        }
        Some(best)
    }

    pub fn is_connected(&self) -> bool {
        self.node_count > 0 && self.diameter().is_some()
    }

    /// Parses a plain-text edge list: one `src dst prr` triple per line,
    /// `#` starts a comment. The node count is one past the largest id.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_id = 0usize;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::EdgeList { line: ln + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected `src dst prr`, got {} fields", fields.len())));
            }
            let src: u16 = fields[0].parse().map_err(|e| err(format!("src: {e}")))?;
            let dst: u16 = fields[1].parse().map_err(|e| err(format!("dst: {e}")))?;
            let prr: f64 = fields[2].parse().map_err(|e| err(format!("prr: {e}")))?;
            max_id = max_id.max(src as usize).max(dst as usize);
            edges.push((ln + 1, NodeId(src), NodeId(dst), prr));
        }
        if edges.is_empty() {
            return Err(Error::EdgeList { line: 0, msg: "no edges".into() });
        }
        let mut topo = Topology::new(max_id + 1);
        for (line, s, d, p) in edges {
            topo.set_link(s, d, p).map_err(|e| Error::EdgeList { line, msg: e.to_string() })?;
        }
        topo.symmetric = topo.is_symmetric();
        Ok(topo)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for l in &self.links {
            out.push_str(&format!("{} {} {}\n", l.src.0, l.dst.0, l.prr));
        }
        out
    }
}

fn check_prr(prr: f64) -> Result<()> {
    if prr > 0.0 && prr <= 1.0 {
        Ok(())
    } else {
        Err(Error::Topology(format!("PRR {prr} must lie in (0,1]")))
    }
}

/// Nodes `0..n` in a chain with bidirectional links between consecutive ids.
pub fn make_line_topology(n: usize, prr: f64) -> Result<Topology> {
    if n < 2 {
        return Err(Error::Topology(format!("line needs at least 2 nodes, got {n}")));
    }
    check_prr(prr)?;
    let mut t = Topology::new(n);
    for i in 1..n {
        t.set_bidirectional(NodeId::from(i - 1), NodeId::from(i), prr)?;
    }
    t.symmetric = true;
    t.positions = Some((0..n).map(|i| (i as f64 / (n - 1) as f64, 0.0)).collect());
    Ok(t)
}

/// Row-major grid, the coordinator at the top-left corner. With `diagonal`
/// each node also links to its four diagonal neighbours. `count` may trim the
/// last row.
pub fn make_grid_topology(
    rows: usize,
    cols: usize,
    count: Option<usize>,
    diagonal: bool,
    prr: f64,
) -> Result<Topology> {
    let n = count.unwrap_or(rows * cols);
    if rows == 0 || cols == 0 || n < 2 || n > rows * cols {
        return Err(Error::Topology(format!("bad grid {rows}x{cols} with {n} nodes")));
    }
    check_prr(prr)?;
    let mut t = Topology::new(n);
    let id = |r: usize, c: usize| r * cols + c;
    for r in 0..rows {
        for c in 0..cols {
            let a = id(r, c);
            if a >= n {
                continue;
            }
            let mut nbrs = vec![(r, c + 1), (r + 1, c)];
            if diagonal {
                nbrs.push((r + 1, c + 1));
                if c > 0 {
                    nbrs.push((r + 1, c - 1));
                }
            }
            for (rr, cc) in nbrs {
                if rr < rows && cc < cols && id(rr, cc) < n {
                    t.set_bidirectional(NodeId::from(a), NodeId::from(id(rr, cc)), prr)?;
                }
            }
        }
    }
    t.symmetric = true;
    t.positions = Some(
        (0..n)
            .map(|i| ((i % cols) as f64 / cols as f64, (i / cols) as f64 / rows as f64))
            .collect(),
    );
    Ok(t)
}

/// Seeded random geometric graph in the unit square. Samples are redrawn until
/// the graph is connected and its diameter is at most `max_diameter`.
pub fn make_random_geometric_topology(
    n: usize,
    radius: f64,
    prr: f64,
    max_diameter: Option<u32>,
    seed: u64,
) -> Result<Topology> {
    if n < 2 {
        return Err(Error::Topology(format!("need at least 2 nodes, got {n}")));
    }
    check_prr(prr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let mut t = Topology::new(n);
        for a in 0..n {
            for b in a + 1..n {
                let (dx, dy) = (pos[a].0 - pos[b].0, pos[a].1 - pos[b].1);
                if (dx * dx + dy * dy).sqrt() <= radius {
                    t.set_bidirectional(NodeId::from(a), NodeId::from(b), prr)?;
                }
            }
        }
        match t.diameter() {
            Some(d) if max_diameter.is_none_or(|m| d <= m) => {
                t.symmetric = true;
                t.positions = Some(pos);
                return Ok(t);
            }
            _ => continue,
        }
    }
    Err(Error::Topology(format!(
        "no connected geometric graph with n={n}, radius={radius} found"
    )))
}
