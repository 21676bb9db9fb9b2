//! Line-oriented text formats for instances, matchings, ordered graphs and
//! functional graphs. `#` starts a comment line; tokens are
//! whitespace-separated.

use std::fmt::Write as _;

use thiserror::Error;

use crate::cycles::FunctionalGraph;
use crate::instance::{AgentId, HouseId, Instance, InstanceError, InstanceKind, Matching, MatchingError, PreferenceList};
use crate::lfmm::{GraphError, OrderedGraph};
use crate::sim::NodeId;

#[derive(Error, Debug)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Instance {
        line: usize,
        #[source]
        source: InstanceError,
    },
    #[error("{0}")]
    InstanceFinal(#[from] InstanceError),
    #[error("line {line}: {source}")]
    Matching {
        line: usize,
        #[source]
        source: MatchingError,
    },
    #[error("{0}")]
    Graph(#[from] GraphError),
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T, ParseError> {
    tok.parse()
        .map_err(|_| syntax(line, format!("expected {what}, got `{tok}`")))
}

/// Content lines with their 1-based line numbers, comments and blanks removed.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            None
        } else {
            Some((i + 1, raw.split_whitespace().collect()))
        }
    })
}

/// Parses an instance file and validates all instance invariants.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| syntax(0, "empty input, expected a header line"))?;

    let (kind, n_agents, n_houses) = match header.as_slice() {
        ["market", n] => {
            let n: usize = parse_num(hline, n, "agent count")?;
            (InstanceKind::Market, n, n)
        }
        ["allocation", na, nh] => (
            InstanceKind::Allocation,
            parse_num(hline, na, "agent count")?,
            parse_num(hline, nh, "house count")?,
        ),
        _ => {
            return Err(syntax(
                hline,
                "expected `market <n>` or `allocation <nAgents> <nHouses>`",
            ))
        }
    };

    let mut prefs: Vec<Option<(usize, PreferenceList)>> = vec![None; n_agents];
    let mut endow: Vec<Option<HouseId>> = vec![None; n_agents];

    for (lno, toks) in lines {
        match toks.as_slice() {
            ["agent", id, "prefs", rest @ ..] => {
                let a: u32 = parse_num(lno, id, "agent id")?;
                let a = AgentId(a);
                if a.index() >= n_agents {
                    return Err(ParseError::Instance {
                        line: lno,
                        source: InstanceError::AgentOutOfRange { agent: a, n_agents },
                    });
                }
                if prefs[a.index()].is_some() {
                    return Err(syntax(lno, format!("duplicate `agent {}` line", a.0)));
                }
                let mut houses = Vec::with_capacity(rest.len());
                for tok in rest {
                    houses.push(HouseId(parse_num(lno, tok, "house id")?));
                }
                let list = PreferenceList::new(houses)
                    .map_err(|source| ParseError::Instance { line: lno, source })?;
                prefs[a.index()] = Some((lno, list));
            }
            ["endow", id, house] => {
                if kind != InstanceKind::Market {
                    return Err(syntax(lno, "endow line in an allocation instance"));
                }
                let a: u32 = parse_num(lno, id, "agent id")?;
                let a = AgentId(a);
                if a.index() >= n_agents {
                    return Err(ParseError::Instance {
                        line: lno,
                        source: InstanceError::AgentOutOfRange { agent: a, n_agents },
                    });
                }
                if endow[a.index()].is_some() {
                    return Err(syntax(lno, format!("duplicate `endow {}` line", a.0)));
                }
                endow[a.index()] = Some(HouseId(parse_num(lno, house, "house id")?));
            }
            _ => return Err(syntax(lno, "expected an `agent` or `endow` line")),
        }
    }

    let mut lists = Vec::with_capacity(n_agents);
    for (i, slot) in prefs.into_iter().enumerate() {
        match slot {
            Some((_, list)) => lists.push(list),
            None if kind == InstanceKind::Allocation => lists.push(PreferenceList::default()),
            None => {
                return Err(syntax(
                    0,
                    format!("missing `agent {i}` preference line in market instance"),
                ))
            }
        }
    }

    match kind {
        InstanceKind::Allocation => Ok(Instance::allocation(n_agents, n_houses, lists)?),
        InstanceKind::Market => {
            let mut endowment = Vec::with_capacity(n_agents);
            for (i, slot) in endow.into_iter().enumerate() {
                endowment.push(slot.ok_or_else(|| syntax(0, format!("missing `endow {i}` line")))?);
            }
            Ok(Instance::market(lists, endowment)?)
        }
    }
}

/// Serializes an instance; `parse_instance` of the output is structurally
/// equal to the input.
pub fn serialize_instance(inst: &Instance) -> String {
    let mut out = String::new();
    match inst.kind() {
        InstanceKind::Market => {
            let _ = writeln!(out, "market {}", inst.n_agents());
        }
        InstanceKind::Allocation => {
            let _ = writeln!(out, "allocation {} {}", inst.n_agents(), inst.n_houses());
        }
    }
    for a in inst.agents() {
        let _ = write!(out, "agent {} prefs", a.0);
        for h in inst.prefs(a).houses() {
            let _ = write!(out, " {}", h.0);
        }
        out.push('\n');
    }
    if inst.kind() == InstanceKind::Market {
        for a in inst.agents() {
            let _ = writeln!(out, "endow {} {}", a.0, inst.endowed(a).unwrap().0);
        }
    }
    out
}

/// Parses a matching file: zero or more `match <agentId> <houseId>` lines.
pub fn parse_matching(text: &str, n_agents: usize) -> Result<Matching, ParseError> {
    let mut m = Matching::empty(n_agents);
    for (lno, toks) in content_lines(text) {
        match toks.as_slice() {
            ["match", a, h] => {
                let a = AgentId(parse_num(lno, a, "agent id")?);
                let h = HouseId(parse_num(lno, h, "house id")?);
                if a.index() >= n_agents {
                    return Err(ParseError::Matching {
                        line: lno,
                        source: MatchingError::AgentOutOfRange { agent: a },
                    });
                }
                if m.house_of(a).is_some() {
                    return Err(syntax(lno, format!("agent {} matched twice", a.0)));
                }
                m.assign(a, h)
                    .map_err(|source| ParseError::Matching { line: lno, source })?;
            }
            _ => return Err(syntax(lno, "expected `match <agentId> <houseId>`")),
        }
    }
    Ok(m)
}

/// Serializes a matching; unmatched agents are omitted.
pub fn serialize_matching(m: &Matching) -> String {
    let mut out = String::new();
    for (a, h) in m.pairs() {
        let _ = writeln!(out, "match {} {}", a.0, h.0);
    }
    out
}

/// Parses an ordered graph: `graph <nVertices> <nEdges>` then one
/// `edge <u> <v>` line per edge, in ascending order position.
pub fn parse_ordered_graph(text: &str) -> Result<OrderedGraph, ParseError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| syntax(0, "empty input, expected `graph <nVertices> <nEdges>`"))?;
    let (n, m) = match header.as_slice() {
        ["graph", n, m] => (
            parse_num(hline, n, "vertex count")?,
            parse_num::<usize>(hline, m, "edge count")?,
        ),
        _ => return Err(syntax(hline, "expected `graph <nVertices> <nEdges>`")),
    };
    let mut edges = Vec::with_capacity(m);
    for (lno, toks) in lines {
        match toks.as_slice() {
            ["edge", u, v] => edges.push((
                parse_num(lno, u, "vertex id")?,
                parse_num(lno, v, "vertex id")?,
            )),
            _ => return Err(syntax(lno, "expected `edge <u> <v>`")),
        }
    }
    if edges.len() != m {
        return Err(syntax(
            0,
            format!("header declares {m} edges, found {}", edges.len()),
        ));
    }
    Ok(OrderedGraph::new(n, edges)?)
}

pub fn serialize_ordered_graph(g: &OrderedGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph {} {}", g.n_vertices(), g.n_edges());
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "edge {u} {v}");
    }
    out
}

/// Parses a functional graph: `fgraph <n>` then one `succ <node> <node>`
/// line per node.
pub fn parse_functional_graph(text: &str) -> Result<FunctionalGraph, ParseError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| syntax(0, "empty input, expected `fgraph <n>`"))?;
    let n: usize = match header.as_slice() {
        ["fgraph", n] => parse_num(hline, n, "node count")?,
        _ => return Err(syntax(hline, "expected `fgraph <n>`")),
    };
    let mut succ: Vec<Option<NodeId>> = vec![None; n];
    for (lno, toks) in lines {
        match toks.as_slice() {
            ["succ", u, v] => {
                let u: usize = parse_num(lno, u, "node id")?;
                let v: usize = parse_num(lno, v, "node id")?;
                if u >= n || v >= n {
                    return Err(syntax(lno, format!("node id out of range, n = {n}")));
                }
                if succ[u].is_some() {
                    return Err(syntax(lno, format!("duplicate `succ {u}` line")));
                }
                succ[u] = Some(NodeId(v));
            }
            _ => return Err(syntax(lno, "expected `succ <node> <node>`")),
        }
    }
    let mut out = Vec::with_capacity(n);
    for (u, s) in succ.into_iter().enumerate() {
        out.push(s.ok_or_else(|| syntax(0, format!("missing `succ {u}` line")))?);
    }
    Ok(FunctionalGraph::new(out))
}

pub fn serialize_functional_graph(g: &FunctionalGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "fgraph {}", g.len());
    for u in 0..g.len() {
        let _ = writeln!(out, "succ {} {}", u, g.succ(NodeId(u)).0);
    }
    out
}
