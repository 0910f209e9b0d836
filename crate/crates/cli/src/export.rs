//! Edge lists and DOT graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use varfdr::debias::SeVariant;
use varfdr::testing::{DiscoverySet, NetworkEdge, Procedure};

use crate::error::{CliError, CliResult};

/// One directed edge `source -> target`, aggregated over lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub lags: Vec<usize>,
    pub t_values: Vec<f64>,
    pub signs: Vec<i8>,
    pub estimates: Vec<f64>,
    pub threshold: f64,
    pub procedure: Procedure,
    pub se_variant: SeVariant,
}

impl EdgeRecord {
    pub fn from_network(
        edges: &[NetworkEdge],
        names: &[String],
        set: &DiscoverySet,
        se_variant: SeVariant,
    ) -> Vec<EdgeRecord> {
        edges
            .iter()
            .map(|e| EdgeRecord {
                source: names[e.source].clone(),
                target: names[e.target].clone(),
                lags: e.lags.clone(),
                t_values: e.t_values.clone(),
                signs: e.signs.clone(),
                estimates: e.estimates.clone(),
                threshold: set.threshold.t0,
                procedure: set.procedure,
                se_variant,
            })
            .collect()
    }

    /// Sign at the lag with the largest `|t|`.
    pub fn dominant_sign(&self) -> i8 {
        self.t_values
            .iter()
            .zip(&self.signs)
            .max_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
            .map(|(_, s)| *s)
            .unwrap_or(0)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FlatEdge {
    source: String,
    target: String,
    lags: String,
    t_values: String,
    signs: String,
    estimates: String,
    threshold: String,
    procedure: String,
    se_variant: String,
}

fn join<T: std::fmt::Debug>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";")
}

fn split<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(';').map(|p| p.parse().ok()).collect()
}

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn enum_from<T: for<'de> Deserialize<'de>>(s: &str) -> Option<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
}

/// Edge-list CSV with `;`-joined per-lag columns. `comment` lines are
/// prefixed with `#`.
pub fn edges_to_csv(edges: &[EdgeRecord], comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    if edges.is_empty() {
        w.write_record(["source", "target", "lags", "t_values", "signs", "estimates", "threshold", "procedure", "se_variant"])
            .expect("write to memory");
    }
    for e in edges {
        w.serialize(FlatEdge {
            source: e.source.clone(),
            target: e.target.clone(),
            lags: join(&e.lags),
            t_values: join(&e.t_values),
            signs: join(&e.signs),
            estimates: join(&e.estimates),
            threshold: format!("{:?}", e.threshold),
            procedure: enum_name(&e.procedure),
            se_variant: enum_name(&e.se_variant),
        })
        .expect("write to memory");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf8 csv"));
    out
}

pub fn read_edges_csv(path: &Path) -> CliResult<Vec<EdgeRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_edges_csv(&text).map_err(|message| CliError::Data {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_edges_csv(text: &str) -> Result<Vec<EdgeRecord>, String> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, rec) in r.deserialize::<FlatEdge>().enumerate() {
        let f = rec.map_err(|e| e.to_string())?;
        let bad = |what: &str| format!("edge row {}: bad {what}", k + 1);
        out.push(EdgeRecord {
            lags: split(&f.lags).ok_or_else(|| bad("lags"))?,
            t_values: split(&f.t_values).ok_or_else(|| bad("t_values"))?,
            signs: split(&f.signs).ok_or_else(|| bad("signs"))?,
            estimates: split(&f.estimates).ok_or_else(|| bad("estimates"))?,
            threshold: f.threshold.parse().map_err(|_| bad("threshold"))?,
            procedure: enum_from(&f.procedure).ok_or_else(|| bad("procedure"))?,
            se_variant: enum_from(&f.se_variant).ok_or_else(|| bad("se_variant"))?,
            source: f.source,
            target: f.target,
        });
    }
    Ok(out)
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT digraph over `nodes`. Node width grows with out-degree; edges are
/// blue for a positive dominant sign and red for a negative one. Nodes with a
/// group label are filled with a per-group colour.
pub fn export_dot(
    nodes: &[String],
    edges: &[EdgeRecord],
    groups: &BTreeMap<String, String>,
    comment: Option<&str>,
) -> String {
    let mut out_degree: BTreeMap<&str, usize> = BTreeMap::new();
    for e in edges {
        *out_degree.entry(e.source.as_str()).or_default() += 1;
    }
    let group_index: BTreeMap<&str, usize> = groups
        .values()
        .map(String::as_str)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, g)| (g, i))
        .collect();
    let mut s = String::from("digraph varfdr {\n");
    if let Some(c) = comment {
        for line in c.lines() {
            let _ = writeln!(s, "  // {line}");
        }
    }
    s.push_str("  node [shape=circle, fixedsize=true];\n");
    for name in nodes {
        let deg = out_degree.get(name.as_str()).copied().unwrap_or(0);
        let mut attrs = format!("width={:.2}, outdegree={deg}", 0.4 + 0.15 * deg as f64);
        if let Some(g) = groups.get(name) {
            let colour = PALETTE[group_index[g.as_str()] % PALETTE.len()];
            let _ = write!(attrs, ", style=filled, fillcolor=\"{colour}\", group={}", quote(g));
        }
        let _ = writeln!(s, "  {} [{attrs}];", quote(name));
    }
    for e in edges {
        let colour = if e.dominant_sign() < 0 { "red" } else { "blue" };
        let lags = e.lags.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(
            s,
            "  {} -> {} [color={colour}, label=\"{lags}\"];",
            quote(&e.source),
            quote(&e.target)
        );
    }
    s.push_str("}\n");
    s
}

fn unquote(token: &str) -> Option<String> {
    let t = token.trim();
    let inner = t.strip_prefix('"')?.strip_suffix('"')?;
    Some(inner.replace("\\\"", "\"").replace("\\\\", "\\"))
}

/// Node and edge sets of a DOT document written by [`export_dot`].
pub fn parse_dot(text: &str) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let body = text
        .trim()
        .strip_prefix("digraph")
        .ok_or("not a digraph")?
        .trim_end()
        .strip_suffix('}')
        .ok_or("unterminated graph")?;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for line in body.lines().skip(1) {
        let line = line.trim();
        if line.is_empty() || line.starts_with("//") || line.starts_with("node ") {
            continue;
        }
        let stmt = line.split(" [").next().unwrap_or(line).trim_end_matches(';');
        match stmt.split_once(" -> ") {
            Some((a, b)) => edges.push((
                unquote(a).ok_or_else(|| format!("bad edge source in {line:?}"))?,
                unquote(b).ok_or_else(|| format!("bad edge target in {line:?}"))?,
            )),
            None => nodes.push(unquote(stmt).ok_or_else(|| format!("bad node in {line:?}"))?),
        }
    }
    Ok((nodes, edges))
}
