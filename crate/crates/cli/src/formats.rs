//! Text formats for lists, filters, deltas, topologies, stats and traces.
//!
//! Blank lines and lines starting with `#` are ignored in every input format.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lcpfilter_core::dist::{DistIteration, RouterId, RouterSpec, Topology};
use lcpfilter_core::dynamic_dp::Delta;
use lcpfilter_core::{Address, ListKind, Prefix, WeightedAddressSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{} appears in both {} and {}", ip, first.display(), second.display())]
    Conflict {
        ip: Address,
        first: PathBuf,
        second: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), FormatError> {
    fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Non-blank, non-comment lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (u64, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        path: path.to_owned(),
        line,
        message: message.into(),
    }
}

/// Parses `ip,weight` rows (weight defaults to 1). A leading `ip,weight`
/// header is accepted.
pub fn parse_weighted_list(text: &str, kind: ListKind, path: &Path) -> Result<WeightedAddressSet, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut set = WeightedAddressSet::new(kind);
    let mut seen_row = false;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = record.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !seen_row && fields.first().is_some_and(|f| f.eq_ignore_ascii_case("ip")) {
            seen_row = true;
            continue;
        }
        seen_row = true;
        if fields.len() > 2 {
            return Err(parse_err(path, line, "expected `ip` or `ip,weight`"));
        }
        let ip: Address = fields[0]
            .parse()
            .map_err(|e| parse_err(path, line, format!("bad address `{}`: {e}", fields[0])))?;
        let weight = match fields.get(1) {
            None | Some(&"") => 1,
            Some(w) => w
                .parse::<u64>()
                .map_err(|_| parse_err(path, line, format!("bad weight `{w}`")))?,
        };
        if set.contains(ip) {
            return Err(parse_err(path, line, format!("duplicate address {ip}")));
        }
        set.set(ip, weight);
    }
    Ok(set)
}

pub fn read_weighted_list(path: &Path, kind: ListKind) -> Result<WeightedAddressSet, FormatError> {
    parse_weighted_list(&read(path)?, kind, path)
}

/// Reads both lists and rejects any address present in both.
pub fn read_lists(
    blacklist: &Path,
    whitelist: Option<&Path>,
) -> Result<(WeightedAddressSet, Option<WeightedAddressSet>), FormatError> {
    let bad = read_weighted_list(blacklist, ListKind::Bad)?;
    let Some(wpath) = whitelist else {
        return Ok((bad, None));
    };
    let good = read_weighted_list(wpath, ListKind::Good)?;
    if let Some(ip) = bad.addresses().find(|&a| good.contains(a)) {
        return Err(FormatError::Conflict {
            ip,
            first: blacklist.to_owned(),
            second: wpath.to_owned(),
        });
    }
    Ok((bad, Some(good)))
}

pub fn format_weighted_list(set: &WeightedAddressSet) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["ip", "weight"]).expect("in-memory write");
    for (ip, weight) in set.iter() {
        w.write_record([ip.to_string(), weight.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii")
}

/// One CIDR prefix per line; a bare address reads as /32.
pub fn parse_filters(text: &str, path: &Path) -> Result<Vec<Prefix>, FormatError> {
    lines(text)
        .map(|(n, l)| {
            l.parse()
                .map_err(|e| parse_err(path, n, format!("bad prefix `{l}`: {e}")))
        })
        .collect()
}

pub fn read_filters(path: &Path) -> Result<Vec<Prefix>, FormatError> {
    parse_filters(&read(path)?, path)
}

pub fn format_filters(filters: &[Prefix]) -> String {
    filters.iter().map(|p| format!("{p}\n")).collect()
}

/// `router cidr` lines, one filter each.
pub fn format_router_filters(filters: &BTreeMap<RouterId, Vec<Prefix>>) -> String {
    filters
        .iter()
        .flat_map(|(u, ps)| ps.iter().map(move |p| format!("{u} {p}\n")))
        .collect()
}

pub fn parse_router_filters(text: &str, path: &Path) -> Result<BTreeMap<RouterId, Vec<Prefix>>, FormatError> {
    let mut out: BTreeMap<RouterId, Vec<Prefix>> = BTreeMap::new();
    for (n, l) in lines(text) {
        let mut it = l.split_whitespace();
        let (Some(u), Some(p), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(path, n, "expected `router cidr`"));
        };
        let u = u
            .parse()
            .map_err(|_| parse_err(path, n, format!("bad router id `{u}`")))?;
        let p = p
            .parse()
            .map_err(|e| parse_err(path, n, format!("bad prefix `{p}`: {e}")))?;
        out.entry(u).or_default().push(p);
    }
    Ok(out)
}

fn parse_kind(s: &str) -> Option<ListKind> {
    match s.to_ascii_lowercase().as_str() {
        "bad" => Some(ListKind::Bad),
        "good" => Some(ListKind::Good),
        _ => None,
    }
}

/// `ADD ip weight` | `DEL ip` | `ADJ ip weight bad|good`.
pub fn parse_deltas(text: &str, path: &Path) -> Result<Vec<Delta>, FormatError> {
    let mut out = Vec::new();
    for (n, l) in lines(text) {
        let f: Vec<&str> = l.split_whitespace().collect();
        let ip = |s: &str| -> Result<Address, FormatError> {
            s.parse()
                .map_err(|e| parse_err(path, n, format!("bad address `{s}`: {e}")))
        };
        let weight = |s: &str| -> Result<u64, FormatError> {
            s.parse().map_err(|_| parse_err(path, n, format!("bad weight `{s}`")))
        };
        let d = match f.as_slice() {
            [op, a, w] if op.eq_ignore_ascii_case("ADD") => Delta::Add {
                ip: ip(a)?,
                weight: weight(w)?,
            },
            [op, a] if op.eq_ignore_ascii_case("DEL") => Delta::Remove { ip: ip(a)? },
            [op, a, w, k] if op.eq_ignore_ascii_case("ADJ") => Delta::Adjust {
                ip: ip(a)?,
                weight: weight(w)?,
                kind: parse_kind(k).ok_or_else(|| parse_err(path, n, format!("bad list kind `{k}`")))?,
            },
            _ => {
                return Err(parse_err(
                    path,
                    n,
                    "expected `ADD ip weight`, `DEL ip` or `ADJ ip weight kind`",
                ))
            }
        };
        out.push(d);
    }
    Ok(out)
}

pub fn read_deltas(path: &Path) -> Result<Vec<Delta>, FormatError> {
    parse_deltas(&read(path)?, path)
}

pub fn format_deltas(deltas: &[Delta]) -> String {
    deltas
        .iter()
        .map(|d| match d {
            Delta::Add { ip, weight } => format!("ADD {ip} {weight}\n"),
            Delta::Remove { ip } => format!("DEL {ip}\n"),
            Delta::Adjust { ip, weight, kind } => format!("ADJ {ip} {weight} {kind}\n"),
        })
        .collect()
}

/// `EDGE a b`, `ROUTER u fmax capacity`, `VICTIM v`, `INGRESS ip u`.
pub fn parse_topology(text: &str, path: &Path) -> Result<Topology, FormatError> {
    let mut topo = Topology::new();
    let mut victim_seen = false;
    for (n, l) in lines(text) {
        let f: Vec<&str> = l.split_whitespace().collect();
        let id = |s: &str| -> Result<RouterId, FormatError> {
            s.parse().map_err(|_| parse_err(path, n, format!("bad node id `{s}`")))
        };
        let num = |s: &str| -> Result<u64, FormatError> {
            s.parse().map_err(|_| parse_err(path, n, format!("bad number `{s}`")))
        };
        match f.as_slice() {
            [k, a, b] if k.eq_ignore_ascii_case("EDGE") => topo.add_edge(id(a)?, id(b)?),
            [k, u, fmax, c] if k.eq_ignore_ascii_case("ROUTER") => topo.set_router(
                id(u)?,
                RouterSpec {
                    fmax: num(fmax)? as usize,
                    capacity: num(c)?,
                },
            ),
            [k, v] if k.eq_ignore_ascii_case("VICTIM") => {
                if victim_seen {
                    return Err(parse_err(path, n, "second VICTIM line"));
                }
                victim_seen = true;
                topo.set_victim(id(v)?);
            }
            [k, a, u] if k.eq_ignore_ascii_case("INGRESS") => {
                let ip: Address = a
                    .parse()
                    .map_err(|e| parse_err(path, n, format!("bad address `{a}`: {e}")))?;
                if topo.ingress().contains_key(&ip) {
                    return Err(parse_err(path, n, format!("duplicate ingress for {ip}")));
                }
                topo.set_ingress(ip, id(u)?);
            }
            _ => return Err(parse_err(path, n, "expected EDGE, ROUTER, VICTIM or INGRESS")),
        }
    }
    if !victim_seen {
        return Err(parse_err(path, 0, "no VICTIM line"));
    }
    Ok(topo)
}

pub fn read_topology(path: &Path) -> Result<Topology, FormatError> {
    parse_topology(&read(path)?, path)
}

pub fn format_topology(topo: &Topology) -> String {
    let mut s = String::new();
    if let Some(v) = topo.victim() {
        s += &format!("VICTIM {v}\n");
    }
    for (a, b) in topo.edges() {
        s += &format!("EDGE {a} {b}\n");
    }
    for (u, spec) in topo.routers() {
        s += &format!("ROUTER {u} {} {}\n", spec.fmax, spec.capacity);
    }
    for (ip, u) in topo.ingress() {
        s += &format!("INGRESS {ip} {u}\n");
    }
    s
}

/// A collateral-damage figure: exact for the solvers, fractional for rate limiting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Metric {
    Exact(u64),
    Fractional(f64),
}

/// Summary written by `--stats`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub problem: String,
    pub n_bad: usize,
    /// `None` for the implicit whitelist.
    pub n_good: Option<usize>,
    pub f_max: usize,
    pub capacity: Option<u64>,
    pub collateral_damage: Metric,
    pub benefit: u64,
    pub unblocked_bad: u64,
    pub residual_traffic: Option<u64>,
    pub filters_used: usize,
    pub runtime_ms: f64,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Stats {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
        s.push('\n');
        s
    }
}

pub fn read_stats(path: &Path) -> Result<Stats, FormatError> {
    serde_json::from_str(&read(path)?).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))
}

/// `iter,dual,primal_cd,violations`; an iteration without a repaired
/// solution leaves `primal_cd` empty.
pub fn format_trace(trace: &[DistIteration]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "dual", "primal_cd", "violations"])
        .expect("in-memory write");
    for it in trace {
        w.write_record([
            it.iter.to_string(),
            format!("{:.6}", it.dual),
            it.primal_cd.map(|c| c.to_string()).unwrap_or_default(),
            it.violations.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii")
}

/// `f,cd` rows.
pub fn format_sweep(rows: &[(usize, Metric)]) -> String {
    let mut s = String::from("f,cd\n");
    for (f, cd) in rows {
        match cd {
            Metric::Exact(v) => s += &format!("{f},{v}\n"),
            Metric::Fractional(v) => s += &format!("{f},{v}\n"),
        }
    }
    s
}

/// Writes to `path`, or to standard output when it is `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), FormatError> {
    match path {
        Some(p) => write_file(p, contents),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|source| FormatError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}
