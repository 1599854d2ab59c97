//! Line-based text format for pursuer policies.
//!
//! ```text
//! kind independent          # or joint
//! view position             # hidden | position | history
//! fallback first-move       # first-move | uniform | none
//! pursuers 2                # independent policies only
//! # independent rule: pursuer t own evader moves
//! 0 * 4 7 4:0.5,3:0.5
//! # joint rule: t own evader moves
//! 2 4;6 0;1;2 4;6:1
//! ```
//!
//! `t` is a timestep or `*` for every step without its own rule. The evader
//! column is `-` for hidden views, a vertex for position views and a
//! `;`-separated prefix for history views. Blank lines and text after `#`
//! are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::policy::{
    Distribution, EvaderView, Fallback, IndependentPolicy, JointPolicy, ObsKey, PursuerPolicy,
    ViewKind,
};
use crate::error::{Error, Result};
use crate::graph::Vertex;

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("policy line {line}: {msg}"))
}

fn tuple(vs: &[Vertex]) -> String {
    vs.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

fn parse_vertex(s: &str, line: usize) -> Result<Vertex> {
    s.parse().map_err(|_| parse_err(line, format!("bad vertex {s:?}")))
}

fn parse_tuple(s: &str, line: usize) -> Result<Vec<Vertex>> {
    s.split(';').map(|v| parse_vertex(v, line)).collect()
}

fn write_t(t: Option<usize>) -> String {
    t.map_or_else(|| "*".to_string(), |t| t.to_string())
}

fn parse_t(s: &str, line: usize) -> Result<Option<usize>> {
    if s == "*" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| parse_err(line, format!("bad timestep {s:?}")))
}

fn write_view(e: &EvaderView) -> String {
    match e {
        EvaderView::Hidden => "-".into(),
        EvaderView::Position(v) => v.to_string(),
        EvaderView::History(h) => tuple(h),
    }
}

fn parse_view(s: &str, view: ViewKind, line: usize) -> Result<EvaderView> {
    match view {
        ViewKind::Hidden if s == "-" => Ok(EvaderView::Hidden),
        ViewKind::Hidden => Err(parse_err(line, "hidden view expects '-'")),
        ViewKind::Position => parse_vertex(s, line).map(EvaderView::Position),
        ViewKind::History => parse_tuple(s, line).map(EvaderView::History),
    }
}

fn write_dist<A>(d: &Distribution<A>, fmt: impl Fn(&A) -> String) -> String {
    d.entries()
        .iter()
        .map(|(a, p)| format!("{}:{p}", fmt(a)))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_dist<A>(
    s: &str,
    line: usize,
    item: impl Fn(&str, usize) -> Result<A>,
) -> Result<Distribution<A>> {
    s.split(',')
        .map(|entry| {
            let (a, p) = entry
                .split_once(':')
                .ok_or_else(|| parse_err(line, format!("expected move:prob, got {entry:?}")))?;
            let p: f64 = p
                .parse()
                .map_err(|_| parse_err(line, format!("bad probability {p:?}")))?;
            Ok((item(a, line)?, p))
        })
        .collect::<Result<_>>()
        .map(Distribution)
}

fn view_from_str(s: &str, line: usize) -> Result<ViewKind> {
    match s {
        "hidden" => Ok(ViewKind::Hidden),
        "position" => Ok(ViewKind::Position),
        "history" => Ok(ViewKind::History),
        _ => Err(parse_err(line, format!("unknown view {s:?}"))),
    }
}

fn fallback_from_str(s: &str, line: usize) -> Result<Option<Fallback>> {
    match s {
        "first-move" => Ok(Some(Fallback::FirstMove)),
        "uniform" => Ok(Some(Fallback::Uniform)),
        "none" => Ok(None),
        _ => Err(parse_err(line, format!("unknown fallback {s:?}"))),
    }
}

impl PursuerPolicy {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fallback = |f: Option<Fallback>| f.map_or("none", Fallback::as_str);
        match self {
            PursuerPolicy::Independent(p) => {
                let _ = writeln!(out, "kind independent");
                let _ = writeln!(out, "view {}", p.view.as_str());
                let _ = writeln!(out, "fallback {}", fallback(p.fallback));
                let _ = writeln!(out, "pursuers {}", p.tables.len());
                for (i, table) in p.tables.iter().enumerate() {
                    for (k, d) in table {
                        let _ = writeln!(
                            out,
                            "{i} {} {} {} {}",
                            write_t(k.t),
                            k.own,
                            write_view(&k.evader),
                            write_dist(d, ToString::to_string)
                        );
                    }
                }
            }
            PursuerPolicy::Joint(p) => {
                let _ = writeln!(out, "kind joint");
                let _ = writeln!(out, "view {}", p.view.as_str());
                let _ = writeln!(out, "fallback {}", fallback(p.fallback));
                for (k, d) in &p.table {
                    let _ = writeln!(
                        out,
                        "{} {} {} {}",
                        write_t(k.t),
                        tuple(&k.own),
                        write_view(&k.evader),
                        write_dist(d, |m| tuple(m))
                    );
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<PursuerPolicy> {
        let mut header: BTreeMap<&str, (&str, usize)> = BTreeMap::new();
        let mut rules: Vec<(Vec<&str>, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            match fields[0] {
                "kind" | "view" | "fallback" | "pursuers" => {
                    if fields.len() != 2 {
                        return Err(parse_err(line, "header takes one value"));
                    }
                    if header.insert(fields[0], (fields[1], line)).is_some() {
                        return Err(parse_err(line, format!("repeated {}", fields[0])));
                    }
                }
                _ => rules.push((fields, line)),
            }
        }
        let get = |k: &str| {
            header
                .get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("policy file lacks a {k} line")))
        };
        let (view, vline) = get("view")?;
        let view = view_from_str(view, vline)?;
        let (fallback, fline) = get("fallback")?;
        let fallback = fallback_from_str(fallback, fline)?;
        match get("kind")? {
            ("independent", _) => {
                let (n, nline) = get("pursuers")?;
                let n: usize = n
                    .parse()
                    .map_err(|_| parse_err(nline, format!("bad pursuer count {n:?}")))?;
                let mut p = IndependentPolicy::new(view, n);
                p.fallback = fallback;
                for (f, line) in rules {
                    if f.len() != 5 {
                        return Err(parse_err(line, "expected: pursuer t own evader moves"));
                    }
                    let i: usize = f[0]
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad pursuer {:?}", f[0])))?;
                    if i >= n {
                        return Err(parse_err(line, format!("pursuer {i} out of range")));
                    }
                    let key = ObsKey {
                        own: parse_vertex(f[2], line)?,
                        evader: parse_view(f[3], view, line)?,
                        t: parse_t(f[1], line)?,
                    };
                    let dist = parse_dist(f[4], line, parse_vertex)?;
                    if p.tables[i].insert(key, dist).is_some() {
                        return Err(parse_err(line, "duplicate rule"));
                    }
                }
                Ok(PursuerPolicy::Independent(p))
            }
            ("joint", _) => {
                if header.contains_key("pursuers") {
                    return Err(Error::Parse("joint policies take no pursuers line".into()));
                }
                let mut p = JointPolicy::new(view);
                p.fallback = fallback;
                for (f, line) in rules {
                    if f.len() != 4 {
                        return Err(parse_err(line, "expected: t own evader moves"));
                    }
                    let key = ObsKey {
                        own: parse_tuple(f[1], line)?,
                        evader: parse_view(f[2], view, line)?,
                        t: parse_t(f[0], line)?,
                    };
                    let dist = parse_dist(f[3], line, parse_tuple)?;
                    if p.table.insert(key, dist).is_some() {
                        return Err(parse_err(line, "duplicate rule"));
                    }
                }
                Ok(PursuerPolicy::Joint(p))
            }
            (other, line) => Err(parse_err(line, format!("unknown kind {other:?}"))),
        }
    }
}
