//! LP-style text export of a [`Model`] and the matching reader.
//!
//! Layout: `Minimize`, `Subject To`, `Bounds`, `Binaries`, `End`. Cone rows
//! are written as comment lines (`\ cone name: s >= || e1 ; e2 ||`) so that
//! external LP readers skip them. Every variable is listed under `Bounds` in
//! id order, which makes the round trip preserve variable ids. Numbers are
//! written with the shortest representation that parses back exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model_ir::{LinExpr, LinearConstraint, Model, Sense, SocConstraint, VarId, VarKind};

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn write_terms(out: &mut String, m: &Model, terms: &[(VarId, f64)], constant: f64) {
    let mut first = true;
    for &(v, c) in terms {
        let sign = if c < 0.0 { '-' } else { '+' };
        if first && c >= 0.0 {
            let _ = write!(out, "{} {}", fmt_num(c), m.variables[v.0].name);
        } else {
            let _ = write!(out, "{}{sign} {} {}", if first { "" } else { " " }, fmt_num(c.abs()), m.variables[v.0].name);
        }
        first = false;
    }
    if constant != 0.0 || first {
        let sign = if constant < 0.0 { '-' } else { '+' };
        let _ = write!(out, "{}{sign} {}", if first { "" } else { " " }, fmt_num(constant.abs()));
    }
}

/// Serializes `m` to LP text with deterministic ordering.
pub fn to_lp_string(m: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ model: {}", m.name);
    if let Some(p) = m.period {
        let _ = writeln!(out, "\\ period: {p}");
    }
    out.push_str("Minimize\n obj: ");
    write_terms(&mut out, m, &m.objective.terms, m.objective.constant);
    out.push_str("\nSubject To\n");
    for c in &m.linear {
        let _ = write!(out, " {}: ", c.name);
        write_terms(&mut out, m, &c.terms, 0.0);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), fmt_num(c.rhs));
    }
    for k in &m.cones {
        let _ = write!(out, "\\ cone {}: ", k.name);
        write_terms(&mut out, m, &k.bound.terms, k.bound.constant);
        out.push_str(" >= || ");
        for (i, e) in k.vector.iter().enumerate() {
            if i > 0 {
                out.push_str(" ; ");
            }
            write_terms(&mut out, m, &e.terms, e.constant);
        }
        out.push_str(" ||\n");
    }
    out.push_str("Bounds\n");
    for v in &m.variables {
        let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper));
    }
    let bins: Vec<&str> = m.variables.iter().filter(|v| v.is_binary()).map(|v| v.name.as_str()).collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    let ints: Vec<&str> =
        m.variables.iter().filter(|v| v.kind == VarKind::Integer).map(|v| v.name.as_str()).collect();
    if !ints.is_empty() {
        out.push_str("General\n");
        for g in ints {
            let _ = writeln!(out, " {g}");
        }
    }
    out.push_str("End\n");
    out
}

#[derive(PartialEq)]
enum Section {
    Header,
    Objective,
    Rows,
    Bounds,
    Binaries,
    General,
    Done,
}

struct Pending {
    line: usize,
    text: String,
}

/// Parses text produced by [`to_lp_string`].
pub fn parse_lp(text: &str) -> Result<Model> {
    let mut m = Model::default();
    let mut section = Section::Header;
    let mut objective: Option<Pending> = None;
    let mut rows: Vec<Pending> = Vec::new();
    let mut cones: Vec<Pending> = Vec::new();
    let mut binaries: Vec<(usize, String, VarKind)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('\\') {
            let rest = rest.trim();
            if let Some(name) = rest.strip_prefix("model:") {
                m.name = name.trim().to_string();
            } else if let Some(p) = rest.strip_prefix("period:") {
                m.period = Some(p.trim().parse().map_err(|_| perr(line_no, "bad period"))?);
            } else if let Some(c) = rest.strip_prefix("cone ") {
                cones.push(Pending { line: line_no, text: c.to_string() });
            }
            continue;
        }
        match line {
            "Minimize" => section = Section::Objective,
            "Subject To" => section = Section::Rows,
            "Bounds" => section = Section::Bounds,
            "Binaries" => section = Section::Binaries,
            "General" => section = Section::General,
            "End" => section = Section::Done,
            _ => match section {
                Section::Objective => objective = Some(Pending { line: line_no, text: line.to_string() }),
                Section::Rows => rows.push(Pending { line: line_no, text: line.to_string() }),
                Section::Bounds => {
                    let parts: Vec<&str> = line.split_whitespace().collect();
                    if parts.len() != 5 || parts[1] != "<=" || parts[3] != "<=" {
                        return Err(perr(line_no, "expected `lo <= name <= hi`"));
                    }
                    let lo = parse_num(parts[0], line_no)?;
                    let hi = parse_num(parts[4], line_no)?;
                    m.variables.push(crate::model_ir::Variable {
                        name: parts[2].to_string(),
                        kind: VarKind::Continuous,
                        lower: lo,
                        upper: hi,
                    });
                }
                Section::Binaries => binaries.push((line_no, line.to_string(), VarKind::Binary)),
                Section::General => binaries.push((line_no, line.to_string(), VarKind::Integer)),
                Section::Header | Section::Done => return Err(perr(line_no, "content outside a section")),
            },
        }
    }

    let index: std::collections::HashMap<String, usize> =
        m.variables.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
    for (line, b, kind) in binaries {
        let id = *index.get(&b).ok_or_else(|| perr(line, "integer variable not declared in Bounds"))?;
        m.variables[id].kind = kind;
    }
    if let Some(obj) = objective {
        let body = obj.text.split_once(':').map(|x| x.1).unwrap_or(&obj.text);
        m.objective = parse_expr(body, &index, obj.line)?;
    }
    for r in rows {
        let (name, body) = r.text.split_once(':').ok_or_else(|| perr(r.line, "row without name"))?;
        let (sense, pos, width) = find_sense(body).ok_or_else(|| perr(r.line, "row without sense"))?;
        let expr = parse_expr(&body[..pos], &index, r.line)?;
        let rhs = parse_num(body[pos + width..].trim(), r.line)?;
        m.linear.push(LinearConstraint { name: name.trim().to_string(), terms: expr.terms, sense, rhs: rhs - expr.constant });
    }
    for c in cones {
        let (name, body) = c.text.split_once(':').ok_or_else(|| perr(c.line, "cone without name"))?;
        let (bound, rest) = body.split_once(">=").ok_or_else(|| perr(c.line, "cone without `>=`"))?;
        let inner = rest
            .trim()
            .strip_prefix("||")
            .and_then(|s| s.strip_suffix("||"))
            .ok_or_else(|| perr(c.line, "cone norm must be wrapped in `|| ... ||`"))?;
        let vector = inner.split(';').map(|e| parse_expr(e, &index, c.line)).collect::<Result<Vec<_>>>()?;
        m.cones.push(SocConstraint { name: name.trim().to_string(), vector, bound: parse_expr(bound, &index, c.line)? });
    }
    m.validate()?;
    Ok(m)
}

fn perr(line: usize, msg: &str) -> Error {
    Error::Parse { line, msg: msg.to_string() }
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|_| perr(line, &format!("bad number `{s}`")))
}

fn find_sense(body: &str) -> Option<(Sense, usize, usize)> {
    if let Some(p) = body.find("<=") {
        Some((Sense::Le, p, 2))
    } else if let Some(p) = body.find(">=") {
        Some((Sense::Ge, p, 2))
    } else {
        body.find(" = ").map(|p| (Sense::Eq, p + 1, 1))
    }
}

fn parse_expr(s: &str, index: &std::collections::HashMap<String, usize>, line: usize) -> Result<LinExpr> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    let mut e = LinExpr::new();
    let mut i = 0;
    while i < toks.len() {
        let mut sign = 1.0;
        if toks[i] == "+" || toks[i] == "-" {
            if toks[i] == "-" {
                sign = -1.0;
            }
            i += 1;
        }
        let num = toks.get(i).ok_or_else(|| perr(line, "dangling sign"))?;
        let coef = sign * parse_num(num, line)?;
        i += 1;
        match toks.get(i) {
            Some(&t) if t != "+" && t != "-" => {
                let id = *index.get(t).ok_or_else(|| perr(line, &format!("unknown variable `{t}`")))?;
                e.terms.push((VarId(id), coef));
                i += 1;
            }
            _ => e.constant += coef,
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_small_model() {
        let mut m = Model::new("demo");
        m.period = Some(7);
        let u = m.add_binary("u[0]");
        let x = m.add_continuous("x[0]", 21.5, 24.5);
        let t = m.add_continuous("t", f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("dyn[0]", LinExpr::var(x).with(u, 0.6767), Sense::Eq, 23.4 * 0.9914);
        m.add_constraint("load", LinExpr::term(u, 3.5), Sense::Ge, 1.0 / 3.0);
        m.add_cone("k", vec![LinExpr::var(x).plus(-23.0), LinExpr::constant(2.0)], LinExpr::var(t).plus(0.1));
        m.set_objective(LinExpr::var(u).with(t, 1e-7).plus(-2.5));
        let text = to_lp_string(&m);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back, m);
    }
}
