use std::fmt::Write as _;

use super::{Channel, ElementDefaults, Netlist, NetlistError, Node, Port, Probe, Rail, Valve};
use crate::stdcells::{self, CellKind, CellParams, CellSpec};

struct Token<'a> {
    col: usize,
    start: usize,
    text: &'a str,
}

struct Line<'a> {
    no: usize,
    tokens: Vec<Token<'a>>,
    raw: &'a str,
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in content.char_indices().chain(std::iter::once((content.len(), ' '))) {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push(Token {
                        col: content[..s].chars().count() + 1,
                        start: s,
                        text: &content[s..pos],
                    });
                }
            } else if start.is_none() {
                start = Some(pos);
            }
        }
        if !tokens.is_empty() {
            out.push(Line {
                no: i + 1,
                tokens,
                raw: content,
            });
        }
    }
    out
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> NetlistError {
    NetlistError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn with_line(err: NetlistError, line: usize) -> NetlistError {
    match err {
        NetlistError::UndefinedNode { id, line: None } => NetlistError::UndefinedNode {
            id,
            line: Some(line),
        },
        NetlistError::UndefinedValve { id, line: None } => NetlistError::UndefinedValve {
            id,
            line: Some(line),
        },
        NetlistError::DuplicateId { id, line: None } => NetlistError::DuplicateId {
            id,
            line: Some(line),
        },
        NetlistError::Invalid(msg) => syntax(line, 1, msg),
        other => other,
    }
}

/// `key=value` arguments of one line, with unknown keys rejected.
struct Args<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str, usize)>,
}

impl<'a> Args<'a> {
    fn new(line: usize, tokens: &[Token<'a>], allowed: &[&str]) -> Result<Self, NetlistError> {
        let mut pairs: Vec<(&str, &str, usize)> = Vec::new();
        for t in tokens {
            let Some((k, v)) = t.text.split_once('=') else {
                return Err(syntax(line, t.col, format!("expected key=value, found '{}'", t.text)));
            };
            if !allowed.contains(&k) {
                return Err(syntax(line, t.col, format!("unknown key '{k}'")));
            }
            if pairs.iter().any(|(pk, _, _)| *pk == k) {
                return Err(syntax(line, t.col, format!("repeated key '{k}'")));
            }
            if v.is_empty() {
                return Err(syntax(line, t.col + k.len() + 1, format!("empty value for '{k}'")));
            }
            pairs.push((k, v, t.col + k.len() + 1));
        }
        Ok(Args { line, pairs })
    }

    fn get(&self, key: &str) -> Option<(&'a str, usize)> {
        self.pairs
            .iter()
            .find(|(k, _, _)| *k == key)
            .map(|(_, v, c)| (*v, *c))
    }

    fn required(&self, key: &str, col: usize) -> Result<&'a str, NetlistError> {
        self.get(key)
            .map(|(v, _)| v)
            .ok_or_else(|| syntax(self.line, col, format!("missing '{key}='")))
    }

    fn float(&self, key: &str) -> Result<Option<f64>, NetlistError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, col)) => parse_float(v)
                .map(Some)
                .ok_or_else(|| syntax(self.line, col, format!("invalid number '{v}'"))),
        }
    }
}

fn parse_float(s: &str) -> Option<f64> {
    let ok = s
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'));
    if !ok {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses the line-based netlist format. Node and rail declarations may
/// appear anywhere; references are resolved after all declarations are read.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let lines = tokenize(text);
    let defaults = ElementDefaults::default();
    let mut net = Netlist::default();

    for line in &lines {
        let kw = &line.tokens[0];
        match kw.text {
            "rail" => {
                if line.tokens.len() != 3 {
                    return Err(syntax(line.no, kw.col, "expected 'rail <id> vacuum|atmosphere'"));
                }
                let rail = match line.tokens[2].text {
                    "vacuum" => Rail::Vacuum,
                    "atmosphere" => Rail::Atmosphere,
                    other => {
                        return Err(syntax(
                            line.no,
                            line.tokens[2].col,
                            format!("unknown rail kind '{other}'"),
                        ))
                    }
                };
                net.add_node(Node::rail(line.tokens[1].text, rail))
                    .map_err(|e| with_line(e, line.no))?;
            }
            "node" => {
                if line.tokens.len() < 2 {
                    return Err(syntax(line.no, kw.col, "expected 'node <id> cap=<float>'"));
                }
                let id = line.tokens[1].text;
                if id.contains('=') {
                    return Err(syntax(line.no, line.tokens[1].col, "missing node id"));
                }
                let args = Args::new(line.no, &line.tokens[2..], &["cap", "init"])?;
                let cap = args.float("cap")?.unwrap_or(defaults.capacitance);
                if cap <= 0.0 {
                    return Err(syntax(line.no, args.get("cap").map_or(1, |a| a.1), "cap must be > 0"));
                }
                let init = args.float("init")?;
                if let Some(p) = init {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(syntax(line.no, args.get("init").map_or(1, |a| a.1), "init must lie in [0, 1]"));
                    }
                }
                net.add_node(Node {
                    init,
                    ..Node::free(id, cap)
                })
                .map_err(|e| with_line(e, line.no))?;
            }
            "chan" | "valve" | "port" | "probe" | "cell" | "meta" => {}
            other => {
                return Err(syntax(line.no, kw.col, format!("unknown statement '{other}'")));
            }
        }
    }
    for rail in [Rail::Vacuum, Rail::Atmosphere] {
        if net.rail_id(rail).is_none() {
            return Err(NetlistError::MissingRail(rail));
        }
    }

    let mut cell_count = 0usize;
    for line in &lines {
        let kw = &line.tokens[0];
        let rest = &line.tokens[1..];
        match kw.text {
            "chan" => {
                if rest.len() != 3 {
                    return Err(syntax(line.no, kw.col, "expected 'chan <a> <b> g=<float>'"));
                }
                let args = Args::new(line.no, &rest[2..], &["g"])?;
                let g = args
                    .float("g")?
                    .ok_or_else(|| syntax(line.no, rest[2].col, "missing 'g='"))?;
                net.add_channel(Channel {
                    a: rest[0].text.into(),
                    b: rest[1].text.into(),
                    conductance: g,
                })
                .map_err(|e| with_line(e, line.no))?;
            }
            "valve" => {
                if rest.is_empty() || rest[0].text.contains('=') {
                    return Err(syntax(line.no, kw.col, "missing valve id"));
                }
                let args = Args::new(
                    line.no,
                    &rest[1..],
                    &["gate", "src", "drn", "g", "topen", "tclose", "state"],
                )?;
                let initially_open = match args.get("state") {
                    None | Some(("closed", _)) => false,
                    Some(("open", _)) => true,
                    Some((v, col)) => {
                        return Err(syntax(line.no, col, format!("unknown valve state '{v}'")))
                    }
                };
                net.add_valve(Valve {
                    id: rest[0].text.into(),
                    gate: args.required("gate", kw.col)?.into(),
                    source: args.required("src", kw.col)?.into(),
                    drain: args.required("drn", kw.col)?.into(),
                    g_open: args.float("g")?.unwrap_or(defaults.g_open),
                    theta_open: args.float("topen")?.unwrap_or(defaults.theta_open),
                    theta_close: args.float("tclose")?.unwrap_or(defaults.theta_close),
                    initially_open,
                })
                .map_err(|e| with_line(e, line.no))?;
            }
            "port" => {
                if rest.is_empty() || rest[0].text.contains('=') {
                    return Err(syntax(line.no, kw.col, "missing port id"));
                }
                let args = Args::new(line.no, &rest[1..], &["a", "b", "g", "state"])?;
                let covered = match args.get("state") {
                    None | Some(("uncovered", _)) => false,
                    Some(("covered", _)) => true,
                    Some((v, col)) => {
                        return Err(syntax(line.no, col, format!("unknown port state '{v}'")))
                    }
                };
                net.add_port(Port {
                    id: rest[0].text.into(),
                    a: args.required("a", kw.col)?.into(),
                    b: args.required("b", kw.col)?.into(),
                    conductance: args.float("g")?.unwrap_or(defaults.g_open),
                    covered,
                })
                .map_err(|e| with_line(e, line.no))?;
            }
            "probe" => {
                if rest.len() != 2 {
                    return Err(syntax(line.no, kw.col, "expected 'probe node|valve <id>'"));
                }
                let probe = match rest[0].text {
                    "node" => Probe::Node(rest[1].text.into()),
                    "valve" => Probe::Valve(rest[1].text.into()),
                    other => {
                        return Err(syntax(line.no, rest[0].col, format!("unknown probe kind '{other}'")))
                    }
                };
                net.add_probe(probe).map_err(|e| with_line(e, line.no))?;
            }
            "meta" => {
                if rest.is_empty() {
                    return Err(syntax(line.no, kw.col, "expected 'meta <key> <value>'"));
                }
                let key = rest[0].text;
                let value = line.raw[rest[0].start + key.len()..].trim();
                net.set_meta(key, value);
            }
            "cell" => {
                cell_count += 1;
                let spec = parse_cell(line.no, kw.col, rest, cell_count)?;
                for port in spec.ports.values() {
                    for id in port.split(',') {
                        if net.node(id).is_none() {
                            return Err(NetlistError::UndefinedNode {
                                id: id.to_string(),
                                line: Some(line.no),
                            });
                        }
                    }
                }
                let fragment =
                    stdcells::expand_cell(&spec).map_err(|e| syntax(line.no, kw.col, e.to_string()))?;
                net.union(&fragment).map_err(|e| with_line(e, line.no))?;
            }
            _ => {}
        }
    }
    Ok(net)
}

fn parse_cell(
    line: usize,
    col: usize,
    tokens: &[Token<'_>],
    ordinal: usize,
) -> Result<CellSpec, NetlistError> {
    let Some(kind_tok) = tokens.first() else {
        return Err(syntax(line, col, "expected 'cell <KIND> ...'"));
    };
    let kind: CellKind = kind_tok
        .text
        .parse()
        .map_err(|e: String| syntax(line, kind_tok.col, e))?;
    let port_names = kind.port_names();
    let mut allowed: Vec<&str> = port_names.to_vec();
    allowed.extend(["name", "gpu", "gopen", "topen", "tclose", "cap"]);
    let args = Args::new(line, &tokens[1..], &allowed)?;
    let mut spec = CellSpec::new(
        kind,
        args.get("name")
            .map(|(v, _)| v.to_string())
            .unwrap_or_else(|| format!("cell{ordinal}")),
    );
    for p in port_names {
        let optional = kind.optional_ports().contains(p);
        match args.get(p) {
            Some((v, _)) => {
                spec.ports.insert((*p).to_string(), v.to_string());
            }
            None if optional => {}
            None => return Err(syntax(line, kind_tok.col, format!("missing port '{p}='"))),
        }
    }
    let mut params = CellParams::default();
    if let Some(v) = args.float("gpu")? {
        params.g_pullup = v;
    }
    if let Some(v) = args.float("gopen")? {
        params.g_open = v;
    }
    if let Some(v) = args.float("topen")? {
        params.theta_open = v;
    }
    if let Some(v) = args.float("tclose")? {
        params.theta_close = v;
    }
    if let Some(v) = args.float("cap")? {
        params.capacitance = v;
    }
    spec.params = params;
    Ok(spec)
}

/// Writes a netlist in the text format. Cells appear flattened; declaration
/// order within each element kind is preserved.
pub fn serialize_netlist(net: &Netlist) -> String {
    let mut out = String::new();
    for (k, v) in net.metadata() {
        let _ = writeln!(out, "meta {k} {v}");
    }
    for n in net.nodes() {
        match n.rail {
            Some(r) => {
                let _ = writeln!(out, "rail {} {}", n.id, r.keyword());
            }
            None => {
                let _ = write!(out, "node {} cap={}", n.id, n.capacitance);
                if let Some(p) = n.init {
                    let _ = write!(out, " init={p}");
                }
                out.push('\n');
            }
        }
    }
    for c in net.channels() {
        let _ = writeln!(out, "chan {} {} g={}", c.a, c.b, c.conductance);
    }
    for v in net.valves() {
        let _ = write!(
            out,
            "valve {} gate={} src={} drn={} g={} topen={} tclose={}",
            v.id, v.gate, v.source, v.drain, v.g_open, v.theta_open, v.theta_close
        );
        if v.initially_open {
            out.push_str(" state=open");
        }
        out.push('\n');
    }
    for p in net.ports() {
        let _ = write!(out, "port {} a={} b={} g={}", p.id, p.a, p.b, p.conductance);
        if p.covered {
            out.push_str(" state=covered");
        }
        out.push('\n');
    }
    for p in net.probes() {
        match p {
            Probe::Node(id) => {
                let _ = writeln!(out, "probe node {id}");
            }
            Probe::Valve(id) => {
                let _ = writeln!(out, "probe valve {id}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOT_DOC: &str = "\
# inverter
rail VAC vacuum
rail ATM atmosphere
node in cap=1.0
node out cap=1.0
chan VAC out g=1.0
valve v1 gate=in src=out drn=ATM g=100.0
probe node out
";

    #[test]
    fn parses_inverter() {
        let net = parse_netlist(NOT_DOC).unwrap();
        assert_eq!(net.valve_count(), 1);
        assert_eq!(net.channel_count(), 1);
        assert_eq!(net.node_count(), 4);
        let v = net.valve("v1").unwrap();
        assert_eq!((v.theta_open, v.theta_close), (0.75, 0.65));
        assert!(!v.initially_open);
    }

    #[test]
    fn round_trip_is_stable() {
        let net = parse_netlist(NOT_DOC).unwrap();
        let again = parse_netlist(&serialize_netlist(&net)).unwrap();
        assert_eq!(net, again);
        assert_eq!(serialize_netlist(&net), serialize_netlist(&again));
    }

    #[test]
    fn undefined_node_is_named() {
        let doc = NOT_DOC.replace("gate=in", "gate=ghost");
        let err = parse_netlist(&doc).unwrap_err();
        assert!(err.to_string().contains("undefined node 'ghost'"), "{err}");
        assert!(err.to_string().starts_with("line 7"));
    }

    #[test]
    fn syntax_errors_report_position() {
        let doc = NOT_DOC.replace("g=1.0", "g=abc");
        match parse_netlist(&doc).unwrap_err() {
            NetlistError::Syntax { line, column, .. } => {
                assert_eq!(line, 6);
                assert_eq!(column, 16);
            }
            e => panic!("unexpected {e}"),
        }
        let doc = NOT_DOC.replace("g=100.0", "g=100.0 leak=0.1");
        assert!(matches!(
            parse_netlist(&doc).unwrap_err(),
            NetlistError::Syntax { line: 7, .. }
        ));
    }

    #[test]
    fn duplicate_and_missing_rails() {
        let doc = NOT_DOC.replace("node out cap=1.0", "node in cap=2.0");
        assert!(matches!(
            parse_netlist(&doc).unwrap_err(),
            NetlistError::DuplicateId { line: Some(5), .. }
        ));
        let doc = NOT_DOC.replace("rail ATM atmosphere\n", "");
        assert_eq!(
            parse_netlist(&doc).unwrap_err(),
            NetlistError::MissingRail(Rail::Atmosphere)
        );
    }

    #[test]
    fn forward_references_resolve() {
        let doc = "chan VAC x g=1\nrail VAC vacuum\nrail ATM atmosphere\nnode x cap=2\n";
        let net = parse_netlist(doc).unwrap();
        assert_eq!(net.node("x").unwrap().capacitance, 2.0);
    }

    #[test]
    fn cells_expand_and_flatten() {
        let doc = "\
rail VAC vacuum
rail ATM atmosphere
node a cap=1
node b cap=1
node y cap=1
cell NAND2 a=a b=b out=y name=g1
probe node y
";
        let net = parse_netlist(doc).unwrap();
        assert_eq!(net.valve_count(), 2);
        let again = parse_netlist(&serialize_netlist(&net)).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn cell_port_must_be_declared() {
        let doc = "rail VAC vacuum\nrail ATM atmosphere\nnode a cap=1\ncell NOT in=a out=zz\n";
        let err = parse_netlist(doc).unwrap_err();
        assert!(err.to_string().contains("undefined node 'zz'"));
    }

    #[test]
    fn metadata_and_ports_round_trip() {
        let doc = "\
meta title button demo
rail VAC vacuum
rail ATM atmosphere
node clk cap=1 init=0.5
chan VAC clk g=1
port btn a=clk b=ATM g=100 state=covered
";
        let net = parse_netlist(doc).unwrap();
        assert_eq!(net.metadata()["title"], "button demo");
        assert!(net.port("btn").unwrap().covered);
        assert_eq!(parse_netlist(&serialize_netlist(&net)).unwrap(), net);
    }
}
