// SPDX-License-Identifier: Apache-2.0

//! Flat structural Verilog.
//!
//! Accepted subset: a single non-ANSI `module` with a port name list,
//! scalar `input`, `output` and `wire` declarations, and cell instantiations
//! with named port connections. Escaped identifiers (`\foo[3] `) and both
//! comment styles are supported. A register kind's clock pin may be
//! connected; the connection is ignored. Buses, literals, `assign` and all
//! behavioral constructs are rejected.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use super::{CellLibrary, Instance, NetId, Netlist, NetlistError};

const BEHAVIORAL: &[&str] = &[
    "always", "assign", "initial", "reg", "begin", "end", "if", "else", "case", "casez",
    "casex", "endcase", "posedge", "negedge", "function", "endfunction", "task", "endtask",
    "generate", "endgenerate", "for", "while", "parameter", "localparam", "integer",
    "always_ff", "always_comb", "logic",
];

const RESERVED: &[&str] = &["module", "endmodule", "input", "output", "wire", "inout"];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Punct(char),
    /// Any other character; reported when the parser reaches it.
    Other(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
    escaped: bool,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> NetlistError {
    NetlistError::Syntax { line, column, message: message.into() }
}

fn unexpected(t: &Token, expected: &str) -> NetlistError {
    match t.tok {
        Tok::Other('@') => {
            NetlistError::Behavioral { line: t.line, column: t.column, construct: "@".into() }
        }
        Tok::Other('[') => syntax(t.line, t.column, "bus ranges and bit selects are not supported"),
        Tok::Other(c) if c.is_ascii_digit() || c == '\'' => {
            syntax(t.line, t.column, "literal constants are not supported; use tie cells")
        }
        Tok::Other(c) => syntax(t.line, t.column, format!("unexpected character {c:?}")),
        ref other => syntax(t.line, t.column, format!("expected {expected}, found {other:?}")),
    }
}

struct Cursor {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

impl Cursor {
    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.i + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0).filter(|&c| f(c)) {
            s.push(c);
            self.bump();
        }
        s
    }
}

fn lex(text: &str) -> Result<Vec<Token>, NetlistError> {
    let mut cur = Cursor { chars: text.chars().collect(), i: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    while let Some(c) = cur.peek(0) {
        let (line, column) = (cur.line, cur.col);
        let push = |out: &mut Vec<Token>, tok, escaped| out.push(Token { tok, line, column, escaped });
        if c.is_whitespace() {
            cur.bump();
        } else if c == '/' && cur.peek(1) == Some('/') {
            cur.take_while(|c| c != '\n');
        } else if c == '/' && cur.peek(1) == Some('*') {
            cur.bump();
            cur.bump();
            loop {
                match (cur.peek(0), cur.peek(1)) {
                    (None, _) => return Err(syntax(line, column, "unterminated block comment")),
                    (Some('*'), Some('/')) => {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    _ => {
                        cur.bump();
                    }
                }
            }
        } else if c == '\\' {
            cur.bump();
            let s = cur.take_while(|c| !c.is_whitespace());
            if s.is_empty() {
                return Err(syntax(line, column, "empty escaped identifier"));
            }
            push(&mut out, Tok::Ident(s), true);
        } else if c.is_ascii_alphabetic() || c == '_' {
            let s = cur.take_while(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$');
            push(&mut out, Tok::Ident(s), false);
        } else if "(),;.".contains(c) {
            cur.bump();
            push(&mut out, Tok::Punct(c), false);
        } else {
            cur.bump();
            push(&mut out, Tok::Other(c), false);
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|t| (t.line, t.column)).unwrap_or(self.end)
    }

    fn err(&self, message: impl Into<String>) -> NetlistError {
        let (l, c) = self.here();
        syntax(l, c, message)
    }

    fn next(&mut self) -> Result<Token, NetlistError> {
        let t = self.peek().cloned().ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn punct(&mut self, p: char) -> Result<(), NetlistError> {
        match self.next()? {
            Token { tok: Tok::Punct(q), .. } if q == p => Ok(()),
            t => Err(unexpected(&t, &format!("`{p}`"))),
        }
    }

    fn at_punct(&self, p: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(q), .. }) if *q == p)
    }

    /// An identifier that is not a keyword (escaped identifiers never are).
    fn ident(&mut self) -> Result<(String, usize, usize), NetlistError> {
        let t = self.next()?;
        match t.tok {
            Tok::Ident(s) => {
                if !t.escaped {
                    check_keyword(&s, t.line, t.column)?;
                }
                Ok((s, t.line, t.column))
            }
            _ => Err(unexpected(&t, "identifier")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), NetlistError> {
        let t = self.next()?;
        match &t.tok {
            Tok::Ident(s) if s == kw && !t.escaped => Ok(()),
            Tok::Ident(s) if !t.escaped && BEHAVIORAL.contains(&s.as_str()) => {
                Err(NetlistError::Behavioral { line: t.line, column: t.column, construct: s.clone() })
            }
            _ => Err(unexpected(&t, &format!("`{kw}`"))),
        }
    }

    fn ident_list(&mut self) -> Result<Vec<(String, usize, usize)>, NetlistError> {
        let mut names = vec![self.ident()?];
        while self.at_punct(',') {
            self.pos += 1;
            names.push(self.ident()?);
        }
        self.punct(';')?;
        Ok(names)
    }
}

fn check_keyword(s: &str, line: usize, column: usize) -> Result<(), NetlistError> {
    if BEHAVIORAL.contains(&s) {
        return Err(NetlistError::Behavioral { line, column, construct: s.into() });
    }
    if RESERVED.contains(&s) {
        return Err(syntax(line, column, format!("unexpected keyword `{s}`")));
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Input,
    Output,
    Wire,
}

pub fn parse_verilog_subset(text: &str, lib: &Arc<CellLibrary>) -> Result<Netlist, NetlistError> {
    let toks = lex(text)?;
    let end = toks.last().map(|t| (t.line, t.column + 1)).unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, end };

    p.keyword("module")?;
    let (module_name, _, _) = p.ident()?;
    let mut header = Vec::new();
    if p.at_punct('(') {
        p.pos += 1;
        if !p.at_punct(')') {
            header.push(p.ident()?);
            while p.at_punct(',') {
                p.pos += 1;
                header.push(p.ident()?);
            }
        }
        p.punct(')')?;
    }
    p.punct(';')?;

    let mut nets: Vec<String> = Vec::new();
    let mut roles: Vec<Role> = Vec::new();
    let mut index: HashMap<String, NetId> = HashMap::new();
    let mut pending: Vec<(String, String, Vec<(String, String, usize, usize)>, usize, usize)> =
        Vec::new();

    loop {
        let Some(tok) = p.peek().cloned() else {
            return Err(p.err("missing `endmodule`"));
        };
        let Tok::Ident(word) = &tok.tok else {
            return Err(unexpected(&tok, "a declaration or instance"));
        };
        let word = word.clone();
        if !tok.escaped {
            match word.as_str() {
                "endmodule" => {
                    p.pos += 1;
                    break;
                }
                "input" | "output" | "wire" => {
                    p.pos += 1;
                    let role = match word.as_str() {
                        "input" => Role::Input,
                        "output" => Role::Output,
                        _ => Role::Wire,
                    };
                    for (name, line, column) in p.ident_list()? {
                        match index.get(&name) {
                            None => {
                                index.insert(name.clone(), NetId(nets.len()));
                                nets.push(name);
                                roles.push(role);
                            }
                            Some(&id) => {
                                let prev = roles[id.0];
                                if role == Role::Wire {
                                    continue;
                                }
                                if prev != Role::Wire && prev != role {
                                    return Err(syntax(
                                        line,
                                        column,
                                        format!("net {name} declared as both input and output"),
                                    ));
                                }
                                roles[id.0] = role;
                            }
                        }
                    }
                    continue;
                }
                "inout" => return Err(syntax(tok.line, tok.column, "inout ports are not supported")),
                "module" => {
                    return Err(syntax(tok.line, tok.column, "only one module is supported"))
                }
                w => check_keyword(w, tok.line, tok.column)?,
            }
        }

        // cell instantiation
        let (kind_name, kl, kc) = p.ident()?;
        let (inst_name, _, _) = p.ident()?;
        p.punct('(')?;
        let mut conns = Vec::new();
        if !p.at_punct(')') {
            loop {
                if !p.at_punct('.') {
                    return Err(p.err("only named port connections are supported"));
                }
                p.pos += 1;
                let (pin, pl, pc) = p.ident()?;
                p.punct('(')?;
                if p.at_punct(')') {
                    return Err(syntax(pl, pc, format!("pin {pin} of {inst_name} is unconnected")));
                }
                let (net, _, _) = p.ident()?;
                p.punct(')')?;
                conns.push((pin, net, pl, pc));
                if p.at_punct(',') {
                    p.pos += 1;
                } else {
                    break;
                }
            }
        }
        p.punct(')')?;
        p.punct(';')?;
        pending.push((kind_name, inst_name, conns, kl, kc));
    }
    if let Some(t) = p.peek() {
        return Err(syntax(t.line, t.column, "text after `endmodule`"));
    }

    let resolve = |owner: &str, net: &str| {
        index.get(net).copied().ok_or_else(|| NetlistError::UnknownNet {
            instance: owner.into(),
            net: net.into(),
        })
    };

    let mut instances = Vec::with_capacity(pending.len());
    for (kind_name, inst_name, conns, kl, kc) in pending {
        let kind_id = lib.find(&kind_name).ok_or_else(|| NetlistError::UnknownKind {
            instance: inst_name.clone(),
            kind: kind_name.clone(),
        })?;
        let kind = lib.kind(kind_id);
        if kind.is_port() {
            return Err(NetlistError::PortInstance { instance: inst_name, kind: kind_name });
        }
        let mut inputs: Vec<Option<NetId>> = vec![None; kind.input_count()];
        let mut output = None;
        for (pin, net, pl, pc) in conns {
            let net_id = resolve(&inst_name, &net)?;
            let slot = if let Some(k) = kind.inputs.iter().position(|x| *x == pin) {
                &mut inputs[k]
            } else if pin == kind.output {
                &mut output
            } else if kind.clock.as_deref() == Some(pin.as_str()) {
                continue;
            } else {
                return Err(syntax(pl, pc, format!("kind {kind_name} has no pin {pin}")));
            };
            if slot.replace(net_id).is_some() {
                return Err(syntax(pl, pc, format!("pin {pin} connected twice")));
            }
        }
        let inputs = inputs
            .into_iter()
            .enumerate()
            .map(|(k, n)| {
                n.ok_or_else(|| {
                    syntax(kl, kc, format!("pin {} of {inst_name} is unconnected", kind.inputs[k]))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let output = output
            .ok_or_else(|| syntax(kl, kc, format!("output pin of {inst_name} is unconnected")))?;
        instances.push(Instance { id: inst_name, kind: kind_id, inputs, output });
    }

    let mut pis = Vec::new();
    let mut pos = Vec::new();
    for (name, line, column) in &header {
        let id = index.get(name).copied().ok_or_else(|| {
            syntax(*line, *column, format!("port {name} has no direction declaration"))
        })?;
        match roles[id.0] {
            Role::Input => pis.push(id),
            Role::Output => pos.push(id),
            Role::Wire => {
                return Err(syntax(*line, *column, format!("port {name} has no direction")))
            }
        }
    }
    for (i, role) in roles.iter().enumerate() {
        let listed = header.iter().any(|(n, _, _)| *n == nets[i]);
        if *role != Role::Wire && !listed {
            return Err(NetlistError::Schema(format!("port {} missing from module header", nets[i])));
        }
    }

    Netlist::new(module_name, lib.clone(), nets, pis, pos, instances, None)
}

fn is_plain_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    let first_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    first_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
        && !BEHAVIORAL.contains(&s)
        && !RESERVED.contains(&s)
        && s != "endmodule"
}

fn ident(s: &str) -> String {
    if is_plain_identifier(s) {
        s.to_string()
    } else {
        format!("\\{s} ")
    }
}

/// Writes `n` as flat structural Verilog. Declarations follow net order so
/// that reading the text back reproduces the same netlist (labels excluded).
pub fn emit_verilog(n: &Netlist) -> String {
    let mut out = String::new();
    let mut roles = vec![Role::Wire; n.nets().len()];
    for &i in n.primary_inputs() {
        roles[i.0] = Role::Input;
    }
    for &o in n.primary_outputs() {
        roles[o.0] = Role::Output;
    }
    let header: Vec<String> = n
        .primary_inputs()
        .iter()
        .chain(n.primary_outputs())
        .map(|&id| ident(n.net_name(id)))
        .collect();
    let _ = writeln!(out, "module {} ({});", ident(n.name()), header.join(", "));
    for (i, name) in n.nets().iter().enumerate() {
        let kw = match roles[i] {
            Role::Input => "input",
            Role::Output => "output",
            Role::Wire => "wire",
        };
        let _ = writeln!(out, "  {kw} {};", ident(name));
    }
    for inst in n.instances() {
        let kind = n.kind_of(inst);
        let mut conns: Vec<String> = kind
            .inputs
            .iter()
            .zip(&inst.inputs)
            .map(|(pin, &net)| format!(".{pin}({})", ident(n.net_name(net))))
            .collect();
        conns.push(format!(".{}({})", kind.output, ident(n.net_name(inst.output))));
        let _ = writeln!(out, "  {} {} ({});", kind.name, ident(&inst.id), conns.join(", "));
    }
    out.push_str("endmodule\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_json_netlist;

    fn lib() -> Arc<CellLibrary> {
        Arc::new(CellLibrary::standard())
    }

    #[test]
    fn single_inverter() {
        let text = "module m (a, n1);\n input a;\n output n1;\n INV u1 (.A(a), .Y(n1));\nendmodule\n";
        let n = parse_verilog_subset(text, &lib()).unwrap();
        assert_eq!(n.instances().len(), 1);
        assert_eq!(n.kind_of(&n.instances()[0]).name, "INV");
    }

    #[test]
    fn always_block_is_behavioral() {
        let text = "module m (clk, q);\n input clk;\n output q;\n always @(posedge clk) q <= 1;\nendmodule";
        let err = parse_verilog_subset(text, &lib()).unwrap_err();
        assert_eq!(
            err,
            NetlistError::Behavioral { line: 4, column: 2, construct: "always".into() }
        );
        let text = "module m (a, y);\n input a;\n output y;\n assign y = a;\nendmodule";
        assert!(matches!(
            parse_verilog_subset(text, &lib()).unwrap_err(),
            NetlistError::Behavioral { line: 4, .. }
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let text = "module m (a, y);\n input a;\n output y;\n INV u1 (.A(a) .Y(y));\nendmodule";
        match parse_verilog_subset(text, &lib()).unwrap_err() {
            NetlistError::Syntax { line, column, .. } => assert_eq!((line, column), (4, 16)),
            e => panic!("unexpected {e:?}"),
        }
        let text = "module m (a, y);\n input [3:0] a;\nendmodule";
        assert!(matches!(
            parse_verilog_subset(text, &lib()).unwrap_err(),
            NetlistError::Syntax { line: 2, column: 8, .. }
        ));
    }

    #[test]
    fn unknown_kind_rejected() {
        let text = "module m (a, y);\n input a;\n output y;\n NAND2 u1 (.A(a), .B(a), .Y(y));\nendmodule";
        assert_eq!(
            parse_verilog_subset(text, &lib()).unwrap_err(),
            NetlistError::UnknownKind { instance: "u1".into(), kind: "NAND2".into() }
        );
    }

    #[test]
    fn clock_pin_is_accepted_and_dropped() {
        let text = r"
            // register with clock
            module m (clk, d, q);
              input clk, d;
              output q;
              /* state */
              DFF \r[0]  (.CK(clk), .D(d), .Q(q));
            endmodule";
        let n = parse_verilog_subset(text, &lib()).unwrap();
        assert_eq!(n.instances()[0].id, "r[0]");
        assert_eq!(n.instances()[0].inputs, vec![NetId(1)]);
        assert_eq!(n.primary_inputs().len(), 2);
    }

    #[test]
    fn matches_json_parser() {
        let json = r#"{
            "name": "t", "library_version": "std11-1",
            "ports": {"inputs": ["a", "b"], "outputs": ["y"]},
            "nets": ["a", "b", "n1", "y"],
            "instances": [
                {"id": "u1", "kind": "INV", "inputs": ["a"], "output": "n1"},
                {"id": "u2", "kind": "AND2", "inputs": ["n1", "b"], "output": "y"}
            ]
        }"#;
        let verilog = "module t (a, b, y);\n input a;\n input b;\n wire n1;\n output y;\n\
                       INV u1 (.Y(n1), .A(a));\n AND2 u2 (.B(b), .A(n1), .Y(y));\nendmodule";
        let from_json = parse_json_netlist(json.as_bytes(), &lib()).unwrap();
        let emitted = emit_verilog(&from_json);
        assert_eq!(parse_verilog_subset(&emitted, &lib()).unwrap(), from_json);
        // pin order in the text does not matter
        let v = parse_verilog_subset(verilog, &lib()).unwrap();
        assert_eq!(v, from_json);
    }
}
