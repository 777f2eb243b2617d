use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Token, TokenKind};
use super::{has_errors, ParseDiagnostic};
use crate::algebra::{EntityId, EvaluationMode, IdrExpression};
use crate::cascade::{FailureEvent, Objective};
use crate::network::{EdgeClass, EdgeDecl, EntityDecl, EntityKind, JointNetwork};
use crate::runner::Scenario;
use crate::solver::SolverKind;

/// Parses one IDR expression. Precedence: `.` over `+` over `^`, all
/// left-associative; parentheses override.
pub fn parse_expr(source: &str) -> Result<IdrExpression, ParseDiagnostic> {
    let tokens = tokenize(source)?;
    let tokens: Vec<Token> = tokens
        .into_iter()
        .filter(|t| !t.is(TokenKind::Newline))
        .collect();
    let mut cursor = ExprCursor::new(&tokens);
    let expr = cursor.xor_level()?;
    if let Some(extra) = cursor.peek() {
        return Err(ParseDiagnostic::error(
            format!("unexpected input after expression: {:?}", extra.text),
            extra.line,
            extra.column,
        ));
    }
    Ok(expr)
}

struct ExprCursor<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> ExprCursor<'a> {
    fn new(tokens: &'a [Token]) -> Self {
        ExprCursor { tokens, pos: 0 }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn advance(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn eof_position(&self) -> (u32, u32) {
        self.tokens
            .last()
            .map(|t| (t.line, t.column + t.text.len() as u32))
            .unwrap_or((1, 1))
    }

    fn xor_level(&mut self) -> Result<IdrExpression, ParseDiagnostic> {
        let mut operands = vec![self.or_level()?];
        while self.peek().is_some_and(|t| t.is(TokenKind::Caret)) {
            self.advance();
            operands.push(self.or_level()?);
        }
        Ok(flatten(IdrExpression::NewXor, operands))
    }

    fn or_level(&mut self) -> Result<IdrExpression, ParseDiagnostic> {
        let mut operands = vec![self.and_level()?];
        while self.peek().is_some_and(|t| t.is(TokenKind::Plus)) {
            self.advance();
            operands.push(self.and_level()?);
        }
        Ok(flatten(IdrExpression::MaxOr, operands))
    }

    fn and_level(&mut self) -> Result<IdrExpression, ParseDiagnostic> {
        let mut operands = vec![self.atom()?];
        while self.peek().is_some_and(|t| t.is(TokenKind::Dot)) {
            self.advance();
            operands.push(self.atom()?);
        }
        Ok(flatten(IdrExpression::MinAnd, operands))
    }

    fn atom(&mut self) -> Result<IdrExpression, ParseDiagnostic> {
        match self.advance() {
            Some(t) if t.is(TokenKind::Ident) => Ok(IdrExpression::Entity(EntityId::new(&t.text))),
            Some(t) if t.is(TokenKind::LParen) => {
                let open = (t.line, t.column);
                let inner = self.xor_level()?;
                match self.advance() {
                    Some(t) if t.is(TokenKind::RParen) => Ok(inner),
                    _ => Err(ParseDiagnostic::error(
                        "unterminated parenthesis",
                        open.0,
                        open.1,
                    )),
                }
            }
            Some(t) => Err(ParseDiagnostic::error(
                format!("expected entity or '(', found {:?}", t.text),
                t.line,
                t.column,
            )),
            None => {
                let (line, column) = self.eof_position();
                Err(ParseDiagnostic::error(
                    "expected entity or '(', found end of input",
                    line,
                    column,
                ))
            }
        }
    }
}

fn flatten(
    make: fn(Vec<IdrExpression>) -> IdrExpression,
    mut operands: Vec<IdrExpression>,
) -> IdrExpression {
    if operands.len() == 1 {
        operands.pop().unwrap()
    } else {
        make(operands)
    }
}

/// Parses a `.grid` network file. All problems are collected; the parse
/// fails only when at least one of them is an error.
pub fn parse_network(source: &str) -> Result<JointNetwork, Vec<ParseDiagnostic>> {
    let tokens = match tokenize(source) {
        Ok(tokens) => tokens,
        Err(diag) => return Err(vec![diag]),
    };

    let mut diags: Vec<ParseDiagnostic> = Vec::new();
    let mut entities: BTreeMap<EntityId, EntityDecl> = BTreeMap::new();
    let mut idrs: BTreeMap<EntityId, IdrExpression> = BTreeMap::new();
    let mut edges: Vec<EdgeDecl> = Vec::new();
    let mut section: Option<String> = None;
    let mut seen_sections: BTreeSet<String> = BTreeSet::new();

    for line in split_lines(&tokens) {
        if line.is_empty() {
            continue;
        }
        if line[0].is(TokenKind::Section) {
            let name = line[0].text.clone();
            if line.len() > 1 {
                diags.push(ParseDiagnostic::error(
                    "section header must be alone on its line",
                    line[1].line,
                    line[1].column,
                ));
            }
            if !matches!(name.as_str(), "entities" | "edges" | "idrs") {
                diags.push(ParseDiagnostic::error(
                    format!("unknown section [{name}]"),
                    line[0].line,
                    line[0].column,
                ));
                section = None;
                continue;
            }
            if !seen_sections.insert(name.clone()) {
                diags.push(ParseDiagnostic::error(
                    format!("duplicate section [{name}]"),
                    line[0].line,
                    line[0].column,
                ));
            }
            section = Some(name);
            continue;
        }
        match section.as_deref() {
            None => diags.push(ParseDiagnostic::error(
                "content before any section header",
                line[0].line,
                line[0].column,
            )),
            Some("entities") => parse_entity_line(line, &mut entities, &mut diags),
            Some("edges") => parse_edge_line(line, &mut edges, &mut diags),
            Some("idrs") => parse_idr_line(line, &mut idrs, &mut diags),
            Some(_) => unreachable!("unknown sections reset to None"),
        }
    }

    // Cross validation: every referenced symbol must be declared.
    for edge in &edges {
        for end in [&edge.a, &edge.b]
            .into_iter()
            .chain(edge.bound_entity.as_ref())
        {
            if !entities.contains_key(end) {
                diags.push(ParseDiagnostic::error(
                    format!("undeclared entity {end}"),
                    0,
                    0,
                ));
            }
        }
    }
    for (target, expr) in &idrs {
        if !entities.contains_key(target) {
            diags.push(ParseDiagnostic::error(
                format!("undeclared entity {target}"),
                0,
                0,
            ));
        }
        for reference in expr.references() {
            if !entities.contains_key(&reference) {
                diags.push(ParseDiagnostic::error(
                    format!("undeclared entity {reference} in IDR of {target}"),
                    0,
                    0,
                ));
            }
        }
    }

    if has_errors(&diags) {
        Err(diags)
    } else {
        Ok(JointNetwork::new(entities, idrs, edges))
    }
}

fn split_lines(tokens: &[Token]) -> Vec<&[Token]> {
    tokens.split(|t| t.is(TokenKind::Newline)).collect()
}

fn parse_entity_line(
    line: &[Token],
    entities: &mut BTreeMap<EntityId, EntityDecl>,
    diags: &mut Vec<ParseDiagnostic>,
) {
    let bad = |diags: &mut Vec<ParseDiagnostic>, t: &Token, what: &str| {
        diags.push(ParseDiagnostic::error(what.to_owned(), t.line, t.column));
    };
    if line.len() < 2 || !line[0].is(TokenKind::Ident) || !line[1].is(TokenKind::Ident) {
        bad(
            diags,
            &line[0],
            "expected `<id> <kind> [gen] [pmu] [sub=<int>]`",
        );
        return;
    }
    let id = EntityId::new(&line[0].text);
    let Some(kind) = EntityKind::from_keyword(&line[1].text) else {
        bad(
            diags,
            &line[1],
            &format!("unknown entity kind {:?}", line[1].text),
        );
        return;
    };
    let mut decl = EntityDecl::of_kind(kind);
    let mut rest = line[2..].iter().peekable();
    while let Some(tok) = rest.next() {
        match (tok.kind.clone(), tok.text.as_str()) {
            (TokenKind::Ident, "gen") => decl.is_generator = true,
            (TokenKind::Ident, "pmu") => decl.has_pmu = true,
            (TokenKind::Ident, "sub") => {
                let eq = rest.next();
                let value = rest.next();
                match (eq, value) {
                    (Some(eq), Some(value))
                        if eq.is(TokenKind::Equals) && value.is(TokenKind::Integer) =>
                    {
                        decl.substation = value.text.parse().ok();
                    }
                    _ => {
                        bad(diags, tok, "expected sub=<int>");
                        return;
                    }
                }
            }
            _ => {
                bad(
                    diags,
                    tok,
                    &format!("unknown entity attribute {:?}", tok.text),
                );
                return;
            }
        }
    }
    if entities.insert(id.clone(), decl).is_some() {
        diags.push(ParseDiagnostic::error(
            format!("duplicate entity {id}"),
            line[0].line,
            line[0].column,
        ));
    }
}

fn parse_edge_line(line: &[Token], edges: &mut Vec<EdgeDecl>, diags: &mut Vec<ParseDiagnostic>) {
    let usage = "expected `pp|pc|cc <idA> <idB> [entity=<id>]`";
    if line.len() < 3
        || !line[0].is(TokenKind::Ident)
        || !line[1].is(TokenKind::Ident)
        || !line[2].is(TokenKind::Ident)
    {
        diags.push(ParseDiagnostic::error(usage, line[0].line, line[0].column));
        return;
    }
    let Some(class) = EdgeClass::from_keyword(&line[0].text) else {
        diags.push(ParseDiagnostic::error(
            format!("unknown edge class {:?}", line[0].text),
            line[0].line,
            line[0].column,
        ));
        return;
    };
    let a = EntityId::new(&line[1].text);
    let b = EntityId::new(&line[2].text);
    let mut bound = None;
    match &line[3..] {
        [] => {}
        [kw, eq, id]
            if kw.is(TokenKind::Ident)
                && kw.text == "entity"
                && eq.is(TokenKind::Equals)
                && id.is(TokenKind::Ident) =>
        {
            bound = Some(EntityId::new(&id.text));
        }
        [first, ..] => {
            diags.push(ParseDiagnostic::error(usage, first.line, first.column));
            return;
        }
    }
    edges.push(EdgeDecl::new(class, a, b, bound));
}

fn parse_idr_line(
    line: &[Token],
    idrs: &mut BTreeMap<EntityId, IdrExpression>,
    diags: &mut Vec<ParseDiagnostic>,
) {
    if line.len() < 3 || !line[0].is(TokenKind::Ident) || !line[1].is(TokenKind::Arrow) {
        diags.push(ParseDiagnostic::error(
            "expected `<id> <- <expression>`",
            line[0].line,
            line[0].column,
        ));
        return;
    }
    let target = EntityId::new(&line[0].text);
    let mut cursor = ExprCursor::new(&line[2..]);
    let expr = match cursor.xor_level() {
        Ok(expr) => expr,
        Err(diag) => {
            diags.push(diag);
            return;
        }
    };
    if let Some(extra) = cursor.peek() {
        diags.push(ParseDiagnostic::error(
            format!("unexpected input after expression: {:?}", extra.text),
            extra.line,
            extra.column,
        ));
        return;
    }
    if idrs.insert(target.clone(), expr).is_some() {
        diags.push(ParseDiagnostic::error(
            format!("duplicate IDR target {target}"),
            line[0].line,
            line[0].column,
        ));
    }
}

/// Parses a `.scn` scenario file. Scenario files are line oriented with
/// whitespace-separated fields, so paths keep their punctuation.
pub fn parse_scenario(source: &str) -> Result<Scenario, Vec<ParseDiagnostic>> {
    let mut diags = Vec::new();
    let mut network_path: Option<String> = None;
    let mut mode: Option<EvaluationMode> = None;
    let mut k: Option<u32> = None;
    let mut solver: Option<SolverKind> = None;
    let mut objective: Option<Objective> = None;
    let mut events: Vec<FailureEvent> = Vec::new();
    let mut query: Option<(u64, u64)> = None;

    for (index, raw_line) in source.lines().enumerate() {
        let line_no = index as u32 + 1;
        let line = raw_line.split("//").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        fn set_scalar<T>(
            slot: &mut Option<T>,
            value: T,
            name: &str,
            line_no: u32,
            diags: &mut Vec<ParseDiagnostic>,
        ) {
            if slot.is_some() {
                diags.push(ParseDiagnostic::error(
                    format!("duplicate directive {name}"),
                    line_no,
                    1,
                ));
            } else {
                *slot = Some(value);
            }
        }
        match fields[0] {
            "network" => match fields[1..] {
                [path] => set_scalar(
                    &mut network_path,
                    path.to_owned(),
                    "network",
                    line_no,
                    &mut diags,
                ),
                _ => diags.push(ParseDiagnostic::error(
                    "expected `network <path>`",
                    line_no,
                    1,
                )),
            },
            "mode" => match fields[1..] {
                ["miim"] => {
                    set_scalar(&mut mode, EvaluationMode::Miim, "mode", line_no, &mut diags)
                }
                ["iim"] => set_scalar(&mut mode, EvaluationMode::Iim, "mode", line_no, &mut diags),
                _ => diags.push(ParseDiagnostic::error(
                    "expected `mode miim|iim`",
                    line_no,
                    1,
                )),
            },
            "k" => match fields[1..].first().and_then(|f| f.parse::<u32>().ok()) {
                Some(value) if fields.len() == 2 && value > 0 => {
                    set_scalar(&mut k, value, "k", line_no, &mut diags)
                }
                _ => diags.push(ParseDiagnostic::error(
                    "expected `k <positive int>`",
                    line_no,
                    1,
                )),
            },
            "solver" => match fields[1..] {
                ["exact"] => set_scalar(
                    &mut solver,
                    SolverKind::Exact,
                    "solver",
                    line_no,
                    &mut diags,
                ),
                ["heuristic"] => set_scalar(
                    &mut solver,
                    SolverKind::Heuristic,
                    "solver",
                    line_no,
                    &mut diags,
                ),
                _ => diags.push(ParseDiagnostic::error(
                    "expected `solver exact|heuristic`",
                    line_no,
                    1,
                )),
            },
            "objective" => match fields[1..] {
                ["failed"] => set_scalar(
                    &mut objective,
                    Objective::Failed,
                    "objective",
                    line_no,
                    &mut diags,
                ),
                ["deficit"] => set_scalar(
                    &mut objective,
                    Objective::Deficit,
                    "objective",
                    line_no,
                    &mut diags,
                ),
                _ => diags.push(ParseDiagnostic::error(
                    "expected `objective failed|deficit`",
                    line_no,
                    1,
                )),
            },
            "at" => parse_event_line(&fields, line_no, &mut events, &mut diags),
            "query" => match fields[1..] {
                [range] => match parse_range(range) {
                    Some((t0, t1)) if t0 <= t1 => {
                        set_scalar(&mut query, (t0, t1), "query", line_no, &mut diags)
                    }
                    _ => diags.push(ParseDiagnostic::error(
                        "expected `query <t0>..<t1>` with t0 <= t1",
                        line_no,
                        1,
                    )),
                },
                _ => diags.push(ParseDiagnostic::error(
                    "expected `query <t0>..<t1>`",
                    line_no,
                    1,
                )),
            },
            other => diags.push(ParseDiagnostic::error(
                format!("unknown directive {other:?}"),
                line_no,
                1,
            )),
        }
    }

    if !events.is_sorted_by_key(|e| e.time_ms) {
        diags.push(ParseDiagnostic::error(
            "failure event times must be non-decreasing",
            1,
            1,
        ));
    }
    let Some(network_path) = network_path else {
        diags.push(ParseDiagnostic::error("missing `network` directive", 1, 1));
        return Err(diags);
    };
    if has_errors(&diags) {
        return Err(diags);
    }
    Ok(Scenario {
        network_path,
        mode: mode.unwrap_or(EvaluationMode::Miim),
        k: k.unwrap_or(1),
        solver: solver.unwrap_or(SolverKind::Exact),
        objective: objective.unwrap_or(Objective::Failed),
        events,
        query: query.unwrap_or((0, 0)),
    })
}

fn parse_event_line(
    fields: &[&str],
    line_no: u32,
    events: &mut Vec<FailureEvent>,
    diags: &mut Vec<ParseDiagnostic>,
) {
    let usage = "expected `at <t_ms> fail <id>[,<id>...]`";
    if fields.len() < 4 || fields[2] != "fail" {
        diags.push(ParseDiagnostic::error(usage, line_no, 1));
        return;
    }
    let Ok(time_ms) = fields[1].parse::<u64>() else {
        diags.push(ParseDiagnostic::error(usage, line_no, 1));
        return;
    };
    let joined = fields[3..].join("");
    let mut ids = BTreeSet::new();
    for part in joined.split(',') {
        if part.is_empty() || !is_identifier(part) {
            diags.push(ParseDiagnostic::error(
                format!("invalid entity id {part:?}"),
                line_no,
                1,
            ));
            return;
        }
        ids.insert(EntityId::new(part));
    }
    if ids.is_empty() {
        diags.push(ParseDiagnostic::error(usage, line_no, 1));
        return;
    }
    events.push(FailureEvent {
        time_ms,
        entity_ids: ids,
    });
}

fn parse_range(text: &str) -> Option<(u64, u64)> {
    let (lo, hi) = text.split_once("..")?;
    Some((lo.parse().ok()?, hi.parse().ok()?))
}

fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
