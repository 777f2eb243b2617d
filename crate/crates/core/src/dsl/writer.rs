use std::fmt::Write;

use crate::algebra::IdrExpression;
use crate::network::JointNetwork;

/// Canonical text for a network: sorted entities, sorted edges, sorted IDR
/// targets, single-space separators. Parsing the output reproduces the
/// network exactly.
pub fn serialize_network(net: &JointNetwork) -> String {
    let mut out = String::new();
    out.push_str("[entities]\n");
    for (id, decl) in &net.entities {
        write!(out, "{id} {}", decl.kind).unwrap();
        if decl.is_generator {
            out.push_str(" gen");
        }
        if decl.has_pmu {
            out.push_str(" pmu");
        }
        if let Some(sub) = decl.substation {
            write!(out, " sub={sub}").unwrap();
        }
        out.push('\n');
    }
    out.push_str("[edges]\n");
    let mut edges = net.edges.clone();
    edges.sort();
    for edge in &edges {
        write!(out, "{} {} {}", edge.class.keyword(), edge.a, edge.b).unwrap();
        if let Some(bound) = &edge.bound_entity {
            write!(out, " entity={bound}").unwrap();
        }
        out.push('\n');
    }
    out.push_str("[idrs]\n");
    for (target, expr) in &net.idrs {
        writeln!(out, "{target} <- {}", serialize_expr(expr)).unwrap();
    }
    out
}

/// Renders an expression with the fewest parentheses that still reparse to
/// the identical tree: a child connective is parenthesized when it binds no
/// tighter than its parent.
pub fn serialize_expr(expr: &IdrExpression) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn precedence(expr: &IdrExpression) -> u8 {
    match expr {
        IdrExpression::Entity(_) => 3,
        IdrExpression::MinAnd(_) => 2,
        IdrExpression::MaxOr(_) => 1,
        IdrExpression::NewXor(_) => 0,
    }
}

fn write_expr(expr: &IdrExpression, out: &mut String) {
    let (children, glyph) = match expr {
        IdrExpression::Entity(id) => {
            out.push_str(id.as_str());
            return;
        }
        IdrExpression::MinAnd(children) => (children, " . "),
        IdrExpression::MaxOr(children) => (children, " + "),
        IdrExpression::NewXor(children) => (children, " ^ "),
    };
    let own = precedence(expr);
    for (i, child) in children.iter().enumerate() {
        if i > 0 {
            out.push_str(glyph);
        }
        if precedence(child) <= own {
            out.push('(');
            write_expr(child, out);
            out.push(')');
        } else {
            write_expr(child, out);
        }
    }
}
