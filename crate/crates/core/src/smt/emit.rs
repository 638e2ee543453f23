//! SMT-LIB 2 text emission.
//!
//! Sub-terms that occur more than once across the emitted roots are bound
//! once with `define-fun` (scripts) or listed as named definitions
//! ([`SharedForm`], used by the patch file). Naming follows a deterministic
//! post-order walk, so equal inputs give byte-identical text.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::term::{cmp_smt_name, free_vars_of, Node, Sort, Term};

/// Plain rendering without sharing. Fine for small terms and debug output.
pub fn term_to_string(t: &Term) -> String {
    let mut out = String::new();
    write_term(t, &HashMap::new(), &mut out);
    out
}

fn write_term(t: &Term, names: &HashMap<Term, String>, out: &mut String) {
    if let Some(n) = names.get(t) {
        out.push_str(n);
        return;
    }
    let app = |out: &mut String, op: &str, args: &[&Term]| {
        out.push('(');
        out.push_str(op);
        for a in args {
            out.push(' ');
            write_term(a, names, out);
        }
        out.push(')');
    };
    match t.node() {
        Node::BoolLit(b) => out.push_str(if *b { "true" } else { "false" }),
        Node::IntLit(i) => {
            if *i < 0 {
                let _ = write!(out, "(- {})", i.unsigned_abs());
            } else {
                let _ = write!(out, "{i}");
            }
        }
        Node::BvLit { width, value } => {
            let _ = write!(out, "(_ bv{value} {width})");
        }
        Node::Var { name, .. } => out.push_str(name),
        Node::Not(a) => app(out, "not", &[a]),
        Node::And(xs) => app(out, "and", &xs.iter().collect::<Vec<_>>()),
        Node::Or(xs) => app(out, "or", &xs.iter().collect::<Vec<_>>()),
        Node::Implies(a, b) => app(out, "=>", &[a, b]),
        Node::Eq(a, b) => app(out, "=", &[a, b]),
        Node::Ite(c, a, b) => app(out, "ite", &[c, a, b]),
        Node::Bv(op, a, b) => app(out, op.smt_name(), &[a, b]),
        Node::BvCmp(op, a, b) => app(out, cmp_smt_name(*op, true), &[a, b]),
        Node::IntCmp(op, a, b) => app(out, cmp_smt_name(*op, false), &[a, b]),
        Node::ZeroExtend(k, a) => app(out, &format!("(_ zero_extend {k})"), &[a]),
        Node::IntAdd(xs) => app(out, "+", &xs.iter().collect::<Vec<_>>()),
    }
}

/// Shared compound sub-terms of `roots`, in post-order (dependencies first).
/// Terms in `named` are treated as leaves.
fn shared_nodes(roots: &[Term], named: &HashMap<Term, String>) -> Vec<Term> {
    let mut parents: HashMap<Term, usize> = HashMap::new();
    let mut visited: HashSet<Term> = HashSet::new();
    let mut stack: Vec<Term> = roots.iter().filter(|r| !named.contains_key(*r)).cloned().collect();
    while let Some(t) = stack.pop() {
        if !visited.insert(t.clone()) {
            continue;
        }
        for c in t.children() {
            if !c.is_leaf() && !named.contains_key(c) {
                *parents.entry(c.clone()).or_insert(0) += 1;
                stack.push(c.clone());
            }
        }
    }
    // roots referenced from several roots are shared as well
    for r in roots {
        if !r.is_leaf() && !named.contains_key(r) {
            *parents.entry(r.clone()).or_insert(0) += 1;
        }
    }

    let mut order = Vec::new();
    let mut done: HashSet<Term> = HashSet::new();
    for r in roots {
        post_order(r, &parents, named, &mut done, &mut order);
    }
    order
}

fn post_order(
    t: &Term,
    parents: &HashMap<Term, usize>,
    named: &HashMap<Term, String>,
    done: &mut HashSet<Term>,
    order: &mut Vec<Term>,
) {
    // iterative to survive long chains
    let mut stack: Vec<(Term, bool)> = vec![(t.clone(), false)];
    while let Some((node, expanded)) = stack.pop() {
        if node.is_leaf() || done.contains(&node) || named.contains_key(&node) {
            continue;
        }
        if expanded {
            done.insert(node.clone());
            if parents.get(&node).copied().unwrap_or(0) > 1 {
                order.push(node);
            }
        } else {
            stack.push((node.clone(), true));
            let kids: Vec<Term> = node.children().into_iter().cloned().collect();
            for c in kids.into_iter().rev() {
                stack.push((c, false));
            }
        }
    }
}

/// Incremental emission for a long-lived solver session. Declarations
/// and definitions are emitted once and referenced by later commands; the
/// session must keep them across `pop` (`:global-declarations`).
#[derive(Debug, Default)]
pub(crate) struct Emitter {
    declared: HashSet<String>,
    names: HashMap<Term, String>,
}

impl Emitter {
    pub fn is_declared(&self, name: &str) -> bool {
        self.declared.contains(name)
    }

    /// Declares `name` as a Boolean constant unless already declared.
    pub fn declare_bool(&mut self, name: &str, out: &mut String) {
        if self.declared.insert(name.to_string()) {
            let _ = writeln!(out, "(declare-fun {name} () Bool)");
        }
    }

    /// Emits declarations and definitions needed by `roots` into `out` and
    /// returns the text of each root.
    pub fn prepare(&mut self, roots: &[Term], out: &mut String) -> Vec<String> {
        for (name, sort) in free_vars_of(roots) {
            if self.declared.insert(name.clone()) {
                let _ = writeln!(out, "(declare-fun {name} () {sort})");
            }
        }
        for t in shared_nodes(roots, &self.names) {
            let name = format!("_s{}", self.names.len());
            let mut body = String::new();
            write_term(&t, &self.names, &mut body);
            let _ = writeln!(out, "(define-fun {name} () {} {body})", t.sort());
            self.names.insert(t, name);
        }
        roots
            .iter()
            .map(|r| {
                let mut text = String::new();
                write_term(r, &self.names, &mut text);
                text
            })
            .collect()
    }
}

/// One solver script: declarations, shared definitions, hard and named
/// assertions, terminated by `(check-sat)`.
#[derive(Debug, Clone, Default)]
pub struct ScriptBuilder {
    pub hard: Vec<Term>,
    pub labeled: Vec<(String, Term)>,
    /// Guards each labeled assertion by a fresh literal of the same name
    /// and checks under those literals as assumptions, so that later
    /// `check-sat-assuming` calls can drop any of them.
    pub assume: bool,
}

impl ScriptBuilder {
    pub fn render(&self) -> (String, Vec<(String, Sort)>) {
        let mut roots: Vec<Term> = self.hard.clone();
        roots.extend(self.labeled.iter().map(|(_, t)| t.clone()));
        let vars = free_vars_of(&roots);
        let shared = shared_nodes(&roots, &HashMap::new());

        let mut out = String::new();
        out.push_str("(set-option :produce-models true)\n");
        if !self.labeled.is_empty() {
            out.push_str("(set-option :produce-unsat-cores true)\n");
        }
        out.push_str("(set-logic ALL)\n");
        for (name, sort) in &vars {
            let _ = writeln!(out, "(declare-fun {name} () {sort})");
        }
        let mut names: HashMap<Term, String> = HashMap::new();
        for (k, t) in shared.iter().enumerate() {
            let name = format!("_t{k}");
            let mut body = String::new();
            write_term(t, &names, &mut body);
            let _ = writeln!(out, "(define-fun {name} () {} {body})", t.sort());
            names.insert(t.clone(), name);
        }
        for t in &self.hard {
            if t.is_true() {
                continue;
            }
            out.push_str("(assert ");
            write_term(t, &names, &mut out);
            out.push_str(")\n");
        }
        if self.assume {
            for (label, t) in &self.labeled {
                let _ = writeln!(out, "(declare-fun {label} () Bool)");
                let _ = write!(out, "(assert (=> {label} ");
                write_term(t, &names, &mut out);
                out.push_str("))\n");
            }
            let labels: Vec<&str> = self.labeled.iter().map(|(l, _)| l.as_str()).collect();
            let _ = writeln!(out, "(check-sat-assuming ({}))", labels.join(" "));
        } else {
            for (label, t) in &self.labeled {
                out.push_str("(assert (! ");
                write_term(t, &names, &mut out);
                let _ = writeln!(out, " :named {label}))");
            }
            out.push_str("(check-sat)\n");
        }
        (out, vars)
    }
}

/// Self-contained textual form of a term: free variables with sorts, shared
/// definitions in dependency order, and the root. Every definition and the
/// root are SMT-LIB terms that may mention earlier definition names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedForm {
    pub vars: BTreeMap<String, String>,
    pub defs: Vec<(String, String)>,
    pub root: String,
}

impl SharedForm {
    pub fn from_term(t: &Term) -> SharedForm {
        let roots = std::slice::from_ref(t);
        let vars = free_vars_of(roots).into_iter().map(|(n, s)| (n, s.to_string())).collect();
        let mut names: HashMap<Term, String> = HashMap::new();
        let mut defs = Vec::new();
        for (k, s) in shared_nodes(roots, &HashMap::new()).into_iter().enumerate() {
            if &s == t {
                continue;
            }
            let name = format!("_d{k}");
            let mut body = String::new();
            write_term(&s, &names, &mut body);
            defs.push((name.clone(), body));
            names.insert(s, name);
        }
        let mut root = String::new();
        write_term(t, &names, &mut root);
        SharedForm { vars, defs, root }
    }

    pub fn to_term(&self) -> Result<Term, super::sexpr::ParseError> {
        let mut scope = super::sexpr::TermScope::default();
        for (name, sort) in &self.vars {
            let sort = super::sexpr::parse_sort(sort)?;
            scope.bind(name.clone(), Term::var(name, sort));
        }
        for (name, body) in &self.defs {
            let t = scope.parse_term(body)?;
            scope.bind(name.clone(), t);
        }
        scope.parse_term(&self.root)
    }
}
