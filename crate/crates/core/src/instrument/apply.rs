//! Building the instrumented program `P_r` from a selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::matching::{applicable_points, match_rule, resolve, Applicable};
use super::operator::{value_to_expr, InstrumentationOperator};
use crate::lang::{ControlPoint, Decl, Program, Provenance, Stmt, StmtKind};

/// `r`: a rule choice (or `None`, leave unchanged) for each applicable point.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Selection(pub BTreeMap<ControlPoint, Option<String>>);

impl Selection {
    /// Every applicable point mapped to "unchanged".
    pub fn none(q: &Applicable) -> Selection {
        Selection(q.keys().map(|p| (*p, None)).collect())
    }

    pub fn get(&self, p: ControlPoint) -> Option<&str> {
        self.0.get(&p).and_then(|r| r.as_deref())
    }

    pub fn with(mut self, p: ControlPoint, rule: &str) -> Selection {
        self.0.insert(p, Some(rule.to_string()));
        self
    }

    /// Points with an actual rule choice.
    pub fn chosen(&self) -> impl Iterator<Item = (ControlPoint, &str)> {
        self.0.iter().filter_map(|(p, r)| r.as_deref().map(|r| (*p, r)))
    }

    pub fn non_bottom(&self) -> usize {
        self.chosen().count()
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(p, r)| format!("{p}->{}", r.as_deref().unwrap_or("_")))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("rule `{rule}` is not applicable at {point}")]
    NotApplicable { point: ControlPoint, rule: String },
    #[error("ghost variable `{0}` clashes with a program variable")]
    GhostClash(String),
}

/// An instrumented program together with the bookkeeping needed to map its
/// control points back to the original.
#[derive(Clone, Debug)]
pub struct Instrumented {
    pub program: Program,
    pub selection: Selection,
    pub ghosts: Vec<String>,
    /// `ins_r(p)`: root label of the replacement block of each rewritten point.
    pub ins: BTreeMap<ControlPoint, ControlPoint>,
    /// Provenance of every statement label in the instrumented program.
    pub provenance: BTreeMap<ControlPoint, Provenance>,
}

impl Instrumented {
    pub fn is_original(&self, label: ControlPoint) -> bool {
        matches!(self.provenance.get(&label), Some(Provenance::Original))
    }

    /// `ins_r(p)`: the label standing for original point `p` in `P_r`.
    pub fn ins_r(&self, p: ControlPoint) -> ControlPoint {
        self.ins.get(&p).copied().unwrap_or(p)
    }

    /// Original point a label belongs to: itself, or the rewritten point.
    pub fn origin(&self, label: ControlPoint) -> Option<ControlPoint> {
        match self.provenance.get(&label)? {
            Provenance::Original => Some(label),
            Provenance::Rewrite { point, .. } => Some(*point),
            Provenance::GhostInit => None,
        }
    }

    pub fn ghost_set(&self) -> BTreeSet<String> {
        self.ghosts.iter().cloned().collect()
    }
}

struct Labeler(u32);

impl Labeler {
    fn stamp(&mut self, s: &mut Stmt, prov: &Provenance) {
        s.walk_mut(&mut |x| {
            x.label = ControlPoint(self.0);
            self.0 += 1;
            x.prov = prov.clone();
            x.marker = None;
        });
    }
}

/// `P_r`: ghost declarations and initialisations prepended, selected points
/// replaced by their instantiated rewrite. `p` must be normalized.
pub fn apply_selection(
    p: &Program,
    ops: &[InstrumentationOperator],
    r: &Selection,
) -> Result<Instrumented, SelectionError> {
    let q = applicable_points(p, ops);
    for (point, rule) in r.chosen() {
        if !q.get(&point).is_some_and(|v| v.iter().any(|x| x == rule)) {
            return Err(SelectionError::NotApplicable {
                point,
                rule: rule.to_string(),
            });
        }
    }
    let mut ghosts = Vec::new();
    for op in ops {
        for g in &op.ghosts {
            if p.decl(&g.name).is_some() {
                return Err(SelectionError::GhostClash(g.name.clone()));
            }
            ghosts.push(g.clone());
        }
    }
    let types = p.decls.iter().map(|d| (d.name.clone(), d.ty.clone())).collect();
    let mut lab = Labeler(p.next_label());
    let mut ins = BTreeMap::new();

    let mut body = p.body.clone();
    body.walk_mut(&mut |s| {
        let Some(rule_ref) = r.get(s.label) else { return };
        let StmtKind::Assign { target, value } = &s.kind else { return };
        let (_, rule) = resolve(ops, rule_ref).expect("checked above");
        let binding = match_rule(rule, target, value, &types).expect("checked above");
        let prov = Provenance::Rewrite {
            point: s.label,
            rule: rule_ref.to_string(),
        };
        let mut block = Stmt::block(rule.instantiate(&binding));
        lab.stamp(&mut block, &prov);
        ins.insert(s.label, block.label);
        *s = block;
    });

    let mut inits = Vec::new();
    for g in &ghosts {
        let mut s = Stmt::assign(&g.name, value_to_expr(&g.init));
        lab.stamp(&mut s, &Provenance::GhostInit);
        inits.push(s);
    }
    let body = match body.kind {
        StmtKind::Block(stmts) => {
            inits.extend(stmts);
            Stmt {
                kind: StmtKind::Block(inits),
                ..body
            }
        }
        _ => {
            inits.push(body);
            let mut b = Stmt::block(inits);
            b.label = ControlPoint(lab.0);
            b
        }
    };

    let mut decls: Vec<Decl> = ghosts
        .iter()
        .map(|g| Decl {
            name: g.name.clone(),
            ty: g.ty.clone(),
            input: false,
        })
        .collect();
    decls.extend(p.decls.iter().cloned());
    let program = Program::new(decls, body);
    let mut provenance = BTreeMap::new();
    program.body.walk(&mut |s| {
        provenance.insert(s.label, s.prov.clone());
    });
    Ok(Instrumented {
        program,
        selection: r.clone(),
        ghosts: ghosts.into_iter().map(|g| g.name).collect(),
        ins,
        provenance,
    })
}
