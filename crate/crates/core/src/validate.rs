//! Structural tractability checks.
//!
//! Three validation routes are offered:
//!
//! * plain completeness and decomposability, for networks without
//!   quotient nodes;
//! * valid conditional mixing operators (CMOs), a purely structural test
//!   that implies conditional soundness;
//! * conditional soundness by enumeration, for arbitrary quotient nodes
//!   over few variables.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::evidence::{Evidence, Value};
use crate::graph::{Network, Node, NodeId};
use crate::math;
use crate::model::Model;
use crate::params::ParamVector;
use crate::scope::{DependencyGraph, ScopeTable};

/// Default bound on the number of variables for enumeration-based checks.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 20;

/// Relative tolerance of the numeric soundness checks.
pub const SOUNDNESS_TOLERANCE: f64 = 1e-9;

/// Stable identifiers of every rule a report can cite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Complete,
    CondComplete,
    DecompDisjoint,
    CondDecompDisjoint,
    CondDecompAcyclic,
    CmoBase,
    CmoChild,
    CmoStructure,
    CmoBToA,
    CmoBScope,
    CmoMissing,
    SoundMarginal,
    SoundStrong,
    SoundPositive,
    RootUnconditional,
    Structure,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::Complete => "complete",
            Rule::CondComplete => "cond-complete",
            Rule::DecompDisjoint => "decomp-disjoint",
            Rule::CondDecompDisjoint => "cond-decomp-disjoint",
            Rule::CondDecompAcyclic => "cond-decomp-acyclic",
            Rule::CmoBase => "cmo-base",
            Rule::CmoChild => "cmo-child",
            Rule::CmoStructure => "cmo-structure",
            Rule::CmoBToA => "cmo-b-to-a",
            Rule::CmoBScope => "cmo-b-scope",
            Rule::CmoMissing => "cmo-missing",
            Rule::SoundMarginal => "sound-marginal",
            Rule::SoundStrong => "sound-strong",
            Rule::SoundPositive => "sound-positive",
            Rule::RootUnconditional => "root-unconditional",
            Rule::Structure => "structure",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeId,
    pub rule: Rule,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, node: NodeId, rule: Rule, detail: impl Into<String>) {
        self.violations.push(Violation {
            node,
            rule,
            detail: detail.into(),
        });
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn has_rule(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn rules(&self) -> Vec<Rule> {
        let mut r: Vec<_> = self.violations.iter().map(|v| v.rule).collect();
        r.sort();
        r.dedup();
        r
    }
}

/// One line per violation, `RULE<TAB>node=<id><TAB><detail>`, then `PASS`
/// or `FAIL`.
impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}\tnode={}\t{}", v.rule, v.node, v.detail)?;
        }
        writeln!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Structure of one conditional mixing operator:
///
/// ```text
///            Σ_i w_i (Π_j A_ij) (Π_j B_ij)
///   CMO  =  -------------------------------
///                Σ_i w_i Π_j A_ij
/// ```
///
/// `a` is the γ×α matrix of A-children and `b` the γ×β matrix of
/// B-children. `root` is the quotient node, or the numerator sum when α = 0
/// (the denominator is then identically one and no quotient is built).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CmoAnnotation {
    pub root: NodeId,
    pub a: Vec<Vec<NodeId>>,
    pub b: Vec<Vec<NodeId>>,
}

impl CmoAnnotation {
    pub fn gamma(&self) -> usize {
        self.b.len()
    }

    pub fn alpha(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    pub fn beta(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }
}

fn scope_set(scopes: &ScopeTable, id: NodeId, conditional: bool) -> &crate::VarSet {
    if conditional {
        scopes.effective(id)
    } else {
        scopes.scope(id)
    }
}

/// Sum children must share one scope: the general scope, or the effective
/// scope when `conditional` is set.
pub fn check_complete(network: &Network, scopes: &ScopeTable, conditional: bool) -> ValidationReport {
    let rule = if conditional {
        Rule::CondComplete
    } else {
        Rule::Complete
    };
    let mut report = ValidationReport::default();
    for (i, node) in network.nodes().iter().enumerate() {
        let Node::Sum { children, .. } = node else {
            continue;
        };
        let first = children[0];
        for &c in &children[1..] {
            if scope_set(scopes, first, conditional) != scope_set(scopes, c, conditional) {
                report.push(
                    NodeId(i as u32),
                    rule,
                    format!(
                        "children {first} and {c} have scopes {:?} and {:?}",
                        scope_set(scopes, first, conditional),
                        scope_set(scopes, c, conditional)
                    ),
                );
            }
        }
    }
    report
}

/// Product children must have pairwise disjoint scopes (effective scopes
/// when `conditional` is set). In conditional mode the child dependency
/// graph must also be acyclic.
pub fn check_decomposable(network: &Network, scopes: &ScopeTable, conditional: bool) -> ValidationReport {
    let rule = if conditional {
        Rule::CondDecompDisjoint
    } else {
        Rule::DecompDisjoint
    };
    let mut report = ValidationReport::default();
    for (i, node) in network.nodes().iter().enumerate() {
        let Node::Product { children } = node else {
            continue;
        };
        let id = NodeId(i as u32);
        let mut seen = crate::VarSet::empty(network.num_vars());
        for (k, &c) in children.iter().enumerate() {
            let s = scope_set(scopes, c, conditional);
            if seen.intersects(s) {
                let clash = seen.intersection(s);
                report.push(
                    id,
                    rule,
                    format!("child {c} (position {k}) overlaps siblings on {clash:?}"),
                );
            }
            seen.union_with(s);
        }
        if conditional && !DependencyGraph::build(scopes, id, children).is_acyclic() {
            report.push(
                id,
                Rule::CondDecompAcyclic,
                "child dependency graph has a cycle",
            );
        }
    }
    report
}

/// Whether `id` is a sum over exactly the two indicators of one variable.
pub fn is_leaf_cmo(network: &Network, id: NodeId) -> bool {
    match network.node(id) {
        Node::Sum { children, .. } if children.len() == 2 => indicator_pair(network, children).is_some(),
        _ => false,
    }
}

fn indicator_pair(network: &Network, nodes: &[NodeId]) -> Option<usize> {
    let mut found = [None, None];
    for &n in nodes {
        match network.node(n) {
            Node::Indicator { var, value } => {
                let slot = &mut found[*value as usize];
                if slot.is_some() {
                    return None;
                }
                *slot = Some(*var);
            }
            _ => return None,
        }
    }
    match found {
        [Some(a), Some(b)] if a == b => Some(a),
        _ => None,
    }
}

/// Checks every annotated CMO against the valid-CMO conditions:
///
/// 1. each child is a valid CMO, or the CMO is the base case α = 0, β = 1,
///    γ = 2 over the two indicators of one variable;
/// 2. internal sums are conditionally complete;
/// 3. internal products are conditionally decomposable and the top product
///    has no dependency edge from the B-part to the A-part;
/// 4. all B-rows share one effective scope.
///
/// Conditions 2 and 3 are checked for every sum and product of the network,
/// inside CMOs or not. Every quotient node must be the root of an
/// annotation.
pub fn check_valid_cmo(network: &Network, scopes: &ScopeTable, annotations: &[CmoAnnotation]) -> Result<ValidationReport> {
    let by_root: BTreeMap<NodeId, &CmoAnnotation> = annotations.iter().map(|a| (a.root, a)).collect();
    for (i, node) in network.nodes().iter().enumerate() {
        let id = NodeId(i as u32);
        if matches!(node, Node::Quotient { .. }) && !by_root.contains_key(&id) {
            return Err(Error::input(format!("quotient node {id} has no CMO annotation")));
        }
    }
    let mut report = ValidationReport::default();
    for ann in annotations {
        if ann.root.index() >= network.len() {
            return Err(Error::input(format!("annotation root {} does not exist", ann.root)));
        }
        check_one_cmo(network, scopes, ann, &by_root, &mut report);
    }
    report.merge(check_complete(network, scopes, true));
    report.merge(check_decomposable(network, scopes, true));
    Ok(report)
}

fn check_one_cmo(
    network: &Network,
    scopes: &ScopeTable,
    ann: &CmoAnnotation,
    by_root: &BTreeMap<NodeId, &CmoAnnotation>,
    report: &mut ValidationReport,
) {
    let root = ann.root;
    let (gamma, alpha, beta) = (ann.gamma(), ann.alpha(), ann.beta());
    if gamma == 0 || beta == 0 {
        report.push(root, Rule::CmoStructure, format!("γ={gamma}, β={beta}; both must be positive"));
        return;
    }
    if (!ann.a.is_empty() && ann.a.len() != gamma)
        || ann.a.iter().any(|r| r.len() != alpha)
        || ann.b.iter().any(|r| r.len() != beta)
    {
        report.push(root, Rule::CmoStructure, "ragged A/B matrices");
        return;
    }
    if ann.a.iter().chain(&ann.b).flatten().any(|c| c.index() >= network.len()) {
        report.push(root, Rule::CmoStructure, "child does not exist");
        return;
    }
    if let Err(detail) = match_structure(network, ann) {
        report.push(root, Rule::CmoStructure, detail);
        return;
    }

    // Condition 1.
    let children: Vec<NodeId> = ann.a.iter().chain(&ann.b).flatten().copied().collect();
    let base_case = alpha == 0 && beta == 1 && gamma == 2 && {
        let b: Vec<NodeId> = ann.b.iter().map(|r| r[0]).collect();
        indicator_pair(network, &b).is_some()
    };
    if !base_case {
        for &c in &children {
            match network.node(c) {
                Node::Indicator { .. } => report.push(
                    root,
                    Rule::CmoBase,
                    format!("indicator child {c} outside the two-indicator base case"),
                ),
                _ if by_root.contains_key(&c) || is_leaf_cmo(network, c) => {}
                _ => report.push(root, Rule::CmoChild, format!("child {c} is not a CMO node")),
            }
        }
    }

    // Conditions 3 (B-to-A) and 4, on the row products.
    let n = network.num_vars();
    let row_scope = |row: &[NodeId]| {
        let mut s = crate::VarSet::empty(n);
        for &c in row {
            s.union_with(scopes.effective(c));
        }
        s
    };
    let b0 = row_scope(&ann.b[0]);
    for (i, brow) in ann.b.iter().enumerate() {
        let bs = row_scope(brow);
        if bs != b0 {
            report.push(root, Rule::CmoBScope, format!("B-row {i} has effective scope {bs:?}, row 0 has {b0:?}"));
        }
        if alpha > 0 {
            let mut a_cond = crate::VarSet::empty(n);
            for &c in &ann.a[i] {
                a_cond.union_with(scopes.conditional(c));
            }
            // Conditional scope of the A-product: the A-children's conditioning
            // variables not supplied by a sibling A-child.
            a_cond.difference_with(&row_scope(&ann.a[i]));
            if bs.intersects(&a_cond) {
                report.push(root, Rule::CmoBToA, format!("row {i}: A-part conditions on B variables {:?}", bs.intersection(&a_cond)));
            }
        }
    }
}

/// Verifies that the graph under `ann.root` computes the annotated CMO.
fn match_structure(network: &Network, ann: &CmoAnnotation) -> core::result::Result<(), String> {
    let alpha = ann.alpha();
    let product_matches = |node: NodeId, row: &[NodeId]| -> bool {
        if row.len() == 1 {
            return node == row[0];
        }
        matches!(network.node(node), Node::Product { children } if children.as_slice() == row)
    };
    let sum_children = |id: NodeId| match network.node(id) {
        Node::Sum { children, block } if children.len() == ann.gamma() => Ok((children, *block)),
        other => Err(format!("node {id} is a {} with the wrong arity, expected a sum over {} rows", other.kind_name(), ann.gamma())),
    };
    if alpha == 0 {
        let (children, _) = sum_children(ann.root)?;
        for (i, &c) in children.iter().enumerate() {
            if !product_matches(c, &ann.b[i]) {
                return Err(format!("row {i} of sum {} does not match the B-row", ann.root));
            }
        }
        return Ok(());
    }
    let Node::Quotient { numerator, denominator } = network.node(ann.root) else {
        return Err(format!("root {} is not a quotient", ann.root));
    };
    let (num_children, num_block) = sum_children(*numerator)?;
    let (den_children, den_block) = sum_children(*denominator)?;
    if num_block != den_block {
        return Err("numerator and denominator use different weight blocks".into());
    }
    for i in 0..ann.gamma() {
        let a_row = den_children[i];
        if !product_matches(a_row, &ann.a[i]) {
            return Err(format!("denominator row {i} does not match the A-row"));
        }
        let Node::Product { children: top } = network.node(num_children[i]) else {
            return Err(format!("numerator row {i} is not a product"));
        };
        if top.len() != 2 || top[0] != a_row || !product_matches(top[1], &ann.b[i]) {
            return Err(format!("numerator row {i} is not (shared A-row) x (B-row)"));
        }
    }
    Ok(())
}

/// Numeric conditional-soundness check by enumeration.
///
/// For every quotient `v` and every assignment `a` of its scope:
/// the denominator is positive (`sound-positive`); the numerator summed over
/// the effective scope equals the denominator, and the denominator's scopes
/// are contained in the numerator's (`sound-marginal`); the numerator with
/// `*` on the effective scope equals the denominator (`sound-strong`).
pub fn check_soundness_bruteforce(network: &Network, params: &ParamVector, max_vars: usize) -> Result<ValidationReport> {
    if network.num_vars() > max_vars {
        return Err(Error::TooManyVars {
            num_vars: network.num_vars(),
            max: max_vars,
        });
    }
    let evaluator = Evaluator::new(network, params)?;
    let scopes = network.scopes();
    let mut report = ValidationReport::default();
    let mut values = vec![f64::NAN; network.len()];
    for (i, node) in network.nodes().iter().enumerate() {
        let Node::Quotient { numerator, denominator } = *node else {
            continue;
        };
        let id = NodeId(i as u32);
        if !scopes.effective(denominator).is_subset(scopes.effective(numerator))
            || !scopes.conditional(denominator).is_subset(scopes.conditional(numerator))
        {
            report.push(id, Rule::SoundMarginal, "denominator scopes are not contained in the numerator's");
        }
        let sub_order = descendants_in_order(network, id);
        let vars = scopes.scope(id).to_vec();
        let eff = scopes.effective(id);
        let eff_mask: u64 = vars
            .iter()
            .enumerate()
            .filter(|(_, v)| eff.contains(**v))
            .fold(0, |m, (k, _)| m | 1 << k);
        let total = 1u64 << vars.len();
        let mut num = vec![f64::NEG_INFINITY; total as usize];
        let mut den = vec![f64::NEG_INFINITY; total as usize];
        let mut failed = false;
        let mut evidence = Evidence::new(vec![Value::Zero; network.num_vars()]);
        for code in 0..total {
            for (k, &v) in vars.iter().enumerate() {
                evidence.set(v, Value::from_bool(code >> k & 1 == 1));
            }
            match eval_sub(&evaluator, &sub_order, &evidence, &mut values) {
                Ok(()) => {
                    num[code as usize] = values[numerator.index()];
                    den[code as usize] = values[denominator.index()];
                }
                Err(Error::Evaluation { node, detail }) => {
                    if !failed {
                        report.push(node, Rule::SoundPositive, format!("{detail} (assignment {evidence})"));
                    }
                    failed = true;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            continue;
        }
        if let Some(code) = den.iter().position(|&d| d == f64::NEG_INFINITY) {
            report.push(id, Rule::SoundPositive, format!("denominator is zero at scope assignment {code:#b}"));
            continue;
        }
        // Marginal: group assignments that agree outside the effective scope.
        let mut marginal_ok = true;
        for rep in (0..total).filter(|c| c & eff_mask == 0) {
            let terms: Vec<f64> = (0..total)
                .filter(|c| c & !eff_mask == rep)
                .map(|c| num[c as usize])
                .collect();
            let marg = math::log_sum_exp(&terms);
            for c in (0..total).filter(|c| c & !eff_mask == rep) {
                if !close_in_log(marg, den[c as usize]) {
                    marginal_ok = false;
                }
            }
        }
        if !marginal_ok {
            report.push(id, Rule::SoundMarginal, "denominator is not the numerator's marginal over the effective scope");
        }
        // Strong variant: numerator with `*` on the effective scope.
        let mut strong_ok = true;
        for code in 0..total {
            for (k, &v) in vars.iter().enumerate() {
                let value = if eff.contains(v) {
                    Value::Star
                } else {
                    Value::from_bool(code >> k & 1 == 1)
                };
                evidence.set(v, value);
            }
            match eval_sub(&evaluator, &sub_order, &evidence, &mut values) {
                Ok(()) => {
                    if !close_in_log(values[numerator.index()], den[code as usize]) {
                        strong_ok = false;
                    }
                }
                Err(Error::Evaluation { .. }) => strong_ok = false,
                Err(e) => return Err(e),
            }
        }
        if !strong_ok {
            report.push(id, Rule::SoundStrong, "numerator with * on the effective scope differs from the denominator");
        }
    }
    Ok(report)
}

fn close_in_log(a: f64, b: f64) -> bool {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return a == b;
    }
    // |e^a - e^b| <= tol * max(e^a, e^b)
    math::exp(-(a - b).abs()) >= 1.0 - SOUNDNESS_TOLERANCE
}

fn descendants_in_order(network: &Network, node: NodeId) -> Vec<NodeId> {
    let mut mark = vec![false; network.len()];
    mark[node.index()] = true;
    let mut stack = vec![node];
    while let Some(id) = stack.pop() {
        network.node(id).for_each_child(|c| {
            if !mark[c.index()] {
                mark[c.index()] = true;
                stack.push(c);
            }
        });
    }
    network.order().iter().copied().filter(|id| mark[id.index()]).collect()
}

fn eval_sub(evaluator: &Evaluator<'_>, order: &[NodeId], evidence: &Evidence, values: &mut [f64]) -> Result<()> {
    for &id in order {
        values[id.index()] = evaluator.node_value(id, evidence, values)?;
    }
    Ok(())
}

/// The root must be unconditional and cover every variable.
pub fn check_root_unconditional(network: &Network, scopes: &ScopeTable) -> ValidationReport {
    let mut report = ValidationReport::default();
    let root = network.root();
    if !scopes.conditional(root).is_empty() {
        report.push(root, Rule::RootUnconditional, format!("root conditions on {:?}", scopes.conditional(root)));
    }
    let missing = crate::VarSet::full(network.num_vars()).difference(scopes.effective(root));
    if !missing.is_empty() {
        report.push(root, Rule::RootUnconditional, format!("root is not a distribution over {missing:?}"));
    }
    report
}

/// First variable witnessing a violation of the marginalization rule, if any.
///
/// The rule: whenever a node conditions on a marginalized variable, every
/// variable in its effective scope must be marginalized too. Under this rule
/// the evaluator returns the exact marginal of the observed variables.
pub fn star_pattern_violation(network: &Network, evidence: &Evidence) -> Option<usize> {
    let stars = evidence.star_set();
    if stars.is_empty() {
        return None;
    }
    let scopes = network.scopes();
    for &id in network.order() {
        if scopes.conditional(id).intersects(&stars) && !scopes.effective(id).is_subset(&stars) {
            return scopes.effective(id).difference(&stars).min();
        }
    }
    None
}

/// Whether `evidence` marginalizes only variables compatible with the
/// network's conditioning structure.
pub fn check_star_pattern(network: &Network, evidence: &Evidence) -> bool {
    star_pattern_violation(network, evidence).is_none()
}

/// Named groups of checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// Plain completeness and decomposability (no quotient nodes allowed).
    DncSpn,
    /// Valid-CMO structure.
    ValidCmo,
    /// Conditional D&C plus enumeration-based soundness.
    SoundnessBruteforce,
    /// Every check; a quotient without annotation is a `cmo-missing` violation.
    All,
    /// `DncSpn` without quotients, `ValidCmo` when every quotient is
    /// annotated, `SoundnessBruteforce` otherwise.
    Auto,
}

impl Profile {
    pub fn resolve(self, model: &Model) -> Profile {
        if self != Profile::Auto {
            return self;
        }
        let annotated: alloc::collections::BTreeSet<NodeId> = model.cmos.iter().map(|a| a.root).collect();
        let quotients: Vec<NodeId> = model
            .network
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Quotient { .. }))
            .map(|(i, _)| NodeId(i as u32))
            .collect();
        if quotients.is_empty() {
            Profile::DncSpn
        } else if quotients.iter().all(|q| annotated.contains(q)) {
            Profile::ValidCmo
        } else {
            Profile::SoundnessBruteforce
        }
    }
}

pub fn validate_profile(model: &Model, profile: Profile, max_vars: usize) -> Result<ValidationReport> {
    let net = &model.network;
    let scopes = net.scopes();
    let mut report = ValidationReport::default();
    match profile.resolve(model) {
        Profile::DncSpn => {
            report.merge(check_complete(net, scopes, false));
            report.merge(check_decomposable(net, scopes, false));
        }
        Profile::ValidCmo => {
            report.merge(check_valid_cmo(net, scopes, &model.cmos)?);
        }
        Profile::SoundnessBruteforce => {
            report.merge(check_complete(net, scopes, true));
            report.merge(check_decomposable(net, scopes, true));
            report.merge(check_soundness_bruteforce(net, &model.params, max_vars)?);
        }
        Profile::All => {
            match check_valid_cmo(net, scopes, &model.cmos) {
                Ok(r) => report.merge(r),
                Err(Error::Input(detail)) => {
                    report.push(net.root(), Rule::CmoMissing, detail);
                    report.merge(check_complete(net, scopes, true));
                    report.merge(check_decomposable(net, scopes, true));
                }
                Err(e) => return Err(e),
            }
            report.merge(check_soundness_bruteforce(net, &model.params, max_vars)?);
        }
        Profile::Auto => unreachable!(),
    }
    report.merge(check_root_unconditional(net, scopes));
    Ok(report)
}
