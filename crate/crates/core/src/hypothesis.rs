//! The two hypothesis representations: Sets of Constraints and rule programs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::env::{BoxIndex, KeyDef, KeyIndex, Layout};
use crate::rulelang::{rule_to_soc, Atom, BoxView, Expr, RuleProgram};

/// A mapping from each box to the set of keys predicted to open it.
///
/// Sets may be empty or hold several keys. Keys are stored as a bitmask, so a
/// layout may have at most 64 keys.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SoC {
    sets: Vec<u64>,
}

impl SoC {
    pub fn from_fn(n_boxes: usize, n_keys: usize, mut f: impl FnMut(BoxIndex, KeyIndex) -> bool) -> Self {
        assert!(n_keys <= 64);
        let sets = (0..n_boxes)
            .map(|b| (0..n_keys).filter(|&k| f(BoxIndex(b), KeyIndex(k))).fold(0u64, |acc, k| acc | (1 << k)))
            .collect();
        SoC { sets }
    }

    /// One key per box.
    pub fn from_assignment(keys: &[KeyIndex]) -> Self {
        SoC { sets: keys.iter().map(|k| 1u64 << k.0).collect() }
    }

    pub fn n_boxes(&self) -> usize {
        self.sets.len()
    }

    pub fn predicts(&self, b: BoxIndex, k: KeyIndex) -> bool {
        self.sets.get(b.0).is_some_and(|s| s & (1 << k.0) != 0)
    }

    pub fn keys_for(&self, b: BoxIndex) -> Vec<KeyIndex> {
        let s = self.sets[b.0];
        (0..64).filter(|k| s & (1 << k) != 0).map(KeyIndex).collect()
    }

    /// `red:{red1} pink:{grey2} ...`, with `*` for "every key".
    pub fn describe(&self, layout: &Layout) -> String {
        let all = if layout.n_keys() == 64 { u64::MAX } else { (1u64 << layout.n_keys()) - 1 };
        layout
            .box_indices()
            .map(|b| {
                let body = if self.sets[b.0] == all {
                    "*".to_string()
                } else {
                    self.keys_for(b).iter().map(|&k| layout.key(k).id.as_str()).collect::<Vec<_>>().join(",")
                };
                format!("{}:{{{}}}", layout.boxdef(b).id, body)
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Debug for SoC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.sets.iter().map(|s| format!("{s:#b}"))).finish()
    }
}

/// The salient rules a learner might start from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedRule {
    Color,
    Shape,
    Order,
    Number,
}

impl NamedRule {
    pub const ALL: [NamedRule; 4] = [NamedRule::Color, NamedRule::Shape, NamedRule::Order, NamedRule::Number];

    pub fn name(self) -> &'static str {
        match self {
            NamedRule::Color => "color",
            NamedRule::Shape => "shape",
            NamedRule::Order => "order",
            NamedRule::Number => "number",
        }
    }

    /// The rule as a program over `layout`.
    ///
    /// * color: key color equals box color.
    /// * shape: key shape equals box shape; a box with no shape-matched key
    ///   accepts every key.
    /// * order: the box at position `p` opens with the key numbered `p`.
    /// * number: key number is a candidate shape count of the box.
    pub fn program(self, layout: &Layout) -> RuleProgram {
        let expr = match self {
            NamedRule::Color => Expr::Atom(Atom::ColorMatch),
            NamedRule::Number => Expr::Atom(Atom::NumberMatch),
            NamedRule::Shape => {
                let unmatched = layout
                    .boxes
                    .iter()
                    .filter(|b| !layout.keys.iter().any(|k| k.shape.as_deref() == Some(b.shape.as_str())))
                    .map(|b| Expr::Atom(Atom::BoxPositionIs(b.position)));
                Expr::any(std::iter::once(Expr::Atom(Atom::ShapeMatch)).chain(unmatched))
            }
            NamedRule::Order => Expr::any(
                layout
                    .boxes
                    .iter()
                    .map(|b| Expr::and(Expr::Atom(Atom::BoxPositionIs(b.position)), Expr::Atom(Atom::KeyNumberIs(b.position)))),
            ),
        };
        RuleProgram::new(expr)
    }

    /// The rule's mapping with every shape count known.
    pub fn soc(self, layout: &Layout) -> SoC {
        rule_to_soc(&self.program(layout), &layout.observed_views(), &layout.keys)
    }
}

impl fmt::Display for NamedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Label used in final-rule distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleClass {
    Named(NamedRule),
    Mixed,
}

impl RuleClass {
    pub fn label(self) -> &'static str {
        match self {
            RuleClass::Named(r) => r.name(),
            RuleClass::Mixed => "mixed",
        }
    }

    pub fn is_number(self) -> bool {
        self == RuleClass::Named(NamedRule::Number)
    }
}

impl fmt::Display for RuleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A hypothesis held by an agent.
///
/// `Soc` is a bare mapping, such as one built by the online generator; it
/// carries no rule that could extend to boxes outside the layout. `Named` is
/// one of the salient rules together with its mapping.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Hypothesis {
    Soc(SoC),
    Named { rule: NamedRule, soc: SoC },
    Program(RuleProgram),
}

impl Hypothesis {
    pub fn named(rule: NamedRule, layout: &Layout) -> Self {
        Hypothesis::Named { rule, soc: rule.soc(layout) }
    }

    /// Whether the hypothesis predicts `key` opens box `b`, given the agent's
    /// current view of the boxes.
    pub fn predicts(&self, layout: &Layout, views: &[BoxView], b: BoxIndex, k: KeyIndex) -> bool {
        match self {
            Hypothesis::Soc(soc) | Hypothesis::Named { soc, .. } => soc.predicts(b, k),
            Hypothesis::Program(p) => p.eval(layout.key(k), &views[b.0]),
        }
    }

    /// Prediction for a box outside the layout. A bare mapping predicts
    /// nothing there.
    pub fn predicts_novel(&self, layout: &Layout, key: &KeyDef, view: &BoxView) -> bool {
        match self {
            Hypothesis::Program(p) => p.eval(key, view),
            Hypothesis::Named { rule, .. } => rule.program(layout).eval(key, view),
            Hypothesis::Soc(_) => false,
        }
    }

    /// The named rule this hypothesis is, or `Mixed`. Programs are classified
    /// by their fully-observed mapping; a bare mapping is always `Mixed`.
    pub fn classify(&self, layout: &Layout) -> RuleClass {
        match self {
            Hypothesis::Named { rule, .. } => RuleClass::Named(*rule),
            Hypothesis::Soc(_) => RuleClass::Mixed,
            Hypothesis::Program(p) => {
                let soc = rule_to_soc(p, &layout.observed_views(), &layout.keys);
                NamedRule::ALL
                    .into_iter()
                    .find(|r| r.soc(layout) == soc)
                    .map_or(RuleClass::Mixed, RuleClass::Named)
            }
        }
    }

    pub fn describe(&self, layout: &Layout) -> String {
        match self {
            Hypothesis::Soc(s) => s.describe(layout),
            Hypothesis::Named { rule, .. } => format!("{rule} rule"),
            Hypothesis::Program(p) => p.print(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(layout: &Layout, soc: &SoC) -> Vec<Vec<String>> {
        layout
            .box_indices()
            .map(|b| soc.keys_for(b).into_iter().map(|k| layout.key(k).id.clone()).collect())
            .collect()
    }

    #[test]
    fn named_rule_tables() {
        let l = Layout::standard();
        let all: Vec<String> = l.keys.iter().map(|k| k.id.clone()).collect();
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(
            ids(&l, &NamedRule::Color.soc(&l)),
            vec![v(&["red1"]), v(&["pink6"]), v(&["white7"]), v(&["purplearrow"]), v(&["bluestar"])]
        );
        assert_eq!(
            ids(&l, &NamedRule::Shape.soc(&l)),
            vec![all, v(&["greycloud"]), v(&["diamondorange"]), v(&["greenheart"]), v(&["triangleyellow"])]
        );
        assert_eq!(
            ids(&l, &NamedRule::Order.soc(&l)),
            vec![v(&["red1"]), v(&["grey2"]), v(&["green3"]), v(&["orange4"]), v(&["yellow5"])]
        );
        assert_eq!(
            ids(&l, &NamedRule::Number.soc(&l)),
            vec![v(&["red1"]), v(&["grey2"]), v(&["orange4"]), v(&["green3"]), v(&["yellow5"])]
        );
    }

    #[test]
    fn every_named_rule_opens_red_with_red1() {
        let l = Layout::standard();
        let red = l.box_index("red").unwrap();
        let red1 = l.key_index("red1").unwrap();
        for r in NamedRule::ALL {
            assert!(r.soc(&l).predicts(red, red1), "{r}");
        }
    }

    #[test]
    fn classification() {
        let l = Layout::standard();
        for r in NamedRule::ALL {
            assert_eq!(Hypothesis::named(r, &l).classify(&l), RuleClass::Named(r));
            assert_eq!(Hypothesis::Program(r.program(&l)).classify(&l), RuleClass::Named(r));
            // The same mapping without the rule behind it does not generalize.
            assert_eq!(Hypothesis::Soc(r.soc(&l)).classify(&l), RuleClass::Mixed);
        }
        let mixed = SoC::from_assignment(&[KeyIndex(0), KeyIndex(3), KeyIndex(4), KeyIndex(5), KeyIndex(6)]);
        assert_eq!(Hypothesis::Soc(mixed).classify(&l), RuleClass::Mixed);
    }

    #[test]
    fn describe_soc() {
        let l = Layout::standard();
        assert_eq!(
            NamedRule::Shape.soc(&l).describe(&l),
            "red:{*} pink:{greycloud} white:{diamondorange} purple:{greenheart} blue:{triangleyellow}"
        );
    }
}
