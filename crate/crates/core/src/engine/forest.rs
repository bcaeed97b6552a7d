use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::AttackedSet;
use crate::rules::RuleSet;

/// Where a guessed password came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parent {
    /// An original dictionary word.
    Root(String),
    /// An earlier hit, by node index.
    Node(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestNode {
    pub password: String,
    pub parent: Parent,
    pub rule: usize,
    /// 1-based position of the guess in the emitted stream.
    pub guess_index: u64,
}

/// Provenance of every hit: which (word, rule) pair produced it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitsForest {
    nodes: Vec<ForestNode>,
}

/// A parent/rule/child triple in text form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestEdge {
    pub child: String,
    pub parent: String,
    pub rule: String,
    pub guess_index: u64,
    /// 0 for children of dictionary words.
    pub depth: usize,
}

impl HitsForest {
    pub fn push(&mut self, node: ForestNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[ForestNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parent_password<'a>(&'a self, node: &'a ForestNode) -> &'a str {
        match &node.parent {
            Parent::Root(w) => w,
            Parent::Node(i) => &self.nodes[*i].password,
        }
    }

    pub fn depth(&self, index: usize) -> usize {
        let mut depth = 0;
        let mut cur = &self.nodes[index];
        while let Parent::Node(p) = cur.parent {
            depth += 1;
            cur = &self.nodes[p];
        }
        depth
    }

    /// Longest root-to-leaf path, counted in nodes.
    pub fn max_chain(&self) -> usize {
        (0..self.nodes.len()).map(|i| self.depth(i) + 1).max().unwrap_or(0)
    }

    /// Re-executes every edge. Fails on the first node whose rule does not
    /// map its parent to it, whose password is not a target, or whose parent
    /// was guessed later than itself.
    pub fn verify(&self, rules: &RuleSet, targets: &AttackedSet) -> Result<(), String> {
        for (i, node) in self.nodes.iter().enumerate() {
            let rule = rules.get(node.rule).ok_or_else(|| format!("node {i}: rule index {} out of range", node.rule))?;
            let parent = self.parent_password(node);
            if rule.apply(parent).as_deref() != Some(node.password.as_str()) {
                return Err(format!("node {i}: {rule} applied to {parent:?} does not give {:?}", node.password));
            }
            if !targets.contains(&node.password) {
                return Err(format!("node {i}: {:?} is not a target", node.password));
            }
            if let Parent::Node(p) = node.parent {
                if p >= i || self.nodes[p].guess_index >= node.guess_index {
                    return Err(format!("node {i}: parent {p} does not precede it"));
                }
            }
        }
        Ok(())
    }
}

/// Text triples for every hit, in guess order.
pub fn extract_forest(forest: &HitsForest, rule_texts: &[String]) -> Vec<ForestEdge> {
    forest
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| ForestEdge {
            child: n.password.clone(),
            parent: forest.parent_password(n).to_string(),
            rule: rule_texts[n.rule].clone(),
            guess_index: n.guess_index,
            depth: forest.depth(i),
        })
        .collect()
}

pub fn write_forest_csv(edges: &[ForestEdge], mut out: impl Write) -> io::Result<()> {
    use crate::eval::csv_field;
    writeln!(out, "child,parent,rule,guess_index")?;
    for e in edges {
        writeln!(out, "{},{},{},{}", csv_field(&e.child), csv_field(&e.parent), csv_field(&e.rule), e.guess_index)?;
    }
    Ok(())
}
