//! Text and JSON forms of a tree.
//!
//! Text: one node per line, `node_id parent_id grad_node_id draw_id step_size main_flag`,
//! with `-` for the root's absent fields and `main_flag` ∈ {0, 1}. Lines
//! starting with `#` and blank lines are ignored.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{ComputationTree, TreeNode};
use crate::error::{Error, Result};

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn parse_opt<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<Option<T>> {
    if tok == "-" {
        return Ok(None);
    }
    tok.parse().map(Some).map_err(|_| Error::Parse {
        line,
        reason: format!("bad {what} `{tok}`"),
    })
}

impl ComputationTree {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# node_id parent_id grad_node_id draw_id step_size main_flag\n");
        for n in self.nodes() {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                n.node_id,
                opt(n.parent_id),
                opt(n.grad_node_id),
                opt(n.rng_draw_id),
                n.step_size,
                u8::from(n.on_main_branch)
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            if toks.len() != 6 {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected 6 fields, found {}", toks.len()),
                });
            }
            let node_id = toks[0].parse().map_err(|_| Error::Parse {
                line,
                reason: format!("bad node_id `{}`", toks[0]),
            })?;
            let step_size: f64 = toks[4].parse().map_err(|_| Error::Parse {
                line,
                reason: format!("bad step_size `{}`", toks[4]),
            })?;
            let on_main_branch = match toks[5] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line,
                        reason: format!("main_flag must be 0 or 1, found `{other}`"),
                    })
                }
            };
            nodes.push(TreeNode {
                node_id,
                parent_id: parse_opt(toks[1], line, "parent_id")?,
                grad_node_id: parse_opt(toks[2], line, "grad_node_id")?,
                rng_draw_id: parse_opt(toks[3], line, "draw_id")?,
                step_size,
                on_main_branch,
                main_branch_index: None,
            });
        }
        Self::from_nodes(nodes)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self.nodes())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let nodes: Vec<TreeNode> = serde_json::from_str(text)?;
        Self::from_nodes(nodes)
    }
}
