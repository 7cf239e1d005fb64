//! Region graphs: binary trees of variable partitions that fix the scope
//! decomposition of every circuit built on them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scope::Scope;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionNode {
    Leaf { vars: Vec<usize> },
    Split { left: Box<RegionNode>, right: Box<RegionNode> },
}

impl RegionNode {
    pub fn vars(&self) -> Vec<usize> {
        match self {
            RegionNode::Leaf { vars } => vars.clone(),
            RegionNode::Split { left, right } => {
                let mut v = left.vars();
                v.extend(right.vars());
                v
            }
        }
    }

    pub fn scope(&self) -> Scope {
        Scope::from_vars(self.vars())
    }

    /// Balanced binary tree over `vars` in the given order, left half rounded up.
    pub fn balanced(vars: &[usize]) -> RegionNode {
        assert!(!vars.is_empty(), "balanced tree over no variables");
        if vars.len() == 1 {
            return RegionNode::Leaf { vars: vars.to_vec() };
        }
        let mid = vars.len().div_ceil(2);
        RegionNode::split(RegionNode::balanced(&vars[..mid]), RegionNode::balanced(&vars[mid..]))
    }

    pub fn split(left: RegionNode, right: RegionNode) -> RegionNode {
        RegionNode::Split { left: Box::new(left), right: Box::new(right) }
    }

    /// Pre-order walk.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a RegionNode)) {
        f(self);
        if let RegionNode::Split { left, right } = self {
            left.visit(f);
            right.visit(f);
        }
    }

    fn depth(&self) -> usize {
        match self {
            RegionNode::Leaf { .. } => 0,
            RegionNode::Split { left, right } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionGraph {
    pub num_vars: usize,
    pub root: RegionNode,
}

impl RegionGraph {
    /// Checks that splits partition their parent and the root covers all variables.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.num_vars];
        let mut ok = true;
        self.root.visit(&mut |n| {
            if let RegionNode::Leaf { vars } = n {
                if vars.is_empty() {
                    ok = false;
                }
                for &v in vars {
                    if v >= seen.len() || seen[v] {
                        ok = false;
                    } else {
                        seen[v] = true;
                    }
                }
            }
        });
        if !ok || seen.iter().any(|s| !s) {
            return Err(Error::Schema("region graph does not partition the variables".into()));
        }
        Ok(())
    }

    pub fn num_regions(&self) -> usize {
        let mut n = 0;
        self.root.visit(&mut |_| n += 1);
        n
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn leaves(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.root.visit(&mut |n| {
            if let RegionNode::Leaf { vars } = n {
                out.push(vars.clone());
            }
        });
        out
    }
}

/// Recursive random halving of the variable set; the left child takes the
/// extra variable when the count is odd.
pub fn random_binary_tree(num_vars: usize, seed: u64) -> Result<RegionGraph> {
    if num_vars == 0 {
        return Err(Error::InvalidArgument("region graph needs at least one variable".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn go(mut vars: Vec<usize>, rng: &mut ChaCha8Rng) -> RegionNode {
        if vars.len() == 1 {
            return RegionNode::Leaf { vars };
        }
        vars.shuffle(rng);
        let right = vars.split_off(vars.len().div_ceil(2));
        let (mut l, mut r) = (vars, right);
        l.sort_unstable();
        r.sort_unstable();
        RegionNode::split(go(l, rng), go(r, rng))
    }
    Ok(RegionGraph { num_vars, root: go((0..num_vars).collect(), &mut rng) })
}

/// Quad-tree over a `height x width` image with `channels` variables per
/// pixel. Variable index of `(row, col, ch)` is `(row * width + col) * channels + ch`.
/// Each four-way patch split is a row split followed by column splits.
pub fn quad_tree(height: usize, width: usize, channels: usize) -> Result<RegionGraph> {
    if height == 0 || width == 0 || channels == 0 {
        return Err(Error::InvalidArgument("image dimensions must be positive".into()));
    }
    let pixel = |r: usize, c: usize| RegionNode::Leaf {
        vars: (0..channels).map(|ch| (r * width + c) * channels + ch).collect(),
    };
    fn cols(r0: usize, r1: usize, c0: usize, c1: usize, px: &dyn Fn(usize, usize) -> RegionNode) -> RegionNode {
        if c1 - c0 == 1 {
            return rows(r0, r1, c0, c1, px);
        }
        let mid = c0 + (c1 - c0).div_ceil(2);
        RegionNode::split(rows(r0, r1, c0, mid, px), rows(r0, r1, mid, c1, px))
    }
    fn rows(r0: usize, r1: usize, c0: usize, c1: usize, px: &dyn Fn(usize, usize) -> RegionNode) -> RegionNode {
        if r1 - r0 == 1 && c1 - c0 == 1 {
            return px(r0, c0);
        }
        if r1 - r0 == 1 {
            return cols(r0, r1, c0, c1, px);
        }
        let mid = r0 + (r1 - r0).div_ceil(2);
        RegionNode::split(cols(r0, mid, c0, c1, px), cols(mid, r1, c0, c1, px))
    }
    let root = rows(0, height, 0, width, &pixel);
    Ok(RegionGraph { num_vars: height * width * channels, root })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_tree_shapes() {
        let g = random_binary_tree(1, 0).unwrap();
        assert_eq!(g.root, RegionNode::Leaf { vars: vec![0] });
        let g = random_binary_tree(4, 3).unwrap();
        match &g.root {
            RegionNode::Split { left, right } => {
                assert_eq!(left.vars().len(), 2);
                assert_eq!(right.vars().len(), 2);
            }
            _ => panic!(),
        }
        assert!(g.leaves().iter().all(|l| l.len() == 1));
        g.validate().unwrap();
        assert_eq!(random_binary_tree(7, 11).unwrap(), random_binary_tree(7, 11).unwrap());
        let g = random_binary_tree(7, 11).unwrap();
        if let RegionNode::Split { left, .. } = &g.root {
            assert_eq!(left.vars().len(), 4);
        }
    }

    #[test]
    fn quad_tree_shapes() {
        let g = quad_tree(1, 1, 1).unwrap();
        assert_eq!(g.root, RegionNode::Leaf { vars: vec![0] });
        let g = quad_tree(2, 2, 1).unwrap();
        assert_eq!(g.leaves().len(), 4);
        assert_eq!(g.depth(), 2);
        g.validate().unwrap();
        let g = quad_tree(2, 1, 3).unwrap();
        assert_eq!(g.leaves(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn quad_tree_regions_are_patches() {
        let (h, w) = (4, 4);
        let g = quad_tree(h, w, 1).unwrap();
        g.validate().unwrap();
        g.root.visit(&mut |n| {
            let vars = n.vars();
            let rs: Vec<usize> = vars.iter().map(|v| v / w).collect();
            let cs: Vec<usize> = vars.iter().map(|v| v % w).collect();
            let (r0, r1) = (*rs.iter().min().unwrap(), *rs.iter().max().unwrap());
            let (c0, c1) = (*cs.iter().min().unwrap(), *cs.iter().max().unwrap());
            assert_eq!((r1 - r0 + 1) * (c1 - c0 + 1), vars.len());
        });
    }

    #[test]
    fn rejects_bad_graphs() {
        let g = RegionGraph { num_vars: 2, root: RegionNode::Leaf { vars: vec![0] } };
        assert!(g.validate().is_err());
        assert!(random_binary_tree(0, 0).is_err());
    }
}
