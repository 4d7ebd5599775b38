use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy)]
pub(super) enum FeatKind {
    Numeric,
    Categorical { n_levels: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
enum Node {
    Leaf {
        value: f64,
    },
    /// `x <= threshold` goes left.
    Numeric {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Codes listed in `left_levels` go left; everything else, including
    /// unseen levels, goes right.
    Categorical {
        feature: usize,
        left_levels: Vec<usize>,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(super) struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub(super) fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Numeric {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Categorical {
                    feature,
                    left_levels,
                    left,
                    right,
                } => {
                    let code = x[*feature];
                    let goes_left = code >= 0.0 && left_levels.contains(&(code as usize));
                    i = if goes_left { *left } else { *right };
                }
            }
        }
    }
}

enum Rule {
    Numeric(f64),
    Categorical(Vec<usize>),
}

struct Split {
    gain: f64,
    feature: usize,
    /// Secondary tie-break: threshold or prefix length.
    key: f64,
    rule: Rule,
}

impl Split {
    fn beats(&self, other: &Option<Split>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.gain > o.gain
                    || (self.gain == o.gain && (self.feature, self.key) < (o.feature, o.key))
            }
        }
    }
}

pub(super) fn grow(
    features: &[Vec<f64>],
    kinds: &[FeatKind],
    y: &[f64],
    mtry: usize,
    min_node_size: usize,
    rng: &mut impl Rng,
) -> Tree {
    let n = y.len();
    let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![(0usize, sample)];
    let mut order: Vec<usize> = (0..features.len()).collect();
    while let Some((id, idx)) = stack.pop() {
        let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        let pure = idx.iter().all(|&i| y[i] == y[idx[0]]);
        if idx.len() <= min_node_size || pure {
            nodes[id] = Node::Leaf { value: mean };
            continue;
        }
        order.shuffle(rng);
        let mut best: Option<Split> = None;
        let mut tried = 0;
        for &f in &order {
            if tried == mtry {
                break;
            }
            let cand = match kinds[f] {
                FeatKind::Numeric => numeric_split(&features[f], y, &idx, f),
                FeatKind::Categorical { n_levels } => categorical_split(&features[f], y, &idx, f, n_levels),
            };
            // Constant features do not count towards mtry.
            let Some(cand) = cand else { continue };
            tried += 1;
            if cand.beats(&best) {
                best = Some(cand);
            }
        }
        let Some(best) = best else {
            nodes[id] = Node::Leaf { value: mean };
            continue;
        };
        let col = &features[best.feature];
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| match &best.rule {
            Rule::Numeric(t) => col[i] <= *t,
            Rule::Categorical(levels) => levels.contains(&(col[i] as usize)),
        });
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[id] = match best.rule {
            Rule::Numeric(threshold) => Node::Numeric {
                feature: best.feature,
                threshold,
                left,
                right,
            },
            Rule::Categorical(left_levels) => Node::Categorical {
                feature: best.feature,
                left_levels,
                left,
                right,
            },
        };
        stack.push((right, r));
        stack.push((left, l));
    }
    Tree { nodes }
}

fn numeric_split(col: &[f64], y: &[f64], idx: &[usize], feature: usize) -> Option<Split> {
    let mut pairs: Vec<(f64, f64)> = idx.iter().map(|&i| (col[i], y[i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pairs[0].0 == pairs[pairs.len() - 1].0 {
        return None;
    }
    let n = pairs.len() as f64;
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let base = total * total / n;
    let mut best: Option<Split> = None;
    let mut sl = 0.0;
    for k in 1..pairs.len() {
        sl += pairs[k - 1].1;
        let (a, b) = (pairs[k - 1].0, pairs[k].0);
        if a == b {
            continue;
        }
        let nl = k as f64;
        let sr = total - sl;
        let gain = sl * sl / nl + sr * sr / (n - nl) - base;
        let mid = a + (b - a) / 2.0;
        let threshold = if mid < b { mid } else { a };
        let cand = Split {
            gain,
            feature,
            key: threshold,
            rule: Rule::Numeric(threshold),
        };
        if cand.beats(&best) {
            best = Some(cand);
        }
    }
    best
}

fn categorical_split(col: &[f64], y: &[f64], idx: &[usize], feature: usize, n_levels: usize) -> Option<Split> {
    let mut sum = vec![0.0; n_levels];
    let mut cnt = vec![0usize; n_levels];
    for &i in idx {
        let c = col[i] as usize;
        sum[c] += y[i];
        cnt[c] += 1;
    }
    let mut present: Vec<usize> = (0..n_levels).filter(|&c| cnt[c] > 0).collect();
    if present.len() < 2 {
        return None;
    }
    present.sort_by(|&a, &b| {
        let (ma, mb) = (sum[a] / cnt[a] as f64, sum[b] / cnt[b] as f64);
        ma.total_cmp(&mb).then(a.cmp(&b))
    });
    let n = idx.len() as f64;
    let total: f64 = sum.iter().sum();
    let base = total * total / n;
    let mut best: Option<Split> = None;
    let (mut sl, mut nl) = (0.0, 0usize);
    for k in 1..present.len() {
        sl += sum[present[k - 1]];
        nl += cnt[present[k - 1]];
        let sr = total - sl;
        let nr = n - nl as f64;
        let gain = sl * sl / nl as f64 + sr * sr / nr - base;
        let cand = Split {
            gain,
            feature,
            key: k as f64,
            rule: Rule::Categorical({
                let mut l = present[..k].to_vec();
                l.sort_unstable();
                l
            }),
        };
        if cand.beats(&best) {
            best = Some(cand);
        }
    }
    best
}
