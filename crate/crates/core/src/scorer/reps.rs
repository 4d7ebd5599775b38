//! Representative treatment values and string clustering.

/// Probabilities 0.05, 0.15, ..., 0.95.
pub fn quantile_levels() -> Vec<f64> {
    (0..10).map(|i| (2 * i + 1) as f64 / 20.0).collect()
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// De-duplicated type-7 quantiles at [`quantile_levels`], ascending.
pub fn numeric_reps(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = quantile_levels().into_iter().map(|p| quantile_sorted(&v, p)).collect();
    out.dedup();
    out
}

/// Optimal string alignment distance: Levenshtein plus adjacent
/// transpositions, each substring edited at most once.
pub fn osa_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut v = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                v = v.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = v;
        }
    }
    d[n][m]
}

/// Result of clustering a list of strings (one entry per input point).
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster label per point; noise points get a singleton label per
    /// distinct string.
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    pub eps: f64,
}

/// DBSCAN over `points` with OSA distance. `eps` is placed at the knee of the
/// sorted k-nearest-neighbour distances (k = `min_pts`); when no knee exists
/// it falls back to the median pairwise distance.
pub fn cluster_strings(points: &[String], min_pts: usize) -> Clustering {
    let n = points.len();
    let mut distinct: Vec<&str> = points.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let index = |s: &str| distinct.binary_search(&s).expect("present");
    let pidx: Vec<usize> = points.iter().map(|s| index(s)).collect();
    let dd: Vec<Vec<f64>> = distinct
        .iter()
        .map(|a| distinct.iter().map(|b| osa_distance(a, b) as f64).collect())
        .collect();
    let dist = |i: usize, j: usize| dd[pidx[i]][pidx[j]];

    let eps = choose_eps(n, min_pts, &dist);
    let neighbours = |i: usize| -> Vec<usize> { (0..n).filter(|&j| dist(i, j) <= eps).collect() };

    const UNSET: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNSET; n];
    let mut next = 0;
    for i in 0..n {
        if label[i] != UNSET {
            continue;
        }
        let nb = neighbours(i);
        if nb.len() < min_pts {
            label[i] = NOISE;
            continue;
        }
        let c = next;
        next += 1;
        label[i] = c;
        let mut queue: Vec<usize> = nb;
        let mut k = 0;
        while k < queue.len() {
            let j = queue[k];
            k += 1;
            if label[j] == NOISE {
                label[j] = c;
            }
            if label[j] != UNSET {
                continue;
            }
            label[j] = c;
            let nj = neighbours(j);
            if nj.len() >= min_pts {
                queue.extend(nj);
            }
        }
    }
    // Noise: one singleton cluster per distinct string.
    let mut noise_label: Vec<Option<usize>> = vec![None; distinct.len()];
    for i in 0..n {
        if label[i] == NOISE {
            let l = *noise_label[pidx[i]].get_or_insert_with(|| {
                next += 1;
                next - 1
            });
            label[i] = l;
        }
    }
    Clustering {
        labels: label,
        n_clusters: next,
        eps,
    }
}

fn choose_eps(n: usize, k: usize, dist: &dyn Fn(usize, usize) -> f64) -> f64 {
    let median_pairwise = || {
        let mut all = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                all.push(dist(i, j));
            }
        }
        if all.is_empty() {
            return 0.0;
        }
        all.sort_by(f64::total_cmp);
        quantile_sorted(&all, 0.5)
    };
    if n <= k {
        return median_pairwise();
    }
    let mut kdist: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist(i, j)).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect();
    kdist.sort_by(f64::total_cmp);
    match knee(&kdist) {
        Some(e) if e > 0.0 => e,
        // A knee at zero means duplicates dominate; step to the first
        // non-zero distance so near-identical strings still group.
        Some(_) => kdist.iter().copied().find(|d| *d > 0.0).unwrap_or(0.0),
        None => median_pairwise(),
    }
}

/// Point of an ascending curve farthest below the chord joining its ends.
fn knee(ys: &[f64]) -> Option<f64> {
    let n = ys.len();
    if n < 3 || ys[0] == ys[n - 1] {
        return None;
    }
    let (y0, y1) = (ys[0], ys[n - 1]);
    let mut best = (0.0, None);
    for (i, &y) in ys.iter().enumerate() {
        let chord = y0 + (y1 - y0) * i as f64 / (n - 1) as f64;
        let gap = chord - y;
        if gap > best.0 {
            best = (gap, Some(y));
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert!((quantile_sorted(&v, 0.05) - 1.15).abs() < 1e-12);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(numeric_reps(&[5.0; 8]), vec![5.0]);
        assert_eq!(numeric_reps(&[0.0, 1.0]).len(), 10);
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        let q = numeric_reps(&hundred);
        assert_eq!(q.len(), 10);
        assert!((q[0] - 5.95).abs() < 1e-9 && (q[1] - 15.85).abs() < 1e-9 && (q[9] - 95.05).abs() < 1e-9, "{q:?}");
    }

    #[test]
    fn osa_counts_transpositions_once() {
        assert_eq!(osa_distance("", "abc"), 3);
        assert_eq!(osa_distance("abcd", "abdc"), 1);
        assert_eq!(osa_distance("kitten", "sitting"), 3);
        // OSA cannot edit a transposed pair again.
        assert_eq!(osa_distance("ca", "abc"), 3);
    }

    #[test]
    fn separates_two_families() {
        let mut pts = Vec::new();
        for i in 0..6 {
            pts.push(format!("error-{i}"));
            pts.push(format!("okay{}", "!".repeat(i % 2)));
        }
        let c = cluster_strings(&pts, 2);
        let errs: Vec<usize> = (0..12).step_by(2).map(|i| c.labels[i]).collect();
        let oks: Vec<usize> = (1..12).step_by(2).map(|i| c.labels[i]).collect();
        assert!(errs.iter().all(|l| *l == errs[0]), "{c:?}");
        assert!(oks.iter().all(|l| *l == oks[0]), "{c:?}");
        assert_ne!(errs[0], oks[0]);
    }

    #[test]
    fn identical_strings_form_one_cluster() {
        let pts = vec!["x".to_string(); 5];
        let c = cluster_strings(&pts, 4);
        assert_eq!(c.n_clusters, 1);
    }
}
