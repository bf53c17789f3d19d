//! Density-based clustering over feature matrices.
//!
//! The chain is the classic one: core distances from brute-force nearest
//! neighbors, a Prim minimum spanning tree under the mutual reachability
//! metric, a single-linkage merge tree, a condensed cluster tree with
//! per-cluster stabilities, and excess-of-mass cluster extraction. Points
//! in no selected cluster are labeled −1.
//!
//! `min_pts` plays both roles exposed by the pipeline: the neighbor count
//! behind core distances and the minimum cluster size.

use crate::pdw::{FeatureMatrix, Labeling};
use crate::{Error, Result};

/// An edge of the mutual-reachability minimum spanning tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Density cap standing in for 1/0 when duplicate points collapse a merge
/// distance to zero.
const LAMBDA_CAP: f64 = 1e9;

fn lambda_of(distance: f64) -> f64 {
    if distance <= 0.0 {
        LAMBDA_CAP
    } else {
        (1.0 / distance).min(LAMBDA_CAP)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance from every point to its (min_pts−1)-th nearest neighbor.
pub fn core_distances(features: &FeatureMatrix, min_pts: usize) -> Result<Vec<f64>> {
    let n = features.nrows();
    if min_pts < 2 {
        return Err(Error::validation("min_pts must be at least 2"));
    }
    if n < min_pts {
        return Err(Error::validation(format!(
            "need at least min_pts={min_pts} points, got {n}"
        )));
    }
    let k = min_pts - 1;
    let mut result = Vec::with_capacity(n);
    let mut dists = vec![0.0; n - 1];
    for i in 0..n {
        let row = features.row(i);
        let mut idx = 0;
        for j in 0..n {
            if j != i {
                dists[idx] = euclidean(row, features.row(j));
                idx += 1;
            }
        }
        let (_, kth, _) = dists.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
        result.push(*kth);
    }
    Ok(result)
}

/// Prim MST of the complete graph under
/// d_mreach(i,j) = max(core_i, core_j, d(i,j)). Ties resolve toward the
/// lowest point index so the tree is deterministic.
pub fn mutual_reachability_mst(features: &FeatureMatrix, min_pts: usize) -> Result<Vec<MstEdge>> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::validation("MST requires at least 2 points"));
    }
    let core = core_distances(features, min_pts.min(n))?;

    let mut in_tree = vec![false; n];
    let mut best_dist = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);

    let mut current = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        let cur_row = features.row(current);
        let cur_core = core[current];
        let mut next = usize::MAX;
        let mut next_dist = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = euclidean(cur_row, features.row(j)).max(cur_core).max(core[j]);
            if d < best_dist[j] {
                best_dist[j] = d;
                best_from[j] = current;
            }
            if best_dist[j] < next_dist {
                next_dist = best_dist[j];
                next = j;
            }
        }
        edges.push(MstEdge { a: best_from[next], b: next, weight: next_dist });
        in_tree[next] = true;
        current = next;
    }
    Ok(edges)
}

struct UnionFind {
    parent: Vec<usize>,
    component_node: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), component_node: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize, node: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        self.parent[ra] = rb;
        self.component_node[rb] = node;
    }
}

/// One merge of the single-linkage tree. Children < n are points, children
/// ≥ n refer to earlier merges (id − n).
struct SltNode {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

fn single_linkage_tree(mut edges: Vec<MstEdge>, n: usize) -> Vec<SltNode> {
    edges.sort_by(|x, y| {
        x.weight
            .partial_cmp(&y.weight)
            .unwrap()
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    let mut uf = UnionFind::new(n);
    let mut nodes: Vec<SltNode> = Vec::with_capacity(n - 1);
    for edge in edges {
        let ra = uf.find(edge.a);
        let rb = uf.find(edge.b);
        let left = uf.component_node[ra];
        let right = uf.component_node[rb];
        let size = slt_size(&nodes, n, left) + slt_size(&nodes, n, right);
        let node_id = n + nodes.len();
        nodes.push(SltNode { left, right, distance: edge.weight, size });
        uf.union(ra, rb, node_id);
    }
    nodes
}

fn slt_size(nodes: &[SltNode], n: usize, id: usize) -> usize {
    if id < n {
        1
    } else {
        nodes[id - n].size
    }
}

fn collect_points(nodes: &[SltNode], n: usize, root: usize, out: &mut Vec<usize>) {
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if id < n {
            out.push(id);
        } else {
            let node = &nodes[id - n];
            stack.push(node.left);
            stack.push(node.right);
        }
    }
}

/// A cluster of the condensed tree.
#[derive(Debug)]
struct CondensedCluster {
    birth_lambda: f64,
    stability: f64,
    /// Points that fell out of this cluster, with the density at which
    /// they left.
    point_children: Vec<(usize, f64)>,
    cluster_children: Vec<usize>,
}

fn condense_tree(slt: &[SltNode], n: usize, min_cluster_size: usize) -> Vec<CondensedCluster> {
    let mut clusters = vec![CondensedCluster {
        birth_lambda: 0.0,
        stability: 0.0,
        point_children: Vec::new(),
        cluster_children: Vec::new(),
    }];
    if slt.is_empty() {
        for p in 0..n {
            clusters[0].point_children.push((p, LAMBDA_CAP));
        }
        return clusters;
    }
    let top = n + slt.len() - 1;
    // (slt node, owning condensed cluster)
    let mut stack: Vec<(usize, usize)> = vec![(top, 0)];
    while let Some((id, cluster_id)) = stack.pop() {
        let node = &slt[id - n];
        let lambda = lambda_of(node.distance);
        let left_size = slt_size(slt, n, node.left);
        let right_size = slt_size(slt, n, node.right);
        let left_big = left_size >= min_cluster_size;
        let right_big = right_size >= min_cluster_size;
        match (left_big, right_big) {
            (true, true) => {
                // True split: the parent dies here, two clusters are born.
                let remaining = left_size + right_size;
                clusters[cluster_id].stability +=
                    remaining as f64 * (lambda - clusters[cluster_id].birth_lambda);
                for &child in &[node.left, node.right] {
                    let child_id = clusters.len();
                    clusters.push(CondensedCluster {
                        birth_lambda: lambda,
                        stability: 0.0,
                        point_children: Vec::new(),
                        cluster_children: Vec::new(),
                    });
                    clusters[cluster_id].cluster_children.push(child_id);
                    if child < n {
                        // min_cluster_size == 1 corner
                        clusters[child_id].point_children.push((child, LAMBDA_CAP));
                    } else {
                        stack.push((child, child_id));
                    }
                }
            }
            (big_left, _) => {
                // Runt split: the small side's points leave as noise and the
                // big side keeps the cluster identity. Both may be small, in
                // which case the cluster sheds everything here.
                let mut fall = Vec::new();
                let mut keep: Option<usize> = None;
                if big_left {
                    collect_points(slt, n, node.right, &mut fall);
                    keep = Some(node.left);
                } else if right_big {
                    collect_points(slt, n, node.left, &mut fall);
                    keep = Some(node.right);
                } else {
                    collect_points(slt, n, node.left, &mut fall);
                    collect_points(slt, n, node.right, &mut fall);
                }
                let birth = clusters[cluster_id].birth_lambda;
                for p in fall {
                    clusters[cluster_id].point_children.push((p, lambda));
                    clusters[cluster_id].stability += lambda - birth;
                }
                if let Some(kept) = keep {
                    if kept < n {
                        clusters[cluster_id].point_children.push((kept, lambda));
                        clusters[cluster_id].stability += lambda - birth;
                    } else {
                        stack.push((kept, cluster_id));
                    }
                }
            }
        }
    }
    clusters
}

/// Excess-of-mass selection over the non-root clusters.
fn extract_clusters(clusters: &[CondensedCluster]) -> Vec<usize> {
    let m = clusters.len();
    let mut score = vec![0.0; m];
    let mut selected = vec![false; m];
    // Children always carry larger indices, so reverse order is bottom-up.
    for id in (1..m).rev() {
        let c = &clusters[id];
        if c.cluster_children.is_empty() {
            score[id] = c.stability;
            selected[id] = true;
            continue;
        }
        let child_sum: f64 = c.cluster_children.iter().map(|&k| score[k]).sum();
        if c.stability >= child_sum {
            score[id] = c.stability;
            selected[id] = true;
            // Deselect the whole subtree below.
            let mut stack: Vec<usize> = c.cluster_children.clone();
            while let Some(k) = stack.pop() {
                selected[k] = false;
                stack.extend(&clusters[k].cluster_children);
            }
        } else {
            score[id] = child_sum;
        }
    }
    (1..m).filter(|&id| selected[id]).collect()
}

fn members(clusters: &[CondensedCluster], id: usize, out: &mut Vec<usize>) {
    let mut stack = vec![id];
    while let Some(k) = stack.pop() {
        out.extend(clusters[k].point_children.iter().map(|&(p, _)| p));
        stack.extend(&clusters[k].cluster_children);
    }
}

/// Clusters a feature matrix; returns one label per row with −1 for noise.
pub fn cluster(features: &FeatureMatrix, min_pts: usize) -> Result<Labeling> {
    let n = features.nrows();
    if min_pts < 2 {
        return Err(Error::validation("min_pts must be at least 2"));
    }
    if n < min_pts {
        return Err(Error::validation(format!(
            "need at least min_pts={min_pts} points, got {n}"
        )));
    }
    let mst = mutual_reachability_mst(features, min_pts)?;
    let slt = single_linkage_tree(mst, n);
    let condensed = condense_tree(&slt, n, min_pts);
    let selected = extract_clusters(&condensed);

    let mut labels = vec![-1i32; n];
    if selected.is_empty() {
        // Root-only tree: no candidate reached the minimum size. The one
        // shape worth rescuing is a block of exact duplicates (distance 0
        // collapses the merge tree to a chain of runt splits, so no cluster
        // node is ever born despite infinite density). Anything else is
        // genuinely structureless and stays noise.
        let kept: Vec<usize> = condensed[0]
            .point_children
            .iter()
            .filter(|&&(_, l)| l >= LAMBDA_CAP)
            .map(|&(p, _)| p)
            .collect();
        if kept.len() >= min_pts {
            for p in kept {
                labels[p] = 0;
            }
        }
    } else {
        for (label, &id) in selected.iter().enumerate() {
            let mut pts = Vec::new();
            members(&condensed, id, &mut pts);
            for p in pts {
                labels[p] = label as i32;
            }
        }
    }
    Ok(Labeling::new(labels).canonicalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdw::Feature;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::collections::HashMap;

    fn matrix_from_points(points: &[Vec<f64>]) -> FeatureMatrix {
        let cols = if points[0].len() == 1 {
            vec![Feature::Freq]
        } else {
            vec![Feature::Freq, Feature::Pw]
        };
        FeatureMatrix::from_rows(cols, points).unwrap()
    }

    #[test]
    fn core_distance_collinear_points() {
        let m = matrix_from_points(&[vec![0.0], vec![1.0], vec![2.0]]);
        let c2 = core_distances(&m, 2).unwrap();
        assert_eq!(c2, vec![1.0, 1.0, 1.0]);
        let c3 = core_distances(&m, 3).unwrap();
        assert_eq!(c3, vec![2.0, 1.0, 2.0]);
    }

    #[test]
    fn core_distance_duplicates_are_zero() {
        let m = matrix_from_points(&[vec![5.0], vec![5.0], vec![9.0]]);
        let c = core_distances(&m, 2).unwrap();
        assert_eq!(c[0], 0.0);
        assert_eq!(c[1], 0.0);
        assert_eq!(c[2], 4.0);
    }

    #[test]
    fn mst_two_points() {
        let m = matrix_from_points(&[vec![0.0], vec![3.0]]);
        let edges = mutual_reachability_mst(&m, 2).unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].weight, 3.0);
    }

    fn kruskal_weight(features: &FeatureMatrix, min_pts: usize) -> f64 {
        let n = features.nrows();
        let core = core_distances(features, min_pts).unwrap();
        let mut all_edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let d = euclidean(features.row(i), features.row(j))
                    .max(core[i])
                    .max(core[j]);
                all_edges.push((d, i, j));
            }
        }
        all_edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut uf = UnionFind::new(n);
        let mut total = 0.0;
        let mut count = 0;
        for (d, i, j) in all_edges {
            if uf.find(i) != uf.find(j) {
                uf.union(i, j, 0);
                total += d;
                count += 1;
                if count == n - 1 {
                    break;
                }
            }
        }
        total
    }

    #[test]
    fn mst_weight_matches_kruskal_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let n = rng.random_range(5..50);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
                .collect();
            let m = matrix_from_points(&pts);
            let min_pts = rng.random_range(2..=(n / 2).max(2));
            let prim: f64 = mutual_reachability_mst(&m, min_pts)
                .unwrap()
                .iter()
                .map(|e| e.weight)
                .sum();
            let kruskal = kruskal_weight(&m, min_pts);
            assert!((prim - kruskal).abs() < 1e-9, "prim {prim} kruskal {kruskal}");
        }
    }

    #[test]
    fn mst_bridge_edge_is_heaviest() {
        let m = matrix_from_points(&[vec![0.0], vec![0.1], vec![10.0], vec![10.1]]);
        let edges = mutual_reachability_mst(&m, 2).unwrap();
        let max = edges.iter().map(|e| e.weight).fold(0.0, f64::max);
        assert!((max - 9.9).abs() < 1e-12);
    }

    fn gaussian_blobs(
        rng: &mut ChaCha8Rng,
        centers: &[(f64, f64)],
        per_blob: usize,
        sigma: f64,
    ) -> (Vec<Vec<f64>>, Vec<usize>) {
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (b, &(cx, cy)) in centers.iter().enumerate() {
            for _ in 0..per_blob {
                pts.push(vec![cx + normal.sample(rng), cy + normal.sample(rng)]);
                truth.push(b);
            }
        }
        (pts, truth)
    }

    #[test]
    fn two_blobs_found_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (pts, truth) = gaussian_blobs(&mut rng, &[(0.0, 0.0), (1.0, 0.0)], 200, 0.01);
        let m = matrix_from_points(&pts);
        let labels = cluster(&m, 15).unwrap();
        assert_eq!(labels.cluster_count(), 2, "labels: {:?}", labels.cluster_count());
        let labeled = labels.labels().iter().filter(|&&l| l >= 0).count();
        assert!(labeled as f64 >= 0.95 * pts.len() as f64, "only {labeled} labeled");
        // Purity: each cluster maps to a single blob.
        let mut seen: HashMap<i32, usize> = HashMap::new();
        for (i, &l) in labels.labels().iter().enumerate() {
            if l < 0 {
                continue;
            }
            match seen.get(&l) {
                Some(&b) => assert_eq!(b, truth[i], "cluster {l} mixes blobs"),
                None => {
                    seen.insert(l, truth[i]);
                }
            }
        }
    }

    #[test]
    fn uniform_noise_is_mostly_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect();
        let m = matrix_from_points(&pts);
        let labels = cluster(&m, 25).unwrap();
        let noise = labels.labels().iter().filter(|&&l| l < 0).count();
        assert!(noise >= 45, "only {noise}/50 outliers");
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![0.5, 0.5]).collect();
        let m = matrix_from_points(&pts);
        let labels = cluster(&m, 10).unwrap();
        assert_eq!(labels.cluster_count(), 1);
        assert!(labels.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn clusters_meet_min_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut pts, _) = gaussian_blobs(&mut rng, &[(0.0, 0.0), (2.0, 0.0)], 60, 0.05);
        for _ in 0..30 {
            pts.push(vec![rng.random_range(-1.0..3.0), rng.random_range(-1.0..1.0)]);
        }
        let m = matrix_from_points(&pts);
        let min_pts = 12;
        let labels = cluster(&m, min_pts).unwrap();
        let mut counts: HashMap<i32, usize> = HashMap::new();
        for &l in labels.labels() {
            if l >= 0 {
                *counts.entry(l).or_default() += 1;
            }
        }
        for (l, c) in counts {
            assert!(c >= min_pts, "cluster {l} has only {c} members");
        }
    }

    fn same_partition(a: &[i32], b: &[i32]) -> bool {
        if a.len() != b.len() {
            return false;
        }
        let mut fwd: HashMap<i32, i32> = HashMap::new();
        let mut bwd: HashMap<i32, i32> = HashMap::new();
        for (&x, &y) in a.iter().zip(b) {
            if (x < 0) != (y < 0) {
                return false;
            }
            if x < 0 {
                continue;
            }
            if *fwd.entry(x).or_insert(y) != y || *bwd.entry(y).or_insert(x) != x {
                return false;
            }
        }
        true
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (pts, _) = gaussian_blobs(&mut rng, &[(0.0, 0.0), (3.0, 1.0), (0.0, 4.0)], 50, 0.1);
        let m = matrix_from_points(&pts);
        let base = cluster(&m, 10).unwrap();

        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let mp = matrix_from_points(&permuted);
        let shuffled = cluster(&mp, 10).unwrap();

        // Pull the permuted labels back into original order.
        let mut realigned = vec![0i32; pts.len()];
        for (new_idx, &orig_idx) in perm.iter().enumerate() {
            realigned[orig_idx] = shuffled.labels()[new_idx];
        }
        assert!(same_partition(base.labels(), &realigned));
    }


    #[test]
    fn raising_min_pts_never_adds_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (pts, _) =
            gaussian_blobs(&mut rng, &[(0.0, 0.0), (2.0, 0.0), (1.0, 2.0)], 80, 0.08);
        let m = matrix_from_points(&pts);
        let mut last = usize::MAX;
        for min_pts in [5, 10, 20, 40] {
            let count = cluster(&m, min_pts).unwrap().cluster_count();
            assert!(count <= last, "min_pts {min_pts}: {count} > {last}");
            last = count;
        }
    }
}
