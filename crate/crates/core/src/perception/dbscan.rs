use crate::gp::Point;

/// Cluster id per point; `None` marks noise.
pub type ClusterLabels = Vec<Option<usize>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self { eps: 0.35, min_pts: 2 }
    }
}

/// DBSCAN over 2D points. `min_pts` counts the point itself. Clusters are
/// numbered in order of their first core point.
pub fn cluster_points(points: &[Point], params: &DbscanParams) -> ClusterLabels {
    assert!(params.eps > 0.0 && params.min_pts >= 1);
    let n = points.len();
    let eps2 = params.eps * params.eps;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| (points[i] - points[j]).norm_squared() <= eps2)
                .collect()
        })
        .collect();
    let is_core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_pts).collect();

    let mut labels: ClusterLabels = vec![None; n];
    let mut next = 0;
    for seed in 0..n {
        if labels[seed].is_some() || !is_core[seed] {
            continue;
        }
        labels[seed] = Some(next);
        let mut stack = vec![seed];
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if labels[j].is_none() {
                    labels[j] = Some(next);
                    if is_core[j] {
                        stack.push(j);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}

pub fn cluster_count(labels: &ClusterLabels) -> usize {
    labels.iter().flatten().max().map_or(0, |m| m + 1)
}

/// Point indices per cluster.
pub fn cluster_members(labels: &ClusterLabels) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); cluster_count(labels)];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            out[*c].push(i);
        }
    }
    out
}
