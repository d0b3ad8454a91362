//! Kuhn-Munkres assignment and frame-to-frame ellipse association.

use super::mvee::Ellipse;

/// Minimum-cost assignment for a rectangular cost matrix given as rows.
/// Returns `assignment[row] = Some(col)`; exactly `min(rows, cols)` pairs
/// are matched.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    assert!(cost.iter().all(|r| r.len() == cols), "ragged cost matrix");
    if cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        let by_col = hungarian(&transposed);
        let mut out = vec![None; rows];
        for (j, i) in by_col.into_iter().enumerate() {
            if let Some(i) = i {
                out[i] = Some(j);
            }
        }
        return out;
    }

    // shortest augmenting paths with row/column potentials, 1-based with a
    // virtual column 0
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut matched_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if matched_row[j] != 0 {
            out[matched_row[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Rows are previous-frame ellipses, columns current detections; entries are
/// center distances.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub entries: Vec<Vec<f64>>,
}

impl AffinityMatrix {
    pub fn from_centers(tracks: &[Ellipse], detections: &[Ellipse]) -> Self {
        Self {
            entries: tracks
                .iter()
                .map(|t| detections.iter().map(|d| (t.center - d.center).norm()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// `(track index, detection index)` pairs within the gate.
    pub matches: Vec<(usize, usize)>,
    /// Detections that start new tracks.
    pub new_detections: Vec<usize>,
    /// Tracks without a detection this frame.
    pub missed_tracks: Vec<usize>,
}

/// Optimal center-distance association; pairs farther apart than `d_max`
/// are split into a new track plus a miss.
pub fn associate(tracks: &[Ellipse], detections: &[Ellipse], d_max: f64) -> Association {
    let affinity = AffinityMatrix::from_centers(tracks, detections);
    let assignment = hungarian(&affinity.entries);
    let mut out = Association::default();
    let mut detection_used = vec![false; detections.len()];
    for (t, col) in assignment.iter().enumerate() {
        match col {
            Some(d) if affinity.entries[t][*d] <= d_max => {
                out.matches.push((t, *d));
                detection_used[*d] = true;
            }
            _ => out.missed_tracks.push(t),
        }
    }
    out.new_detections = (0..detections.len()).filter(|&d| !detection_used[d]).collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn total(cost: &[Vec<f64>], a: &[Option<usize>]) -> f64 {
        a.iter().enumerate().filter_map(|(i, j)| j.map(|j| cost[i][j])).sum()
    }

    /// Exhaustive minimum over injective maps from the smaller side.
    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        let rows = cost.len();
        let cols = cost[0].len();
        fn rec(cost: &[Vec<f64>], i: usize, used: &mut Vec<bool>, transposed: bool) -> f64 {
            let (n, m) = if transposed {
                (cost[0].len(), cost.len())
            } else {
                (cost.len(), cost[0].len())
            };
            if i == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..m {
                if !used[j] {
                    used[j] = true;
                    let c = if transposed { cost[j][i] } else { cost[i][j] };
                    best = best.min(c + rec(cost, i + 1, used, transposed));
                    used[j] = false;
                }
            }
            best
        }
        if rows <= cols {
            rec(cost, 0, &mut vec![false; cols], false)
        } else {
            rec(cost, 0, &mut vec![false; rows], true)
        }
    }

    fn ellipse(x: f64, y: f64) -> Ellipse {
        Ellipse {
            center: Point::new(x, y),
            a: 0.3,
            b: 0.2,
            theta: 0.0,
        }
    }

    #[test]
    fn two_by_two() {
        let cost = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let a = hungarian(&cost);
        assert_eq!(a, vec![Some(0), Some(1)]);
        assert_eq!(total(&cost, &a), 2.0);
    }

    #[test]
    fn rectangular_and_empty() {
        assert!(hungarian(&[]).is_empty());
        assert_eq!(hungarian(&[vec![], vec![]]), vec![None, None]);
        let cost = vec![vec![5.0], vec![1.0], vec![3.0]];
        assert_eq!(hungarian(&cost), vec![None, Some(0), None]);
        let cost = vec![vec![4.0, 1.0, 3.0]];
        assert_eq!(hungarian(&cost), vec![Some(1)]);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let rows = rng.gen_range(1..=6);
            let cols = rng.gen_range(1..=6);
            let cost: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let a = hungarian(&cost);
            assert_eq!(a.iter().flatten().count(), rows.min(cols));
            assert!((total(&cost, &a) - brute_force(&cost)).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_lists_identity() {
        let e = vec![ellipse(0.0, 0.0), ellipse(2.0, 1.0), ellipse(-3.0, 4.0)];
        let a = associate(&e, &e, 1.0);
        assert_eq!(a.matches, vec![(0, 0), (1, 1), (2, 2)]);
        assert!(a.new_detections.is_empty() && a.missed_tracks.is_empty());
    }

    #[test]
    fn gate_splits_far_pairs() {
        let a = associate(&[ellipse(0.0, 0.0)], &[ellipse(1.5, 0.0)], 1.0);
        assert!(a.matches.is_empty());
        assert_eq!(a.new_detections, vec![0]);
        assert_eq!(a.missed_tracks, vec![0]);
        let a = associate(&[], &[ellipse(0.0, 0.0)], 1.0);
        assert_eq!(a.new_detections, vec![0]);
        let a = associate(&[ellipse(0.0, 0.0)], &[], 1.0);
        assert_eq!(a.missed_tracks, vec![0]);
    }
}
