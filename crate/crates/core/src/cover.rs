//! Hierarchical Gonzalez decomposition: a simplified net tree that keeps the
//! covering property and drops packing.
//!
//! Levels are built one at a time with [`next_level`]; a caller walking down
//! the tree only needs the current level to produce the next one, so at most
//! two levels are resident at once.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{EmdError, Result};
use crate::geometry::{euclidean, PointSource};

/// Largest accepted doubling dimension for the fixed-round mode; keeps
/// `4^rho` well inside `usize`.
pub const MAX_RHO: u32 = 15;

/// One ball of the decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverNode {
    /// Index of the representative point; always one of `members`.
    pub center: usize,
    /// Indices into the point source, ascending.
    pub members: Vec<usize>,
    pub level: u32,
    /// Measured distance from `center` to its farthest member.
    pub radius_bound: f64,
    /// Singleton or all members coincide with the center.
    pub is_leaf: bool,
}

impl CoverNode {
    fn from_members<P: PointSource>(points: &P, center: usize, members: Vec<usize>, level: u32) -> Self {
        let c = points.point(center);
        let radius_bound = members
            .iter()
            .map(|&m| euclidean(c, points.point(m)))
            .fold(0.0, f64::max);
        let is_leaf = members.len() == 1 || radius_bound == 0.0;
        Self {
            center,
            members,
            level,
            radius_bound,
            is_leaf,
        }
    }
}

/// A full partition of the point source into balls of radius at most
/// `target_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverLevel {
    pub level: u32,
    pub nodes: Vec<CoverNode>,
    pub target_radius: f64,
}

impl CoverLevel {
    /// Level 0: a single node holding every point, centered at `center`.
    /// Its target radius is unbounded.
    pub fn root<P: PointSource>(points: &P, center: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(EmdError::EmptySet);
        }
        if center >= points.len() {
            return Err(EmdError::InvalidArgument(format!(
                "root center {center} out of range for {} points",
                points.len()
            )));
        }
        let node = CoverNode::from_members(points, center, (0..points.len()).collect(), 0);
        Ok(Self {
            level: 0,
            nodes: vec![node],
            target_radius: f64::INFINITY,
        })
    }

    pub fn max_radius(&self) -> f64 {
        self.nodes.iter().map(|n| n.radius_bound).fold(0.0, f64::max)
    }

    /// Writes `level,node_id,center_index,member_count,radius_bound` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "level,node_id,center_index,member_count,radius_bound")?;
        for (id, node) in self.nodes.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.level,
                id,
                node.center,
                node.members.len(),
                node.radius_bound
            )?;
        }
        Ok(())
    }
}

/// How a non-leaf node is split when building the next level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SplitMode {
    /// Add centers one at a time until the clusters meet the target radius.
    Adaptive,
    /// Run `4^rho` farthest-point rounds per node (then keep going if the
    /// target is still not met).
    Fixed { rho: u32 },
}

/// Result of a farthest-point traversal over a subset.
#[derive(Debug, Clone, PartialEq)]
pub struct GonzalezRun {
    /// Chosen centers as point indices, in selection order.
    pub centers: Vec<usize>,
    /// For every subset position, the ordinal of its nearest center.
    pub assignment: Vec<usize>,
    pub achieved_radius: f64,
}

/// Incremental farthest-point traversal over a fixed subset.
struct Traversal<'a, P: PointSource> {
    points: &'a P,
    subset: &'a [usize],
    nearest: Vec<f64>,
    assignment: Vec<usize>,
    centers: Vec<usize>,
}

impl<'a, P: PointSource> Traversal<'a, P> {
    fn new(points: &'a P, subset: &'a [usize], seed_pos: usize) -> Self {
        let seed = subset[seed_pos];
        let c = points.point(seed);
        let nearest = subset.iter().map(|&i| euclidean(c, points.point(i))).collect();
        Self {
            points,
            subset,
            nearest,
            assignment: vec![0; subset.len()],
            centers: vec![seed],
        }
    }

    /// Farthest member from the current centers; ties go to the lowest
    /// position.
    fn farthest(&self) -> (usize, f64) {
        let mut best = (0, self.nearest[0]);
        for (pos, &d) in self.nearest.iter().enumerate().skip(1) {
            if d > best.1 {
                best = (pos, d);
            }
        }
        best
    }

    fn add_center(&mut self, pos: usize) {
        let ordinal = self.centers.len();
        let index = self.subset[pos];
        self.centers.push(index);
        let c = self.points.point(index);
        for (k, &i) in self.subset.iter().enumerate() {
            // Strict comparison keeps ties on the lower ordinal.
            let d = euclidean(c, self.points.point(i));
            if d < self.nearest[k] {
                self.nearest[k] = d;
                self.assignment[k] = ordinal;
            }
        }
    }

    /// Adds centers until at least `min_rounds` are chosen and the radius is
    /// at most `stop_radius`, or until every point coincides with a center.
    fn run(&mut self, min_rounds: usize, stop_radius: f64) -> f64 {
        loop {
            let (pos, radius) = self.farthest();
            if radius == 0.0 || (self.centers.len() >= min_rounds && radius <= stop_radius) {
                return radius;
            }
            self.add_center(pos);
        }
    }

    fn into_children(self, level: u32) -> Vec<CoverNode> {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); self.centers.len()];
        for (k, &i) in self.subset.iter().enumerate() {
            groups[self.assignment[k]].push(i);
        }
        self.centers
            .iter()
            .zip(groups)
            .map(|(&center, members)| CoverNode::from_members(self.points, center, members, level))
            .collect()
    }
}

fn seed_position(subset: &[usize], seed_index: usize) -> Result<usize> {
    subset
        .iter()
        .position(|&i| i == seed_index)
        .ok_or_else(|| EmdError::InvalidArgument(format!("seed {seed_index} is not in the subset")))
}

/// Gonzalez's k-center traversal on `subset`, starting from `seed_index`.
///
/// Stops after `k` centers or as soon as every point coincides with a
/// center.
pub fn gonzalez<P: PointSource>(points: &P, subset: &[usize], k: usize, seed_index: usize) -> Result<GonzalezRun> {
    if subset.is_empty() {
        return Err(EmdError::EmptySet);
    }
    if k == 0 {
        return Err(EmdError::InvalidArgument("k must be positive".into()));
    }
    let seed_pos = seed_position(subset, seed_index)?;
    let mut t = Traversal::new(points, subset, seed_pos);
    // With k rounds as the only stopping rule, the stop radius is irrelevant.
    let achieved_radius = t.run(k, f64::INFINITY);
    Ok(GonzalezRun {
        centers: t.centers,
        assignment: t.assignment,
        achieved_radius,
    })
}

fn check_splittable(node: &CoverNode) -> Result<()> {
    if node.is_leaf {
        Err(EmdError::InvalidArgument("cannot split a leaf node".into()))
    } else {
        Ok(())
    }
}

fn fixed_rounds(rho: u32) -> Result<usize> {
    if rho == 0 || rho > MAX_RHO {
        return Err(EmdError::InvalidArgument(format!(
            "rho must be in 1..={MAX_RHO}, got {rho}"
        )));
    }
    Ok(1usize << (2 * rho))
}

fn split<P: PointSource>(points: &P, node: &CoverNode, min_rounds: usize, stop_radius: f64) -> Vec<CoverNode> {
    let seed_pos = node
        .members
        .iter()
        .position(|&i| i == node.center)
        .expect("node center is one of its members");
    let mut t = Traversal::new(points, &node.members, seed_pos);
    t.run(min_rounds, stop_radius);
    t.into_children(node.level + 1)
}

/// Splits `node` into clusters of radius at most `target`, adding one
/// Gonzalez center at a time. The first child keeps the node's center.
pub fn split_adaptive<P: PointSource>(points: &P, node: &CoverNode, target: f64) -> Result<Vec<CoverNode>> {
    check_splittable(node)?;
    if !(target > 0.0) {
        return Err(EmdError::InvalidArgument(format!("target radius must be positive, got {target}")));
    }
    Ok(split(points, node, 1, target))
}

/// Splits `node` with exactly `4^rho` Gonzalez rounds (fewer only when the
/// points run out), regardless of the resulting radius.
pub fn split_fixed_rho<P: PointSource>(points: &P, node: &CoverNode, rho: u32) -> Result<Vec<CoverNode>> {
    check_splittable(node)?;
    let rounds = fixed_rounds(rho)?;
    Ok(split(points, node, rounds, f64::INFINITY))
}

/// Builds level `current.level + 1` with every ball of radius at most
/// `target`.
///
/// Leaves are carried over unchanged. In [`SplitMode::Fixed`] each node gets
/// at least `4^rho` rounds; if that is not enough to reach `target` (the
/// supplied `rho` underestimates the data) the traversal continues until it
/// is, so the covering guarantee holds in both modes.
pub fn next_level<P: PointSource>(points: &P, current: &CoverLevel, target: f64, mode: SplitMode) -> Result<CoverLevel> {
    if !(target > 0.0) || target >= current.target_radius {
        return Err(EmdError::InvalidArgument(format!(
            "target radius {target} must be positive and below {}",
            current.target_radius
        )));
    }
    let min_rounds = match mode {
        SplitMode::Adaptive => 1,
        SplitMode::Fixed { rho } => fixed_rounds(rho)?,
    };
    let mut nodes = Vec::with_capacity(current.nodes.len());
    for node in &current.nodes {
        if node.is_leaf {
            nodes.push(node.clone());
        } else {
            nodes.extend(split(points, node, min_rounds, target));
        }
    }
    Ok(CoverLevel {
        level: current.level + 1,
        nodes,
        target_radius: target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WeightedPointSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> WeightedPointSet {
        WeightedPointSet::uniform(xs.to_vec(), 1).unwrap()
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> WeightedPointSet {
        let coords = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        WeightedPointSet::uniform(coords, d).unwrap()
    }

    fn assert_partition(level: &CoverLevel, n: usize) {
        let mut seen = vec![false; n];
        for node in &level.nodes {
            assert!(node.members.contains(&node.center));
            for &m in &node.members {
                assert!(!seen[m], "index {m} appears twice");
                seen[m] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    fn assert_covering<P: PointSource>(points: &P, level: &CoverLevel) {
        for node in &level.nodes {
            let c = points.point(node.center);
            for &m in &node.members {
                let d = euclidean(c, points.point(m));
                assert!(d <= node.radius_bound);
                assert!(d <= level.target_radius, "{d} > {}", level.target_radius);
            }
        }
    }

    #[test]
    fn two_center_line() {
        let pts = line(&[0.0, 1.0, 2.0, 10.0]);
        let run = gonzalez(&pts, &[0, 1, 2, 3], 2, 0).unwrap();
        assert_eq!(run.centers, vec![0, 3]);
        assert_eq!(run.assignment, vec![0, 0, 0, 1]);
        assert_eq!(run.achieved_radius, 2.0);
    }

    #[test]
    fn three_center_line() {
        let pts = line(&[0.0, 1.0, 2.0, 10.0]);
        let run = gonzalez(&pts, &[0, 1, 2, 3], 3, 0).unwrap();
        assert_eq!(run.centers, vec![0, 3, 2]);
        assert_eq!(run.achieved_radius, 1.0);
        // Point 1 is equidistant from centers 0 and 2: lowest ordinal wins.
        assert_eq!(run.assignment, vec![0, 0, 2, 1]);
    }

    #[test]
    fn gonzalez_stops_when_points_run_out() {
        let pts = line(&[0.0, 0.0, 3.0]);
        let run = gonzalez(&pts, &[0, 1, 2], 10, 0).unwrap();
        assert_eq!(run.centers, vec![0, 2]);
        assert_eq!(run.achieved_radius, 0.0);
    }

    #[test]
    fn gonzalez_rejects_bad_arguments() {
        let pts = line(&[0.0, 1.0]);
        assert!(gonzalez(&pts, &[], 1, 0).is_err());
        assert!(gonzalez(&pts, &[0, 1], 0, 0).is_err());
        assert!(gonzalez(&pts, &[1], 1, 0).is_err());
    }

    #[test]
    fn gonzalez_two_approximation_certificate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_set(&mut rng, 200, 8);
        let subset: Vec<usize> = (0..200).collect();
        let run = gonzalez(&pts, &subset, 16, 0).unwrap();
        assert_eq!(run.centers.len(), 16);
        let mut min_pair = f64::INFINITY;
        for (a, &i) in run.centers.iter().enumerate() {
            for &j in &run.centers[a + 1..] {
                min_pair = min_pair.min(euclidean(pts.point(i), pts.point(j)));
            }
        }
        // Any 16-center solution must put two of these 17 points (centers plus
        // the farthest remaining point) in one ball, so OPT >= min_pair / 2.
        assert!(run.achieved_radius <= min_pair);
        assert!(run.achieved_radius <= 2.0 * (min_pair / 2.0));
        // Recompute the radius from the assignment.
        let measured = subset
            .iter()
            .zip(&run.assignment)
            .map(|(&i, &c)| euclidean(pts.point(i), pts.point(run.centers[c])))
            .fold(0.0, f64::max);
        assert_eq!(measured, run.achieved_radius);
    }

    #[test]
    fn adaptive_split_on_line() {
        let pts = line(&[0.0, 1.0, 2.0, 10.0]);
        let root = CoverLevel::root(&pts, 0).unwrap();
        let children = split_adaptive(&pts, &root.nodes[0], 2.0).unwrap();
        assert_eq!(children.len(), 2);
        assert_eq!(children[0].members, vec![0, 1, 2]);
        assert_eq!(children[0].center, 0);
        assert_eq!(children[0].radius_bound, 2.0);
        assert_eq!(children[1].members, vec![3]);
        assert!(children[1].is_leaf);
        assert!(children.iter().all(|c| c.level == 1));
    }

    #[test]
    fn adaptive_split_covers_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let radius = 3.0;
        let coords: Vec<f64> = (0..300)
            .flat_map(|_| loop {
                let p = [rng.gen_range(-radius..radius), rng.gen_range(-radius..radius)];
                if p[0] * p[0] + p[1] * p[1] <= radius * radius {
                    break p;
                }
            })
            .collect();
        let pts = WeightedPointSet::uniform(coords, 2).unwrap();
        let root = CoverLevel::root(&pts, 0).unwrap();
        let children = split_adaptive(&pts, &root.nodes[0], radius / 2.0).unwrap();
        // Centers are pairwise more than R/2 apart, so disjoint discs of
        // radius R/4 around them fit in a disc of radius 5R/4: at most 25.
        assert!(children.len() <= 25, "{} children", children.len());
        let level = CoverLevel {
            level: 1,
            nodes: children,
            target_radius: radius / 2.0,
        };
        assert_partition(&level, 300);
        assert_covering(&pts, &level);
    }

    #[test]
    fn fixed_split_runs_all_rounds() {
        let pts = line(&[0.0, 1.0, 2.0, 10.0]);
        let root = CoverLevel::root(&pts, 0).unwrap();
        let children = split_fixed_rho(&pts, &root.nodes[0], 1).unwrap();
        assert_eq!(children.len(), 4);
        assert!(children.iter().all(|c| c.radius_bound == 0.0 && c.is_leaf));
    }

    #[test]
    fn fixed_split_halves_low_dimensional_ball() {
        // Points on a segment embedded in R^3 have doubling dimension 1.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let coords: Vec<f64> = (0..400)
            .flat_map(|_| {
                let t: f64 = rng.gen_range(-1.0..1.0);
                [t, 2.0 * t, -t]
            })
            .collect();
        let pts = WeightedPointSet::uniform(coords, 3).unwrap();
        let delta = 6f64.sqrt();
        let root = CoverLevel::root(&pts, 0).unwrap();
        let children = split_fixed_rho(&pts, &root.nodes[0], 1).unwrap();
        assert!(children.iter().all(|c| c.radius_bound <= delta / 2.0));
    }

    #[test]
    fn split_rejects_leaves_and_bad_rho() {
        let pts = line(&[0.0, 1.0]);
        let leaf = CoverNode {
            center: 0,
            members: vec![0],
            level: 1,
            radius_bound: 0.0,
            is_leaf: true,
        };
        assert!(split_fixed_rho(&pts, &leaf, 1).is_err());
        assert!(split_adaptive(&pts, &leaf, 1.0).is_err());
        let root = CoverLevel::root(&pts, 0).unwrap();
        assert!(split_fixed_rho(&pts, &root.nodes[0], 0).is_err());
        assert!(split_fixed_rho(&pts, &root.nodes[0], MAX_RHO + 1).is_err());
        assert!(split_adaptive(&pts, &root.nodes[0], 0.0).is_err());
    }

    #[test]
    fn all_leaf_level_is_carried_forward() {
        let pts = line(&[0.0, 4.0]);
        let level = CoverLevel {
            level: 3,
            nodes: vec![
                CoverNode {
                    center: 0,
                    members: vec![0],
                    level: 2,
                    radius_bound: 0.0,
                    is_leaf: true,
                },
                CoverNode {
                    center: 1,
                    members: vec![1],
                    level: 3,
                    radius_bound: 0.0,
                    is_leaf: true,
                },
            ],
            target_radius: 1.0,
        };
        let next = next_level(&pts, &level, 0.5, SplitMode::Adaptive).unwrap();
        assert_eq!(next.nodes, level.nodes);
        assert_eq!(next.target_radius, 0.5);
        assert_eq!(next.level, 4);
    }

    #[test]
    fn line_through_three_levels() {
        let pts = line(&[0.0, 1.0, 2.0, 10.0]);
        let mut level = CoverLevel::root(&pts, 0).unwrap();
        let mut target = 10.0;
        for _ in 0..3 {
            let next = next_level(&pts, &level, target, SplitMode::Adaptive).unwrap();
            assert_partition(&next, 4);
            assert_covering(&pts, &next);
            level = next;
            target /= 2.0;
        }
        // 10 → 5 → 2.5: {0,1,2} stays together until radius 2.5.
        assert_eq!(level.nodes.len(), 2);
    }

    #[test]
    fn random_levels_partition_and_cover() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts = random_set(&mut rng, 2000, 4);
        let (delta, _) = crate::geometry::approx_radius(&pts);
        let mut level = CoverLevel::root(&pts, 0).unwrap();
        let mut leaves_seen: Vec<CoverNode> = Vec::new();
        for i in 1..=6 {
            let target = delta / 2f64.powi(i - 1);
            level = next_level(&pts, &level, target, SplitMode::Adaptive).unwrap();
            assert_partition(&level, 2000);
            assert_covering(&pts, &level);
            for leaf in &leaves_seen {
                assert!(level.nodes.contains(leaf));
            }
            leaves_seen = level.nodes.iter().filter(|n| n.is_leaf).cloned().collect();
        }
    }

    #[test]
    fn fixed_mode_still_meets_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let pts = random_set(&mut rng, 500, 6);
        let (delta, _) = crate::geometry::approx_radius(&pts);
        let mut level = CoverLevel::root(&pts, 0).unwrap();
        for i in 1..=4 {
            level = next_level(&pts, &level, delta / 2f64.powi(i - 1), SplitMode::Fixed { rho: 1 }).unwrap();
            assert_partition(&level, 500);
            assert_covering(&pts, &level);
        }
    }

    #[test]
    fn next_level_rejects_non_decreasing_target() {
        let pts = line(&[0.0, 1.0]);
        let root = CoverLevel::root(&pts, 0).unwrap();
        let one = next_level(&pts, &root, 1.0, SplitMode::Adaptive).unwrap();
        assert!(next_level(&pts, &one, 1.0, SplitMode::Adaptive).is_err());
        assert!(next_level(&pts, &one, -1.0, SplitMode::Adaptive).is_err());
    }

    #[test]
    fn duplicate_points_become_leaves() {
        let pts = line(&[2.0, 2.0, 2.0]);
        let root = CoverLevel::root(&pts, 0).unwrap();
        assert!(root.nodes[0].is_leaf);
    }

    #[test]
    fn csv_dump() {
        let pts = line(&[0.0, 1.0, 2.0, 10.0]);
        let root = CoverLevel::root(&pts, 0).unwrap();
        let level = next_level(&pts, &root, 2.0, SplitMode::Adaptive).unwrap();
        let mut buf = Vec::new();
        level.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "level,node_id,center_index,member_count,radius_bound\n1,0,0,3,2\n1,1,3,1,0\n"
        );
    }
}
