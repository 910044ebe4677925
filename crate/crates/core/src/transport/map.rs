use serde::{Deserialize, Serialize};

use super::cost::Block;
use super::plan::BlockPlan;
use super::problem::TransportProblem;

const SPLIT_MASS: f64 = 1e-9;

/// Map data for one source point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    /// Block carrying the largest share of the point's mass.
    pub block: Option<Block>,
    /// Barycentre of the point's targets within that block.
    pub image: Vec<f64>,
    /// Target (global index) receiving the most mass within the block.
    pub target: Option<usize>,
    pub split: bool,
    pub mass: f64,
}

/// Barycentric projection of a plan, indexed by global source index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportMap {
    pub entries: Vec<MapEntry>,
}

impl TransportMap {
    pub fn image(&self, i: usize) -> &[f64] {
        &self.entries[i].image
    }

    pub fn any_split(&self) -> bool {
        self.entries.iter().any(|e| e.split)
    }

    pub fn split_count(&self) -> usize {
        self.entries.iter().filter(|e| e.split).count()
    }

    /// L1 distance, per block, between the pushforward of the source mass
    /// under the dominant targets and the plan's target marginals. Zero for
    /// plans without split rows.
    pub fn pushforward_error(&self, plan: &BlockPlan, p: &TransportProblem) -> f64 {
        let m = p.n_targets();
        let mut err = 0.0;
        for b in Block::ALL {
            let mut pushed = vec![0.0; m];
            let mut marginal = vec![0.0; m];
            for (_, i, j, mass) in plan.global_entries(p).filter(|e| e.0 == b) {
                marginal[j] += mass;
                let e = &self.entries[i];
                if e.block == Some(b) {
                    if let Some(t) = e.target {
                        pushed[t] += mass;
                    }
                }
            }
            err += pushed.iter().zip(&marginal).map(|(a, b)| (a - b).abs()).sum::<f64>();
        }
        err
    }
}

/// Collapses a plan to a map. Ties between blocks go to the earlier block
/// in `Block::ALL` order; ties between targets to the smaller index.
pub fn extract_map(plan: &BlockPlan, p: &TransportProblem) -> TransportMap {
    let n = p.n_sources();
    let d = p.dim();
    let mut rows: Vec<Vec<(Block, usize, f64)>> = vec![Vec::new(); n];
    for (b, i, j, mass) in plan.global_entries(p) {
        rows[i].push((b, j, mass));
    }
    let entries = rows
        .into_iter()
        .map(|row| {
            let mass: f64 = row.iter().map(|e| e.2).sum();
            let receivers = row.iter().filter(|e| e.2 > SPLIT_MASS).count();
            let mut best: Option<(Block, f64)> = None;
            for b in Block::ALL {
                let share: f64 = row.iter().filter(|e| e.0 == b).map(|e| e.2).sum();
                if share > 0.0 && best.map_or(true, |(_, s)| share > s) {
                    best = Some((b, share));
                }
            }
            match best {
                None => MapEntry {
                    block: None,
                    image: vec![f64::NAN; d],
                    target: None,
                    split: false,
                    mass,
                },
                Some((b, share)) => {
                    let mut image = vec![0.0; d];
                    let mut target: Option<(usize, f64)> = None;
                    for &(_, j, w) in row.iter().filter(|e| e.0 == b) {
                        for (k, y) in p.target_point(j).iter().enumerate() {
                            image[k] += w * y / share;
                        }
                        let better = match target {
                            None => true,
                            Some((tj, tw)) => w > tw || (w == tw && j < tj),
                        };
                        if better {
                            target = Some((j, w));
                        }
                    }
                    MapEntry {
                        block: Some(b),
                        image,
                        target: target.map(|t| t.0),
                        split: receivers > 1,
                        mass,
                    }
                }
            }
        })
        .collect();
    TransportMap { entries }
}

#[cfg(test)]
mod tests {
    use super::super::cost::CostSpec;
    use super::super::plan::SolverMeta;
    use super::super::simplex::{solve_exact, DEFAULT_CAP};
    use super::*;
    use crate::cloud::WeightedCloud;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta() -> SolverMeta {
        SolverMeta {
            kind: "manual".into(),
            iterations: 0,
            epsilon: None,
            bias_bound: None,
            marginal_error: 0.0,
        }
    }

    fn cloud(pts: &[f64], w: f64) -> WeightedCloud {
        WeightedCloud::new(1, pts.to_vec(), vec![w; pts.len()]).unwrap()
    }

    #[test]
    fn single_entry_map() {
        let p = TransportProblem::from_clouds(cloud(&[0.0], 1.0), WeightedCloud::empty(1), cloud(&[1.0], 1.0), WeightedCloud::empty(1), &CostSpec::quadratic(0.5).unwrap()).unwrap();
        let plan = BlockPlan::from_global(&p, [(0, 0, 1.0)], meta());
        let map = extract_map(&plan, &p);
        assert_eq!(map.image(0), &[1.0]);
        assert!(!map.entries[0].split);
        assert_eq!(map.entries[0].block, Some(Block::PP));
    }

    #[test]
    fn split_row_maps_to_barycentre() {
        let p = TransportProblem::from_clouds(cloud(&[1.0], 1.0), WeightedCloud::empty(1), cloud(&[0.0, 2.0], 0.5), WeightedCloud::empty(1), &CostSpec::quadratic(0.5).unwrap()).unwrap();
        let plan = BlockPlan::from_global(&p, [(0, 0, 0.5), (0, 1, 0.5)], meta());
        let map = extract_map(&plan, &p);
        assert_eq!(map.image(0), &[1.0]);
        assert!(map.entries[0].split);
        assert_eq!(map.entries[0].target, Some(0));
    }

    #[test]
    fn random_uniform_instances_have_no_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let mut pts = |k: usize| {
                let c: Vec<f64> = (0..2 * k).map(|_| rng.gen::<f64>()).collect();
                WeightedCloud::new(2, c, vec![1.0; k]).unwrap()
            };
            let p = TransportProblem::from_clouds(pts(6), pts(4), pts(5), pts(5), &CostSpec::quadratic(0.5).unwrap()).unwrap();
            let (plan, _) = solve_exact(&p, DEFAULT_CAP).unwrap();
            let map = extract_map(&plan, &p);
            assert!(!map.any_split());
            assert!(map.pushforward_error(&plan, &p) < 1e-6);
        }
    }
}
