use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cost::Block;
use super::plan::BlockPlan;
use super::problem::TransportProblem;

const SAVING_TOL: f64 = 1e-9;

/// A cycle of support pairs whose cyclic reassignment lowers the cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub block: Block,
    /// `(global source, global target)` pairs of the cycle.
    pub pairs: Vec<(usize, usize)>,
    pub saving: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub cycles_checked: usize,
    pub violations: usize,
    pub worst_saving: f64,
    pub examples: Vec<Violation>,
}

fn saving(p: &TransportProblem, pairs: &[(usize, usize)]) -> f64 {
    let k = pairs.len();
    let current: f64 = pairs.iter().map(|&(i, j)| p.cost(i, j)).sum();
    let shifted: f64 = (0..k).map(|t| p.cost(pairs[t].0, pairs[(t + 1) % k].1)).sum();
    current - shifted
}

/// Samples cycles of length `2..=maxlen` within each block's support and
/// reports those whose reassignment saves more than `1e-9`. The `samples`
/// budget is spread round-robin over blocks with at least two pairs.
pub fn check_cyclical_monotonicity(
    plan: &BlockPlan,
    p: &TransportProblem,
    maxlen: usize,
    samples: usize,
    seed: u64,
) -> MonotonicityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let supports: Vec<(Block, Vec<(usize, usize)>)> = Block::ALL
        .into_iter()
        .map(|b| {
            let pairs = plan
                .global_entries(p)
                .filter(|e| e.0 == b && e.3 > 0.0)
                .map(|e| (e.1, e.2))
                .collect::<Vec<_>>();
            (b, pairs)
        })
        .filter(|(_, s)| s.len() >= 2)
        .collect();
    let mut report = MonotonicityReport {
        cycles_checked: 0,
        violations: 0,
        worst_saving: 0.0,
        examples: Vec::new(),
    };
    if supports.is_empty() || maxlen < 2 {
        return report;
    }
    for s in 0..samples {
        let (block, support) = &supports[s % supports.len()];
        let len = rng.gen_range(2..=maxlen.min(support.len()));
        let pick = sample(&mut rng, support.len(), len);
        let pairs: Vec<(usize, usize)> = pick.iter().map(|k| support[k]).collect();
        let gain = saving(p, &pairs);
        report.cycles_checked += 1;
        if gain > SAVING_TOL {
            report.violations += 1;
            report.worst_saving = report.worst_saving.max(gain);
            if report.examples.len() < 10 {
                report.examples.push(Violation {
                    block: *block,
                    pairs,
                    saving: gain,
                });
            }
        }
    }
    report
}

/// Checks every pair of support entries of the whole plan, across blocks,
/// for a profitable swap under the block costs.
pub fn exhaustive_two_cycles(plan: &BlockPlan, p: &TransportProblem) -> MonotonicityReport {
    let support: Vec<(Block, usize, usize)> = plan
        .global_entries(p)
        .filter(|e| e.3 > 0.0)
        .map(|e| (e.0, e.1, e.2))
        .collect();
    let mut report = MonotonicityReport {
        cycles_checked: 0,
        violations: 0,
        worst_saving: 0.0,
        examples: Vec::new(),
    };
    for a in 0..support.len() {
        for b in (a + 1)..support.len() {
            let pairs = [(support[a].1, support[a].2), (support[b].1, support[b].2)];
            let gain = saving(p, &pairs);
            report.cycles_checked += 1;
            if gain > SAVING_TOL {
                report.violations += 1;
                report.worst_saving = report.worst_saving.max(gain);
                if report.examples.len() < 10 {
                    report.examples.push(Violation {
                        block: support[a].0,
                        pairs: pairs.to_vec(),
                        saving: gain,
                    });
                }
            }
        }
    }
    report
}
