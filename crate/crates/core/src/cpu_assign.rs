//! Minimum-cost CPU sizing for a fixed placement.
//!
//! Each placed instance `i` is an M/M/1-PS queue with processing delay `w_i / (a_i - b_i)`,
//! where `b_i = r_cpu * load` and `w_i` is the share of the flow it serves (1 without
//! replication). The problem
//!
//! ```text
//! min  sum c_i a_i   s.t.  sum w_i / (a_i - b_i) <= T,   a_i > b_i,   sum_{i on n} a_i <= cap_n
//! ```
//!
//! has the closed-form solution `a_i = b_i + sqrt(w_i / c_i) * S / T` with
//! `S = sum_j sqrt(w_j c_j)`. Instances sharing a node share that node's residual; since they
//! also share its unit cost, a node behaves as a single queue of weight `(sum sqrt w_i)^2`
//! whose spare capacity is split proportionally to `sqrt w_i`. Node caps are handled by
//! clamping violators to their cap and re-solving the rest with the leftover budget.

use thiserror::Error;

use crate::model::VnfId;

/// Spare CPU given to each instance when the request has no delay target.
pub const STABILITY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CpuInstance {
    pub vnf: VnfId,
    /// Position along the chain, used for deterministic tie-breaking.
    pub position: usize,
    /// Node group index into [`CpuProblem::caps`].
    pub group: usize,
    pub unit_cost: f64,
    /// `r_cpu * load`: CPU below which the queue is unstable.
    pub base: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpuProblem {
    pub instances: Vec<CpuInstance>,
    /// Residual CPU of each node group.
    pub caps: Vec<f64>,
    /// Network delay already spent (ms).
    pub network_delay: f64,
    /// End-to-end delay target (ms); infinite when absent.
    pub max_delay: f64,
}

impl CpuProblem {
    /// Unweighted problem with one node per instance.
    pub fn simple(costs: &[f64], bases: &[f64], caps: &[f64], budget: f64) -> Self {
        let instances = costs
            .iter()
            .zip(bases)
            .enumerate()
            .map(|(i, (&c, &b))| CpuInstance {
                vnf: VnfId(format!("v{i}")),
                position: i,
                group: i,
                unit_cost: c,
                base: b,
                weight: 1.0,
            })
            .collect();
        Self {
            instances,
            caps: caps.to_vec(),
            network_delay: 0.0,
            max_delay: budget,
        }
    }

    pub fn budget(&self) -> f64 {
        self.max_delay - self.network_delay
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpuSolution {
    pub cpu: Vec<f64>,
    pub processing_delay: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpuError {
    #[error("network delay {network_delay} ms leaves no processing budget under {max_delay} ms")]
    Delay { network_delay: f64, max_delay: f64 },
    #[error("node group {group} cannot host its instances within the delay budget")]
    Capacity { group: usize },
}

impl CpuError {
    pub fn is_capacity(&self) -> bool {
        matches!(self, CpuError::Capacity { .. })
    }
}

struct Group {
    cost: f64,
    base: f64,
    /// `(sum sqrt w_i)^2`
    weight: f64,
    sqrt_sum: f64,
    spare_cap: f64,
}

fn groups(p: &CpuProblem) -> Vec<Option<Group>> {
    let mut gs: Vec<Option<Group>> = (0..p.caps.len()).map(|_| None).collect();
    for inst in &p.instances {
        let g = gs[inst.group].get_or_insert(Group {
            cost: inst.unit_cost.max(1e-12),
            base: 0.0,
            weight: 0.0,
            sqrt_sum: 0.0,
            spare_cap: 0.0,
        });
        g.base += inst.base;
        g.sqrt_sum += inst.weight.sqrt();
    }
    for (gi, g) in gs.iter_mut().enumerate() {
        if let Some(g) = g {
            g.weight = g.sqrt_sum * g.sqrt_sum;
            g.spare_cap = p.caps[gi] - g.base;
        }
    }
    gs
}

pub fn solve(p: &CpuProblem) -> Result<CpuSolution, CpuError> {
    let budget = p.budget();
    if !(budget > 0.0) {
        return Err(CpuError::Delay {
            network_delay: p.network_delay,
            max_delay: p.max_delay,
        });
    }
    let gs = groups(p);
    for (gi, g) in gs.iter().enumerate() {
        if let Some(g) = g {
            if !(g.spare_cap > 0.0) {
                return Err(CpuError::Capacity { group: gi });
            }
        }
    }

    // Spare CPU per group, above the stability baseline.
    let mut spare: Vec<f64> = vec![0.0; gs.len()];
    if budget.is_infinite() {
        for (gi, g) in gs.iter().enumerate() {
            if let Some(g) = g {
                spare[gi] = (STABILITY_MARGIN * g.base.max(1.0)).min(g.spare_cap / 2.0);
            }
        }
    } else {
        let mut capped = vec![false; gs.len()];
        loop {
            let left = budget
                - gs.iter()
                    .enumerate()
                    .filter(|(gi, _)| capped[*gi])
                    .map(|(_, g)| g.as_ref().map_or(0.0, |g| g.weight / g.spare_cap))
                    .sum::<f64>();
            let active: Vec<usize> = (0..gs.len())
                .filter(|&gi| gs[gi].is_some() && !capped[gi])
                .collect();
            if active.is_empty() {
                if left < -1e-12 * budget {
                    return Err(CpuError::Capacity {
                        group: capped.iter().position(|c| *c).unwrap_or(0),
                    });
                }
                break;
            }
            if !(left > 0.0) {
                let gi = active[0];
                return Err(CpuError::Capacity { group: gi });
            }
            let s: f64 = active
                .iter()
                .map(|&gi| gs[gi].as_ref().map_or(0.0, |g| (g.weight * g.cost).sqrt()))
                .sum();
            let mut violated = false;
            for &gi in &active {
                let g = gs[gi].as_ref().expect("active group");
                let x = (g.weight / g.cost).sqrt() * s / left;
                if x > g.spare_cap {
                    capped[gi] = true;
                    violated = true;
                } else {
                    spare[gi] = x;
                }
            }
            if !violated {
                break;
            }
        }
        for (gi, g) in gs.iter().enumerate() {
            if let (true, Some(g)) = (capped[gi], g) {
                spare[gi] = g.spare_cap;
            }
        }
    }

    let mut cpu = Vec::with_capacity(p.instances.len());
    let mut processing_delay = 0.0;
    let mut cost = 0.0;
    for inst in &p.instances {
        let g = gs[inst.group].as_ref().expect("instance group");
        let x = spare[inst.group] * inst.weight.sqrt() / g.sqrt_sum;
        let a = inst.base + x;
        processing_delay += inst.weight / x;
        cost += inst.unit_cost * a;
        cpu.push(a);
    }
    Ok(CpuSolution {
        cpu,
        processing_delay,
        cost,
    })
}

/// The VNF whose instances take longest to process at best, i.e. the largest
/// `w / (cap - base)` over all given problems when its node gives it all its spare CPU.
/// Ties go to the earliest chain position.
pub fn bottleneck_vnf<'a>(problems: impl IntoIterator<Item = &'a CpuProblem>) -> Option<VnfId> {
    let mut best: Option<(f64, usize, &VnfId)> = None;
    for p in problems {
        let gs = groups(p);
        for inst in &p.instances {
            let g = gs[inst.group].as_ref().expect("instance group");
            let time = if g.spare_cap > 0.0 {
                inst.weight / g.spare_cap
            } else {
                f64::INFINITY
            };
            let better = match best {
                None => true,
                Some((bt, bpos, _)) => time > bt || (time == bt && inst.position < bpos),
            };
            if better {
                best = Some((time, inst.position, &inst.vnf));
            }
        }
    }
    best.map(|(_, _, v)| v.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn single_instance() {
        let s = solve(&CpuProblem::simple(&[1.0], &[0.0], &[f64::INFINITY], 10.0)).unwrap();
        assert_relative_eq!(s.cpu[0], 0.1, max_relative = 1e-15);
        assert_relative_eq!(s.cost, 0.1, max_relative = 1e-15);
        assert_relative_eq!(s.processing_delay, 10.0, max_relative = 1e-15);
    }

    #[test]
    fn two_instances_match_one_dimensional_search() {
        let p = CpuProblem::simple(&[1.0, 4.0], &[0.0, 0.0], &[f64::INFINITY; 2], 3.0);
        let s = solve(&p).unwrap();
        assert_relative_eq!(s.cpu[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.cpu[1], 0.5, max_relative = 1e-12);
        assert_relative_eq!(s.cost, 3.0, max_relative = 1e-12);
        // split d0 + d1 = 3, cost 1/d0 + 4/d1, scanned on a fine grid
        let grid = (1..30000).map(|k| {
            let d0 = 3.0 * k as f64 / 30000.0;
            1.0 / d0 + 4.0 / (3.0 - d0)
        });
        let best = grid.fold(f64::INFINITY, f64::min);
        assert!(s.cost <= best + 1e-12);
        assert_relative_eq!(s.cost, best, max_relative = 1e-6);
    }

    #[test]
    fn non_positive_budget_is_a_delay_failure() {
        let mut p = CpuProblem::simple(&[1.0], &[0.0], &[1.0], 5.0);
        p.network_delay = 5.0;
        assert!(matches!(solve(&p), Err(CpuError::Delay { .. })));
    }

    #[test]
    fn exhausted_cap_is_a_capacity_failure() {
        let p = CpuProblem::simple(&[1.0, 1.0], &[0.5, 0.0], &[0.5, 10.0], 5.0);
        assert_eq!(solve(&p), Err(CpuError::Capacity { group: 0 }));
        // cap 0.3 for an instance needing >= 1/3 spare to fit 3 ms alone
        let p = CpuProblem::simple(&[1.0], &[0.0], &[0.3], 3.0);
        assert!(solve(&p).unwrap_err().is_capacity());
    }

    #[test]
    fn clamped_instance_leaves_rest_of_budget_to_others() {
        // unconstrained a = (1, 0.5); cap the first at 0.8
        let p = CpuProblem::simple(&[1.0, 4.0], &[0.0, 0.0], &[0.8, f64::INFINITY], 3.0);
        let s = solve(&p).unwrap();
        assert_relative_eq!(s.cpu[0], 0.8, max_relative = 1e-15);
        // 1/0.8 + 1/a1 = 3
        assert_relative_eq!(s.cpu[1], 1.0 / (3.0 - 1.25), max_relative = 1e-12);
        assert!((s.processing_delay - 3.0).abs() < 1e-9);
    }

    #[test]
    fn shared_node_splits_by_square_root_of_weight() {
        let mut p = CpuProblem::simple(&[2.0, 2.0], &[0.1, 0.2], &[f64::INFINITY], 4.0);
        p.instances[1].group = 0;
        p.instances[0].weight = 1.0;
        p.instances[1].weight = 4.0;
        let s = solve(&p).unwrap();
        let x0 = s.cpu[0] - 0.1;
        let x1 = s.cpu[1] - 0.2;
        assert_relative_eq!(x1 / x0, 2.0, max_relative = 1e-12);
        assert!((s.processing_delay - 4.0).abs() < 1e-9);
    }

    #[test]
    fn bottleneck_examples() {
        let p = CpuProblem::simple(&[1.0, 1.0], &[0.0, 0.0], &[0.05, 0.2], 100.0);
        assert_eq!(bottleneck_vnf([&p]), Some(VnfId::from("v0")));
        let p = CpuProblem::simple(&[1.0, 1.0], &[0.0, 0.0], &[0.2, 0.05], 100.0);
        assert_eq!(bottleneck_vnf([&p]), Some(VnfId::from("v1")));
        let p = CpuProblem::simple(&[1.0, 1.0, 1.0], &[0.0; 3], &[0.2; 3], 100.0);
        assert_eq!(bottleneck_vnf([&p]), Some(VnfId::from("v0")));
        let p = CpuProblem::simple(&[1.0, 1.0], &[0.0, 0.3], &[0.01, 0.2], 100.0);
        assert_eq!(bottleneck_vnf([&p]), Some(VnfId::from("v1")));
    }

    #[test]
    fn no_delay_target_gives_stable_minimal_cpu() {
        let s = solve(&CpuProblem::simple(&[1.0], &[2.0], &[10.0], f64::INFINITY)).unwrap();
        assert!(s.cpu[0] > 2.0 && s.cpu[0] < 2.0 + 1e-5);
    }

    fn problem() -> impl Strategy<Value = CpuProblem> {
        (1usize..=5)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(0.01f64..100.0, n),
                    prop::collection::vec(0.0f64..5.0, n),
                    0.1f64..200.0,
                )
            })
            .prop_map(|(c, b, t)| {
                let caps = vec![f64::INFINITY; c.len()];
                CpuProblem::simple(&c, &b, &caps, t)
            })
    }

    proptest! {
        #[test]
        fn uncapped_solution_meets_budget_with_equality(p in problem()) {
            let s = solve(&p).unwrap();
            prop_assert!((s.processing_delay - p.budget()).abs() <= 1e-9 * p.budget().max(1.0));
            for (a, inst) in s.cpu.iter().zip(&p.instances) {
                prop_assert!(*a > inst.base);
            }
        }

        #[test]
        fn scaling_costs_scales_cost_only(p in problem(), k in 0.01f64..100.0) {
            let s = solve(&p).unwrap();
            let mut q = p.clone();
            for i in &mut q.instances {
                i.unit_cost *= k;
            }
            let t = solve(&q).unwrap();
            prop_assert!((t.cost - k * s.cost).abs() <= 1e-9 * t.cost);
            for (a, b) in s.cpu.iter().zip(&t.cpu) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn more_budget_never_costs_more(p in problem(), extra in 0.0f64..50.0, cap in 0.5f64..20.0) {
            let mut p = p;
            for (gi, c) in p.caps.iter_mut().enumerate() {
                *c = p.instances[gi].base + cap;
            }
            let mut q = p.clone();
            q.max_delay += extra;
            match (solve(&p), solve(&q)) {
                (Ok(s), Ok(t)) => prop_assert!(t.cost <= s.cost * (1.0 + 1e-12)),
                (Ok(_), Err(e)) => prop_assert!(false, "larger budget failed: {e}"),
                _ => {}
            }
        }

        #[test]
        fn capped_solution_respects_caps_and_budget(p in problem(), frac in 0.05f64..2.0) {
            let mut p = p;
            let free = solve(&p).unwrap();
            for (gi, c) in p.caps.iter_mut().enumerate() {
                let inst = &p.instances[gi];
                *c = inst.base + frac * (free.cpu[gi] - inst.base);
            }
            if let Ok(s) = solve(&p) {
                for (gi, a) in s.cpu.iter().enumerate() {
                    prop_assert!(*a <= p.caps[gi] * (1.0 + 1e-12));
                }
                prop_assert!(s.processing_delay <= p.budget() * (1.0 + 1e-9));
            }
        }
    }
}
