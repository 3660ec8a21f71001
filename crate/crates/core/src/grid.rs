//! Radial feeder model with lossless linear DistFlow.
//!
//! Branch flows and squared voltages live in per-unit on the feeder base;
//! nodal injections, the PCC exchange and withdrawals are in kW / kvar and
//! are converted at the nodal balance. PCC exchange is import-positive.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vpp_lp::{LinearProgram, Sense, VarId};

use crate::der::ParkHandles;
use crate::error::{Result, VppError};
use crate::horizon::Horizon;

/// Default squared-voltage band, ±5 % around nominal.
pub const V_SQ_MIN: f64 = 0.9025;
pub const V_SQ_MAX: f64 = 1.1025;
pub const DEFAULT_POLYGON_SIDES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    /// Squared-voltage bounds in p.u.².
    pub v_min: f64,
    pub v_max: f64,
    pub is_root: bool,
    /// Peak non-dispatchable load used to scale the load profile.
    #[serde(default)]
    pub peak_load_kw: f64,
    #[serde(default)]
    pub peak_load_kvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Resistance and reactance in p.u.
    pub r: f64,
    pub x: f64,
    pub s_max_kva: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialNetwork {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub base_mva: f64,
    pub base_kv: f64,
}

/// Tree orientation of a validated network.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub root: usize,
    /// Parent-side bus of each branch.
    pub upstream: Vec<usize>,
    /// Child-side bus of each branch.
    pub downstream: Vec<usize>,
    /// Branch feeding each bus; `None` for the root.
    pub feeder_of: Vec<Option<usize>>,
    /// Branches leaving each bus toward the leaves.
    pub children: Vec<Vec<usize>>,
    /// Buses in breadth-first order from the root.
    pub order: Vec<usize>,
    pub depth: Vec<usize>,
}

impl RadialNetwork {
    pub fn base_kva(&self) -> f64 {
        self.base_mva * 1000.0
    }

    /// Checks that the branches form a tree rooted at the single PCC bus.
    pub fn validate(&self) -> Result<Topology> {
        let n = self.buses.len();
        if n == 0 {
            return Err(VppError::Network("network has no buses".into()));
        }
        if !(self.base_mva > 0.0) {
            return Err(VppError::Network("base power must be positive".into()));
        }
        for (k, b) in self.buses.iter().enumerate() {
            if b.id != k {
                return Err(VppError::Network(format!(
                    "bus ids must be 0..{n} in order, found {} at {k}",
                    b.id
                )));
            }
            if !(0.0 < b.v_min && b.v_min <= b.v_max) {
                return Err(VppError::Network(format!(
                    "bus {k} has an invalid voltage band"
                )));
            }
        }
        let roots: Vec<usize> = self
            .buses
            .iter()
            .filter(|b| b.is_root)
            .map(|b| b.id)
            .collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(VppError::Network("no root bus".into())),
            _ => return Err(VppError::Network(format!("multiple root buses {roots:?}"))),
        };
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, br) in self.branches.iter().enumerate() {
            if br.from >= n || br.to >= n || br.from == br.to {
                return Err(VppError::Network(format!(
                    "branch {k} has invalid endpoints {}-{}",
                    br.from, br.to
                )));
            }
            if !(br.r >= 0.0 && br.x >= 0.0 && br.s_max_kva > 0.0) {
                return Err(VppError::Network(format!(
                    "branch {k} needs r, x >= 0 and a positive rating"
                )));
            }
            adj[br.from].push((br.to, k));
            adj[br.to].push((br.from, k));
        }
        let m = self.branches.len();
        let mut upstream = vec![usize::MAX; m];
        let mut downstream = vec![usize::MAX; m];
        let mut feeder_of = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut depth = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        depth[root] = 0;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &(j, k) in &adj[i] {
                if feeder_of[i] == Some(k) {
                    continue;
                }
                if depth[j] != usize::MAX {
                    return Err(VppError::Network(format!("cycle through branch {k}")));
                }
                depth[j] = depth[i] + 1;
                upstream[k] = i;
                downstream[k] = j;
                feeder_of[j] = Some(k);
                children[i].push(k);
                queue.push_back(j);
            }
        }
        if order.len() != n {
            let missing = (0..n).find(|&i| depth[i] == usize::MAX).unwrap();
            return Err(VppError::Network(format!(
                "bus {missing} is disconnected from the root"
            )));
        }
        if m != n - 1 {
            return Err(VppError::Network(format!(
                "{m} branches for {n} buses is not a tree"
            )));
        }
        Ok(Topology {
            root,
            upstream,
            downstream,
            feeder_of,
            children,
            order,
            depth,
        })
    }
}

/// Half-planes `cos θ_k P + sin θ_k Q <= cos(π/K)` (per unit of the rating)
/// of the regular K-gon inscribed in the unit circle.
pub fn polygon_halfplanes(sides: usize) -> Result<Vec<(f64, f64)>> {
    if sides < 4 {
        return Err(VppError::Network(format!(
            "flow polygon needs at least 4 sides, got {sides}"
        )));
    }
    Ok((0..sides)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / sides as f64;
            (theta.cos(), theta.sin())
        })
        .collect())
}

pub fn polygon_admits(p: f64, q: f64, s_max: f64, sides: usize) -> Result<bool> {
    let apothem = s_max * (PI / sides as f64).cos();
    Ok(polygon_halfplanes(sides)?
        .iter()
        .all(|&(c, s)| c * p + s * q <= apothem))
}

#[derive(Debug, Clone)]
pub struct GridHandles {
    /// `[branch][t]`, p.u., positive away from the root.
    pub p_flow: Vec<Vec<VarId>>,
    pub q_flow: Vec<Vec<VarId>>,
    /// Squared voltage `[bus][t]`, p.u.².
    pub v: Vec<Vec<VarId>>,
    /// Net injection `[bus][t]` in kW / kvar, generation positive.
    pub p_inj: Vec<Vec<VarId>>,
    pub q_inj: Vec<Vec<VarId>>,
    /// Import from the upstream grid at the PCC, kW / kvar.
    pub pcc: Vec<VarId>,
    pub q_pcc: Vec<VarId>,
    /// Positive part of each bus's net consumption, kW.
    pub withdrawal: Vec<Vec<VarId>>,
}

/// Emits linear DistFlow for one scenario.
#[allow(clippy::too_many_arguments)]
pub fn emit_distflow(
    program: &mut LinearProgram,
    network: &RadialNetwork,
    topo: &Topology,
    park: &ParkHandles,
    load_p: &[Vec<f64>],
    load_q: &[Vec<f64>],
    horizon: &Horizon,
    polygon_sides: usize,
    tag: &str,
) -> Result<GridHandles> {
    let n = network.buses.len();
    let m = network.branches.len();
    let steps = horizon.steps;
    let base = network.base_kva();
    let planes = polygon_halfplanes(polygon_sides)?;
    let apothem = (PI / polygon_sides as f64).cos();
    let inf = f64::INFINITY;

    let mut p_flow = vec![Vec::with_capacity(steps); m];
    let mut q_flow = vec![Vec::with_capacity(steps); m];
    let mut v = vec![Vec::with_capacity(steps); n];
    let mut p_inj = vec![Vec::with_capacity(steps); n];
    let mut q_inj = vec![Vec::with_capacity(steps); n];
    let mut withdrawal = vec![Vec::with_capacity(steps); n];
    let mut pcc = Vec::with_capacity(steps);
    let mut q_pcc = Vec::with_capacity(steps);

    for t in 0..steps {
        for k in 0..m {
            p_flow[k].push(program.add_variable(-inf, inf, format!("{tag}pbr_{k}_{t}"))?);
            q_flow[k].push(program.add_variable(-inf, inf, format!("{tag}qbr_{k}_{t}"))?);
        }
        for (i, bus) in network.buses.iter().enumerate() {
            let (lo, hi) = if i == topo.root {
                (1.0, 1.0)
            } else {
                (bus.v_min, bus.v_max)
            };
            v[i].push(program.add_variable(lo, hi, format!("{tag}v_{i}_{t}"))?);
            p_inj[i].push(program.add_variable(-inf, inf, format!("{tag}pinj_{i}_{t}"))?);
            q_inj[i].push(program.add_variable(-inf, inf, format!("{tag}qinj_{i}_{t}"))?);
            withdrawal[i].push(program.add_variable(0.0, inf, format!("{tag}wit_{i}_{t}"))?);
        }
        pcc.push(program.add_variable(-inf, inf, format!("{tag}pcc_{t}"))?);
        q_pcc.push(program.add_variable(-inf, inf, format!("{tag}qpcc_{t}"))?);

        for i in 0..n {
            // Injection definition: inj - devices = -load.
            let mut terms = vec![(p_inj[i][t], 1.0)];
            let dev = park.active[i][t].clone().compact();
            terms.extend(dev.terms.iter().map(|&(x, c)| (x, -c)));
            program.add_constraint(
                terms,
                Sense::Eq,
                -load_p[i][t],
                format!("{tag}pinj_def_{i}_{t}"),
            )?;
            let mut terms = vec![(q_inj[i][t], 1.0)];
            let dev = park.reactive[i][t].clone().compact();
            terms.extend(dev.terms.iter().map(|&(x, c)| (x, -c)));
            program.add_constraint(
                terms,
                Sense::Eq,
                -load_q[i][t],
                format!("{tag}qinj_def_{i}_{t}"),
            )?;

            // Balance: inj + inflow - outflow = 0.
            let mut pt = vec![(p_inj[i][t], 1.0)];
            let mut qt = vec![(q_inj[i][t], 1.0)];
            match topo.feeder_of[i] {
                Some(k) => {
                    pt.push((p_flow[k][t], base));
                    qt.push((q_flow[k][t], base));
                }
                None => {
                    pt.push((pcc[t], 1.0));
                    qt.push((q_pcc[t], 1.0));
                }
            }
            for &k in &topo.children[i] {
                pt.push((p_flow[k][t], -base));
                qt.push((q_flow[k][t], -base));
            }
            program.add_constraint(pt, Sense::Eq, 0.0, format!("{tag}pbal_{i}_{t}"))?;
            program.add_constraint(qt, Sense::Eq, 0.0, format!("{tag}qbal_{i}_{t}"))?;

            // Withdrawal epigraph: wit >= -inj.
            program.add_constraint(
                vec![(withdrawal[i][t], 1.0), (p_inj[i][t], 1.0)],
                Sense::Ge,
                0.0,
                format!("{tag}wit_{i}_{t}"),
            )?;
        }

        for (k, br) in network.branches.iter().enumerate() {
            let (up, down) = (topo.upstream[k], topo.downstream[k]);
            program.add_constraint(
                vec![
                    (v[down][t], 1.0),
                    (v[up][t], -1.0),
                    (p_flow[k][t], 2.0 * br.r),
                    (q_flow[k][t], 2.0 * br.x),
                ],
                Sense::Eq,
                0.0,
                format!("{tag}volt_{k}_{t}"),
            )?;
            let limit = br.s_max_kva / base * apothem;
            for (side, &(c, s)) in planes.iter().enumerate() {
                let mut terms = Vec::with_capacity(2);
                if c.abs() > 1e-15 {
                    terms.push((p_flow[k][t], c));
                }
                if s.abs() > 1e-15 {
                    terms.push((q_flow[k][t], s));
                }
                program.add_constraint(
                    terms,
                    Sense::Le,
                    limit,
                    format!("{tag}smax_{k}_{side}_{t}"),
                )?;
            }
        }
    }
    Ok(GridHandles {
        p_flow,
        q_flow,
        v,
        p_inj,
        q_inj,
        pcc,
        q_pcc,
        withdrawal,
    })
}

/// Random radial feeder with `buses` nodes. Each new bus hangs off one of
/// the recent buses so feeders get both depth and laterals.
pub fn synthetic_feeder(buses: usize, seed: u64) -> Result<RadialNetwork> {
    if buses == 0 {
        return Err(VppError::Network("feeder needs at least one bus".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bus_list = (0..buses)
        .map(|id| Bus {
            id,
            v_min: V_SQ_MIN,
            v_max: V_SQ_MAX,
            is_root: id == 0,
            peak_load_kw: 0.0,
            peak_load_kvar: 0.0,
        })
        .collect();
    let mut branches = Vec::with_capacity(buses.saturating_sub(1));
    for j in 1..buses {
        let lo = j.saturating_sub(4);
        let parent = rng.random_range(lo..j);
        let rating = if parent == 0 {
            400.0
        } else {
            rng.random_range(120.0..200.0)
        };
        branches.push(Branch {
            from: parent,
            to: j,
            r: rng.random_range(0.005..0.02),
            x: rng.random_range(0.002..0.01),
            s_max_kva: rating,
        });
    }
    Ok(RadialNetwork {
        buses: bus_list,
        branches,
        base_mva: 1.0,
        base_kv: 0.4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus(id: usize, root: bool) -> Bus {
        Bus {
            id,
            v_min: V_SQ_MIN,
            v_max: V_SQ_MAX,
            is_root: root,
            peak_load_kw: 0.0,
            peak_load_kvar: 0.0,
        }
    }

    fn branch(from: usize, to: usize) -> Branch {
        Branch {
            from,
            to,
            r: 0.01,
            x: 0.01,
            s_max_kva: 100.0,
        }
    }

    #[test]
    fn two_bus_feeder_is_radial() {
        let net = RadialNetwork {
            buses: vec![bus(0, true), bus(1, false)],
            branches: vec![branch(0, 1)],
            base_mva: 1.0,
            base_kv: 0.4,
        };
        let topo = net.validate().unwrap();
        assert_eq!(topo.root, 0);
        assert_eq!(topo.feeder_of[1], Some(0));
    }

    #[test]
    fn triangle_is_rejected() {
        let net = RadialNetwork {
            buses: vec![bus(0, true), bus(1, false), bus(2, false)],
            branches: vec![branch(0, 1), branch(1, 2), branch(2, 0)],
            base_mva: 1.0,
            base_kv: 0.4,
        };
        let err = net.validate().unwrap_err().to_string();
        assert!(err.contains("cycle"), "{err}");
    }

    #[test]
    fn disconnected_and_multi_root() {
        let net = RadialNetwork {
            buses: vec![bus(0, true), bus(1, false), bus(2, false)],
            branches: vec![branch(0, 1)],
            base_mva: 1.0,
            base_kv: 0.4,
        };
        assert!(net
            .validate()
            .unwrap_err()
            .to_string()
            .contains("disconnected"));
        let net = RadialNetwork {
            buses: vec![bus(0, true), bus(1, true)],
            branches: vec![branch(0, 1)],
            base_mva: 1.0,
            base_kv: 0.4,
        };
        assert!(net.validate().unwrap_err().to_string().contains("multiple"));
    }

    #[test]
    fn branch_orientation_follows_root() {
        // branch listed child -> parent
        let net = RadialNetwork {
            buses: vec![bus(0, false), bus(1, true)],
            branches: vec![branch(0, 1)],
            base_mva: 1.0,
            base_kv: 0.4,
        };
        let topo = net.validate().unwrap();
        assert_eq!((topo.upstream[0], topo.downstream[0]), (1, 0));
    }

    #[test]
    fn synthetic_97_bus_feeder_is_radial() {
        let net = synthetic_feeder(97, 3).unwrap();
        assert_eq!(net.branches.len(), 96);
        let topo = net.validate().unwrap();
        assert!(topo.depth.iter().max().unwrap() > &3);
    }

    #[test]
    fn square_polygon_edges() {
        assert!(!polygon_admits(100.0, 0.0, 100.0, 4).unwrap());
        let inner = 100.0 * (PI / 4.0).cos();
        assert!(polygon_admits(inner, 0.0, 100.0, 4).unwrap());
        assert!(polygon_halfplanes(3).is_err());
    }

    #[test]
    fn axis_cut_approaches_rating() {
        let s = |k: usize| 100.0 * (PI / k as f64).cos();
        assert!(s(8) > 92.0 && s(64) > 99.8);
        assert!((1.0 - (PI / 8.0).cos()) < 0.08);
    }
}
