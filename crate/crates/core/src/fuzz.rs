//! Deterministic random-network generation for stress tests and benchmarks.
//! The same seed and configuration always produce the same network.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{EntityId, IdrExpression};
use crate::network::{EdgeClass, EdgeDecl, EntityDecl, EntityKind, JointNetwork};

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    /// Inclusive range for the number of buses.
    pub buses: (usize, usize),
    /// Inclusive range for the number of communication node entities.
    pub comm: (usize, usize),
    /// Inclusive range for the number of coupling node entities (RTUs, PMUs).
    pub coupling: (usize, usize),
    /// Expected number of pp edges beyond the spanning tree.
    pub extra_pp_edges: f64,
    /// Chance that a pp edge carries a bound line/transformer entity.
    pub bound_line_prob: f64,
    /// Chance that a pc edge carries a bound power-supply-line entity.
    pub bound_psl_prob: f64,
    /// Chance that a non-generator node entity gets an IDR.
    pub idr_prob: f64,
    pub max_idr_depth: usize,
    pub max_idr_fanout: usize,
    /// Whether generated IDRs may use the new-XOR connective.
    pub allow_xor: bool,
    pub gen_prob: f64,
    pub pmu_prob: f64,
}

impl FuzzConfig {
    /// At most ten node entities; all three connectives.
    pub fn small() -> Self {
        FuzzConfig {
            buses: (2, 6),
            comm: (0, 3),
            coupling: (0, 1),
            extra_pp_edges: 1.0,
            bound_line_prob: 0.15,
            bound_psl_prob: 0.2,
            idr_prob: 0.75,
            max_idr_depth: 3,
            max_idr_fanout: 3,
            allow_xor: true,
            gen_prob: 0.35,
            pmu_prob: 0.3,
        }
    }

    /// Twelve or more node entities, for candidate-count comparisons.
    pub fn medium() -> Self {
        FuzzConfig {
            buses: (9, 13),
            comm: (3, 5),
            coupling: (0, 2),
            extra_pp_edges: 3.0,
            bound_line_prob: 0.1,
            bound_psl_prob: 0.15,
            idr_prob: 0.7,
            max_idr_depth: 3,
            max_idr_fanout: 3,
            allow_xor: true,
            gen_prob: 0.5,
            pmu_prob: 0.45,
        }
    }

    /// Binary-mode networks: min-AND / max-OR only.
    pub fn without_xor(mut self) -> Self {
        self.allow_xor = false;
        self
    }
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

/// Generates a structurally valid network from a seed.
pub fn random_network(seed: u64, cfg: &FuzzConfig) -> JointNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_buses = range(&mut rng, cfg.buses);
    let n_comm = range(&mut rng, cfg.comm);
    let n_coupling = range(&mut rng, cfg.coupling);

    let mut entities: BTreeMap<EntityId, EntityDecl> = BTreeMap::new();
    let mut edges: Vec<EdgeDecl> = Vec::new();

    let buses: Vec<EntityId> = (1..=n_buses)
        .map(|i| EntityId::new(format!("P{i}")))
        .collect();
    for id in &buses {
        let mut decl = EntityDecl::of_kind(EntityKind::Bus);
        decl.is_generator = rng.random_bool(cfg.gen_prob);
        decl.has_pmu = rng.random_bool(cfg.pmu_prob);
        entities.insert(id.clone(), decl);
    }

    let comm_kinds = [
        EntityKind::SubstationEntity,
        EntityKind::SonetRingEntity,
        EntityKind::DwdmRingEntity,
    ];
    let comms: Vec<EntityId> = (1..=n_comm)
        .map(|i| EntityId::new(format!("C{i}")))
        .collect();
    for (i, id) in comms.iter().enumerate() {
        entities.insert(
            id.clone(),
            EntityDecl::of_kind(comm_kinds[i % comm_kinds.len()]),
        );
    }
    let coupling_kinds = [EntityKind::Rtu, EntityKind::PmuDevice];
    let couplings: Vec<EntityId> = (1..=n_coupling)
        .map(|i| EntityId::new(format!("R{i}")))
        .collect();
    for (i, id) in couplings.iter().enumerate() {
        entities.insert(
            id.clone(),
            EntityDecl::of_kind(coupling_kinds[i % coupling_kinds.len()]),
        );
    }

    // Power spine: a random tree plus a few chords.
    let mut bound_counter = 0usize;
    let mut pp_seen: BTreeSet<(EntityId, EntityId)> = BTreeSet::new();
    let mut push_pp = |rng: &mut ChaCha8Rng,
                       a: &EntityId,
                       b: &EntityId,
                       entities: &mut BTreeMap<EntityId, EntityDecl>,
                       edges: &mut Vec<EdgeDecl>,
                       bound_counter: &mut usize| {
        let key = if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        if a == b || !pp_seen.insert(key) {
            return;
        }
        let bound = if rng.random_bool(cfg.bound_line_prob) {
            *bound_counter += 1;
            let id = EntityId::new(format!("T{bound_counter}"));
            let kind = if rng.random_bool(0.5) {
                EntityKind::TransmissionLine
            } else {
                EntityKind::Transformer
            };
            entities.insert(id.clone(), EntityDecl::of_kind(kind));
            Some(id)
        } else {
            None
        };
        edges.push(EdgeDecl::new(EdgeClass::Pp, a.clone(), b.clone(), bound));
    };
    for i in 1..n_buses {
        let j = rng.random_range(0..i);
        push_pp(
            &mut rng,
            &buses[i].clone(),
            &buses[j].clone(),
            &mut entities,
            &mut edges,
            &mut bound_counter,
        );
    }
    if n_buses >= 2 {
        let extra = rng.random_range(0..=(2.0 * cfg.extra_pp_edges) as usize);
        for _ in 0..extra {
            let i = rng.random_range(0..n_buses);
            let j = rng.random_range(0..n_buses);
            push_pp(
                &mut rng,
                &buses[i].clone(),
                &buses[j].clone(),
                &mut entities,
                &mut edges,
                &mut bound_counter,
            );
        }
    }

    // Couple every communication-side node to the power layer and to peers.
    let mut psl_counter = 0usize;
    let comm_side: Vec<EntityId> = comms.iter().chain(couplings.iter()).cloned().collect();
    for (i, c) in comm_side.iter().enumerate() {
        if n_buses > 0 && rng.random_bool(0.85) {
            let b = rng.random_range(0..n_buses);
            let bound = if rng.random_bool(cfg.bound_psl_prob) {
                psl_counter += 1;
                let id = EntityId::new(format!("L{psl_counter}"));
                entities.insert(id.clone(), EntityDecl::of_kind(EntityKind::PowerSupplyLine));
                Some(id)
            } else {
                None
            };
            edges.push(EdgeDecl::new(
                EdgeClass::Pc,
                buses[b].clone(),
                c.clone(),
                bound,
            ));
        }
        if i > 0 && rng.random_bool(0.6) {
            let j = rng.random_range(0..i);
            if comm_side[j] != *c {
                edges.push(EdgeDecl::new(
                    EdgeClass::Cc,
                    comm_side[j].clone(),
                    c.clone(),
                    None,
                ));
            }
        }
    }
    edges.sort();
    edges.dedup();

    // IDRs over every declared entity except the target itself.
    let all_ids: Vec<EntityId> = entities.keys().cloned().collect();
    let mut idrs: BTreeMap<EntityId, IdrExpression> = BTreeMap::new();
    for id in &all_ids {
        let decl = &entities[id];
        if decl.is_generator || !rng.random_bool(cfg.idr_prob) {
            continue;
        }
        let pool: Vec<EntityId> = all_ids.iter().filter(|x| *x != id).cloned().collect();
        if pool.is_empty() {
            continue;
        }
        let depth = rng.random_range(1..=cfg.max_idr_depth);
        idrs.insert(id.clone(), random_expr(&mut rng, &pool, depth, cfg));
    }

    let net = JointNetwork::new(entities, idrs, edges);
    debug_assert!(net.is_valid(), "generated network must validate");
    net
}

/// Random expression over the pool; `depth` 0 yields a single reference.
pub fn random_expr(
    rng: &mut ChaCha8Rng,
    pool: &[EntityId],
    depth: usize,
    cfg: &FuzzConfig,
) -> IdrExpression {
    if depth == 0 || pool.len() == 1 || rng.random_bool(0.3) {
        let i = rng.random_range(0..pool.len());
        return IdrExpression::Entity(pool[i].clone());
    }
    let fanout = rng.random_range(2..=cfg.max_idr_fanout.max(2));
    let children: Vec<IdrExpression> = (0..fanout)
        .map(|_| random_expr(rng, pool, depth - 1, cfg))
        .collect();
    let connective = if cfg.allow_xor {
        rng.random_range(0..3)
    } else {
        rng.random_range(0..2)
    };
    match connective {
        0 => IdrExpression::MinAnd(children),
        1 => IdrExpression::MaxOr(children),
        _ => IdrExpression::NewXor(children),
    }
}
