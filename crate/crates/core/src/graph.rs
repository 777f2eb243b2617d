//! Graph abstraction of a joint network for the coloring heuristic:
//! power vertices, communication vertices, per-class adjacency and a color
//! per vertex. Channel (edge-bound) entities are not vertices.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::EntityId;
use crate::network::{EdgeClass, IssueSeverity, JointNetwork, Layer, ValidationIssue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Color {
    White,
    /// Generator bus.
    Yellow,
    /// Bus with a PMU.
    Blue,
    /// Generator bus that also has a PMU.
    Green,
    /// Transient: candidate under damage evaluation.
    Pink,
    /// Selected as (part of) a contingency list entry.
    Red,
    /// Transient: pair candidate near degree-two vertices.
    Grey,
}

#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("network failed validation with {} error(s); first: {first}", .count)]
    InvalidNetwork { count: usize, first: String },
}

/// Undirected adjacency per edge class over the node entities of a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphAbstraction {
    vp: BTreeSet<EntityId>,
    vc: BTreeSet<EntityId>,
    pp: BTreeMap<EntityId, BTreeSet<EntityId>>,
    pc: BTreeMap<EntityId, BTreeSet<EntityId>>,
    cc: BTreeMap<EntityId, BTreeSet<EntityId>>,
    colors: BTreeMap<EntityId, Color>,
    base: BTreeMap<EntityId, Color>,
}

/// Builds the abstraction: vp holds power-layer node entities, vc holds
/// communication and coupling node entities; every vertex starts white.
/// Fails when the network has validation errors.
pub fn build_graph_abstraction(net: &JointNetwork) -> Result<GraphAbstraction, ModelError> {
    let errors: Vec<ValidationIssue> = net
        .validate()
        .into_iter()
        .filter(|i| i.severity == IssueSeverity::Error)
        .collect();
    if let Some(first) = errors.first() {
        return Err(ModelError::InvalidNetwork {
            count: errors.len(),
            first: first.to_string(),
        });
    }

    let mut vp = BTreeSet::new();
    let mut vc = BTreeSet::new();
    for id in net.node_ids() {
        match net.entities[&id].kind.layer() {
            Layer::Power => {
                vp.insert(id);
            }
            Layer::Comm | Layer::Coupling => {
                vc.insert(id);
            }
        }
    }

    let mut graph = GraphAbstraction {
        colors: vp
            .iter()
            .chain(vc.iter())
            .map(|id| (id.clone(), Color::White))
            .collect(),
        base: vp
            .iter()
            .chain(vc.iter())
            .map(|id| (id.clone(), Color::White))
            .collect(),
        vp,
        vc,
        pp: BTreeMap::new(),
        pc: BTreeMap::new(),
        cc: BTreeMap::new(),
    };

    for edge in &net.edges {
        graph.link(edge.class, &edge.a, &edge.b);
    }
    Ok(graph)
}

impl GraphAbstraction {
    fn link(&mut self, class: EdgeClass, a: &EntityId, b: &EntityId) {
        let adj = match class {
            EdgeClass::Pp => &mut self.pp,
            EdgeClass::Pc => &mut self.pc,
            EdgeClass::Cc => &mut self.cc,
        };
        adj.entry(a.clone()).or_default().insert(b.clone());
        adj.entry(b.clone()).or_default().insert(a.clone());
    }

    pub fn vp(&self) -> &BTreeSet<EntityId> {
        &self.vp
    }

    pub fn vc(&self) -> &BTreeSet<EntityId> {
        &self.vc
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.vp.contains(id) || self.vc.contains(id)
    }

    pub fn neighbors(&self, class: EdgeClass, id: &EntityId) -> Option<&BTreeSet<EntityId>> {
        let adj = match class {
            EdgeClass::Pp => &self.pp,
            EdgeClass::Pc => &self.pc,
            EdgeClass::Cc => &self.cc,
        };
        adj.get(id)
    }

    pub fn pp_degree(&self, id: &EntityId) -> usize {
        self.pp.get(id).map_or(0, |n| n.len())
    }

    pub fn color(&self, id: &EntityId) -> Color {
        self.colors.get(id).copied().unwrap_or(Color::White)
    }

    /// Color a vertex assigned by its bus attributes (yellow/blue/green).
    pub fn base_color(&self, id: &EntityId) -> Color {
        self.base.get(id).copied().unwrap_or(Color::White)
    }

    pub fn set_color(&mut self, id: &EntityId, color: Color) {
        if let Some(slot) = self.colors.get_mut(id) {
            *slot = color;
        }
    }

    /// Reverts every vertex currently carrying `color` to its base color.
    pub fn revert_color(&mut self, color: Color) {
        for (id, slot) in self.colors.iter_mut() {
            if *slot == color {
                *slot = self.base.get(id).copied().unwrap_or(Color::White);
            }
        }
    }

    pub fn count_color(&self, color: Color) -> usize {
        self.colors.values().filter(|&&c| c == color).count()
    }

    /// Assigns base colors from bus attributes: generator buses yellow,
    /// PMU buses blue, both green. Everything else stays white.
    pub fn classify_base_colors(&mut self, net: &JointNetwork) {
        for id in self.vp.clone() {
            let Some(decl) = net.entities.get(&id) else {
                continue;
            };
            let color = match (decl.is_generator, decl.has_pmu) {
                (true, true) => Color::Green,
                (true, false) => Color::Yellow,
                (false, true) => Color::Blue,
                (false, false) => Color::White,
            };
            self.colors.insert(id.clone(), color);
            self.base.insert(id, color);
        }
    }

    /// Power vertices with exactly one pp edge. Degrees in the pc/cc classes
    /// never contribute.
    pub fn pendant_vertices(&self) -> BTreeSet<EntityId> {
        self.vp
            .iter()
            .filter(|id| self.pp_degree(id) == 1)
            .cloned()
            .collect()
    }

    /// Power vertices with the minimum pp degree (isolated vertices form
    /// their own minimum class at degree zero).
    pub fn min_pp_degree_vertices(&self) -> BTreeSet<EntityId> {
        let min = self.vp.iter().map(|id| self.pp_degree(id)).min();
        match min {
            None => BTreeSet::new(),
            Some(min) => self
                .vp
                .iter()
                .filter(|id| self.pp_degree(id) == min)
                .cloned()
                .collect(),
        }
    }

    /// Removes vertices and all their incident adjacency.
    pub fn remove_vertices(&mut self, ids: &BTreeSet<EntityId>) {
        for id in ids {
            self.vp.remove(id);
            self.vc.remove(id);
            self.colors.remove(id);
            self.base.remove(id);
            for adj in [&mut self.pp, &mut self.pc, &mut self.cc] {
                adj.remove(id);
                for neighbors in adj.values_mut() {
                    neighbors.remove(id);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_network;
    use crate::samples;

    fn id(s: &str) -> EntityId {
        EntityId::from(s)
    }

    fn net_a_graph() -> (JointNetwork, GraphAbstraction) {
        let net = parse_network(samples::NET_A).unwrap();
        let graph = build_graph_abstraction(&net).unwrap();
        (net, graph)
    }

    #[test]
    fn fixture_abstraction() {
        let (_, graph) = net_a_graph();
        let vp: Vec<&str> = graph.vp().iter().map(|e| e.as_str()).collect();
        let vc: Vec<&str> = graph.vc().iter().map(|e| e.as_str()).collect();
        assert_eq!(vp, ["P1", "P2", "P3"]);
        assert_eq!(vc, ["C1", "C2"]);
        assert_eq!(graph.pp_degree(&id("P2")), 2);
        assert_eq!(graph.pp_degree(&id("P1")), 1);
        assert!(graph
            .neighbors(EdgeClass::Pc, &id("C1"))
            .unwrap()
            .contains(&id("P2")));
    }

    #[test]
    fn classification_from_attributes() {
        let (net, mut graph) = net_a_graph();
        graph.classify_base_colors(&net);
        assert_eq!(graph.color(&id("P1")), Color::Yellow);
        assert_eq!(graph.color(&id("P2")), Color::Blue);
        assert_eq!(graph.color(&id("P3")), Color::White);
        assert_eq!(graph.color(&id("C1")), Color::White);
    }

    #[test]
    fn green_for_generator_with_pmu() {
        let source = "[entities]\nG1 bus gen pmu\n[edges]\n[idrs]\n";
        let net = parse_network(source).unwrap();
        let mut graph = build_graph_abstraction(&net).unwrap();
        graph.classify_base_colors(&net);
        assert_eq!(graph.color(&id("G1")), Color::Green);
    }

    #[test]
    fn pendants_on_pp_subgraph_only() {
        let (_, graph) = net_a_graph();
        let pendants: Vec<String> = graph
            .pendant_vertices()
            .iter()
            .map(|e| e.to_string())
            .collect();
        assert_eq!(pendants, ["P1", "P3"]);
    }

    #[test]
    fn pc_and_cc_edges_never_affect_pendant_degree() {
        // P3 keeps pp degree 1 no matter how many couplings it carries.
        let source = "[entities]\nP1 bus\nP2 bus\nP3 bus\nC1 substation_entity\nC2 sonet_ring_entity\n[edges]\npp P1 P2\npp P2 P3\npc P3 C1\npc P3 C2\ncc C1 C2\n[idrs]\n";
        let net = parse_network(source).unwrap();
        let graph = build_graph_abstraction(&net).unwrap();
        assert!(graph.pendant_vertices().contains(&id("P3")));
    }

    #[test]
    fn cycle_has_no_pendants() {
        let source = "[entities]\nP1 bus\nP2 bus\nP3 bus\nP4 bus\n[edges]\npp P1 P2\npp P2 P3\npp P3 P4\npp P1 P4\n[idrs]\n";
        let net = parse_network(source).unwrap();
        let graph = build_graph_abstraction(&net).unwrap();
        assert!(graph.pendant_vertices().is_empty());
        assert_eq!(graph.min_pp_degree_vertices().len(), 4);
    }

    #[test]
    fn isolated_vertex_is_not_pendant() {
        let source = "[entities]\nP1 bus\nP2 bus\nP3 bus\n[edges]\npp P1 P2\n[idrs]\n";
        let net = parse_network(source).unwrap();
        let graph = build_graph_abstraction(&net).unwrap();
        assert!(!graph.pendant_vertices().contains(&id("P3")));
        // No-pendant networks fall back to the minimum degree class.
        assert_eq!(graph.min_pp_degree_vertices(), [id("P3")].into());
    }

    #[test]
    fn edge_bound_entity_is_not_a_vertex() {
        let source = "[entities]\nP1 bus\nP2 bus\nT1 line\n[edges]\npp P1 P2 entity=T1\n[idrs]\n";
        let net = parse_network(source).unwrap();
        let graph = build_graph_abstraction(&net).unwrap();
        assert!(!graph.contains(&id("T1")));
        assert!(graph.vp().contains(&id("P1")));
    }

    #[test]
    fn no_comm_layer_is_fine() {
        let source = "[entities]\nP1 bus\n[edges]\n[idrs]\n";
        let net = parse_network(source).unwrap();
        let graph = build_graph_abstraction(&net).unwrap();
        assert!(graph.vc().is_empty());
    }

    #[test]
    fn invalid_network_is_rejected() {
        let source = "[entities]\nP1 bus\nC1 substation_entity\n[edges]\npp P1 C1\n[idrs]\n";
        let net = parse_network(source).unwrap();
        assert!(build_graph_abstraction(&net).is_err());
    }

    #[test]
    fn declaration_order_does_not_matter() {
        let a = "[entities]\nP1 bus gen\nP2 bus\n[edges]\npp P1 P2\n[idrs]\n";
        let b = "[entities]\nP2 bus\nP1 bus gen\n[edges]\npp P2 P1\n[idrs]\n";
        let ga = build_graph_abstraction(&parse_network(a).unwrap()).unwrap();
        let gb = build_graph_abstraction(&parse_network(b).unwrap()).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn revert_color_restores_base() {
        let (net, mut graph) = net_a_graph();
        graph.classify_base_colors(&net);
        graph.set_color(&id("P1"), Color::Pink);
        graph.set_color(&id("P3"), Color::Pink);
        graph.revert_color(Color::Pink);
        assert_eq!(graph.color(&id("P1")), Color::Yellow);
        assert_eq!(graph.color(&id("P3")), Color::White);
    }

    #[test]
    fn classification_counts_match_attributes() {
        let net = parse_network(crate::samples::IEEE14_MIIM).unwrap();
        let mut graph = build_graph_abstraction(&net).unwrap();
        graph.classify_base_colors(&net);
        let attributed = net
            .entities
            .values()
            .filter(|d| d.is_generator || d.has_pmu)
            .count();
        let colored = graph.count_color(Color::Yellow)
            + graph.count_color(Color::Blue)
            + graph.count_color(Color::Green);
        assert_eq!(colored, attributed);
        // Only power vertices are touched.
        for vc in graph.vc().clone() {
            assert_eq!(graph.color(&vc), Color::White);
        }
    }
}
