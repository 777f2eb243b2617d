//! Joint power-communication network model: entity taxonomy, the three edge
//! classes, per-entity IDRs, and structural validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algebra::{EntityId, IdrExpression};

/// Entity kind across the three layers of the joint network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Bus,
    TransmissionLine,
    Transformer,
    Battery,
    SubstationEntity,
    SonetRingEntity,
    DwdmRingEntity,
    PowerSupplyLine,
    Rtu,
    PmuDevice,
}

/// Network layer an entity kind belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    /// Power entities: buses, lines, transformers, batteries.
    Power,
    /// Communication entities: substation, SONET-ring and DWDM-ring entities.
    Comm,
    /// Coupling entities between the layers: power supply lines, RTUs, PMUs.
    Coupling,
}

impl EntityKind {
    pub fn layer(self) -> Layer {
        match self {
            EntityKind::Bus
            | EntityKind::TransmissionLine
            | EntityKind::Transformer
            | EntityKind::Battery => Layer::Power,
            EntityKind::SubstationEntity
            | EntityKind::SonetRingEntity
            | EntityKind::DwdmRingEntity => Layer::Comm,
            EntityKind::PowerSupplyLine | EntityKind::Rtu | EntityKind::PmuDevice => {
                Layer::Coupling
            }
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            EntityKind::Bus => "bus",
            EntityKind::TransmissionLine => "line",
            EntityKind::Transformer => "transformer",
            EntityKind::Battery => "battery",
            EntityKind::SubstationEntity => "substation_entity",
            EntityKind::SonetRingEntity => "sonet_ring_entity",
            EntityKind::DwdmRingEntity => "dwdm_ring_entity",
            EntityKind::PowerSupplyLine => "power_supply_line",
            EntityKind::Rtu => "rtu",
            EntityKind::PmuDevice => "pmu_device",
        }
    }

    pub fn from_keyword(word: &str) -> Option<EntityKind> {
        Some(match word {
            "bus" => EntityKind::Bus,
            "line" => EntityKind::TransmissionLine,
            "transformer" => EntityKind::Transformer,
            "battery" => EntityKind::Battery,
            "substation_entity" => EntityKind::SubstationEntity,
            "sonet_ring_entity" => EntityKind::SonetRingEntity,
            "dwdm_ring_entity" => EntityKind::DwdmRingEntity,
            "power_supply_line" => EntityKind::PowerSupplyLine,
            "rtu" => EntityKind::Rtu,
            "pmu_device" => EntityKind::PmuDevice,
            _ => return None,
        })
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Declaration of one entity: its kind plus bus attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDecl {
    pub kind: EntityKind,
    #[serde(default)]
    pub is_generator: bool,
    #[serde(default)]
    pub has_pmu: bool,
    #[serde(default)]
    pub substation: Option<u32>,
}

impl EntityDecl {
    pub fn of_kind(kind: EntityKind) -> Self {
        EntityDecl {
            kind,
            is_generator: false,
            has_pmu: false,
            substation: None,
        }
    }
}

/// Edge class in the joint network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeClass {
    /// Power-power edges (transmission lines, transformers).
    Pp,
    /// Power-communication edges (power supply lines etc.).
    Pc,
    /// Communication-communication edges.
    Cc,
}

impl EdgeClass {
    pub fn keyword(self) -> &'static str {
        match self {
            EdgeClass::Pp => "pp",
            EdgeClass::Pc => "pc",
            EdgeClass::Cc => "cc",
        }
    }

    pub fn from_keyword(word: &str) -> Option<EdgeClass> {
        Some(match word {
            "pp" => EdgeClass::Pp,
            "pc" => EdgeClass::Pc,
            "cc" => EdgeClass::Cc,
            _ => return None,
        })
    }
}

/// One undirected edge. Endpoints are stored in sorted order so that equal
/// edges compare equal regardless of declaration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeDecl {
    pub class: EdgeClass,
    pub a: EntityId,
    pub b: EntityId,
    /// Optional channel entity bound to this edge (e.g. the transmission
    /// line object realizing a pp edge).
    pub bound_entity: Option<EntityId>,
}

impl EdgeDecl {
    pub fn new(class: EdgeClass, a: EntityId, b: EntityId, bound_entity: Option<EntityId>) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        EdgeDecl {
            class,
            a,
            b,
            bound_entity,
        }
    }

    pub fn touches(&self, id: &EntityId) -> bool {
        &self.a == id || &self.b == id
    }
}

/// The joint network: entities, their IDRs (absent = root entity) and the
/// three edge classes. Construction canonicalizes edge order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JointNetwork {
    pub entities: BTreeMap<EntityId, EntityDecl>,
    pub idrs: BTreeMap<EntityId, IdrExpression>,
    pub edges: Vec<EdgeDecl>,
}

impl JointNetwork {
    pub fn new(
        entities: BTreeMap<EntityId, EntityDecl>,
        idrs: BTreeMap<EntityId, IdrExpression>,
        mut edges: Vec<EdgeDecl>,
    ) -> Self {
        edges.sort();
        JointNetwork {
            entities,
            idrs,
            edges,
        }
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.entities.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Ids of entities bound to an edge (channel role).
    pub fn edge_bound_ids(&self) -> BTreeSet<EntityId> {
        self.edges
            .iter()
            .filter_map(|e| e.bound_entity.clone())
            .collect()
    }

    /// Ids of node-role entities (everything not bound to an edge).
    pub fn node_ids(&self) -> BTreeSet<EntityId> {
        let bound = self.edge_bound_ids();
        self.entities
            .keys()
            .filter(|id| !bound.contains(*id))
            .cloned()
            .collect()
    }

    /// Total edge count across the three classes.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Structural validation. Returns an empty list when all invariants hold;
    /// issues carry the offending entity or edge.
    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        let mut bound_seen: BTreeMap<EntityId, usize> = BTreeMap::new();

        for (id, decl) in &self.entities {
            if (decl.is_generator || decl.has_pmu) && decl.kind != EntityKind::Bus {
                issues.push(ValidationIssue::error(
                    format!("entity {id}"),
                    format!(
                        "gen/pmu attributes are only valid on buses, not {}",
                        decl.kind
                    ),
                ));
            }
        }

        for edge in &self.edges {
            let label = format!("edge {} {} {}", edge.class.keyword(), edge.a, edge.b);
            for end in [&edge.a, &edge.b] {
                if !self.contains(end) {
                    issues.push(ValidationIssue::error(
                        label.clone(),
                        format!("undeclared entity {end}"),
                    ));
                }
            }
            if let Some(bound) = &edge.bound_entity {
                if !self.contains(bound) {
                    issues.push(ValidationIssue::error(
                        label.clone(),
                        format!("undeclared bound entity {bound}"),
                    ));
                }
                *bound_seen.entry(bound.clone()).or_insert(0) += 1;
                let expected = match edge.class {
                    EdgeClass::Pp => {
                        matches!(
                            self.entities.get(bound).map(|d| d.kind),
                            Some(EntityKind::TransmissionLine)
                                | Some(EntityKind::Transformer)
                                | None
                        )
                    }
                    EdgeClass::Pc => matches!(
                        self.entities.get(bound).map(|d| d.kind),
                        Some(EntityKind::PowerSupplyLine) | None
                    ),
                    EdgeClass::Cc => true,
                };
                if !expected {
                    issues.push(ValidationIssue::warning(
                        label.clone(),
                        format!(
                            "bound entity {bound} has an unusual kind for a {} edge",
                            edge.class.keyword()
                        ),
                    ));
                }
            }
            self.check_edge_layers(edge, &label, &mut issues);
        }

        for (bound, count) in bound_seen {
            if count > 1 {
                issues.push(ValidationIssue::error(
                    format!("entity {bound}"),
                    format!("bound to {count} edges; an edge-bound entity must appear in exactly one edge"),
                ));
            }
        }

        let mut duplicate_check: BTreeSet<(EdgeClass, &EntityId, &EntityId)> = BTreeSet::new();
        for edge in &self.edges {
            if !duplicate_check.insert((edge.class, &edge.a, &edge.b)) {
                issues.push(ValidationIssue::warning(
                    format!("edge {} {} {}", edge.class.keyword(), edge.a, edge.b),
                    "duplicate edge".to_owned(),
                ));
            }
        }

        for (target, expr) in &self.idrs {
            if !self.contains(target) {
                issues.push(ValidationIssue::error(
                    format!("idr {target}"),
                    format!("undeclared entity {target}"),
                ));
            }
            for referenced in expr.references() {
                if !self.contains(&referenced) {
                    issues.push(ValidationIssue::error(
                        format!("idr {target}"),
                        format!("undeclared entity {referenced}"),
                    ));
                } else if &referenced == target {
                    issues.push(ValidationIssue::warning(
                        format!("idr {target}"),
                        "self-referential IDR; the self literal is ignored during evaluation"
                            .to_owned(),
                    ));
                }
            }
        }

        issues
    }

    fn check_edge_layers(&self, edge: &EdgeDecl, label: &str, issues: &mut Vec<ValidationIssue>) {
        let bound = self.edge_bound_ids();
        let layer_of = |id: &EntityId| self.entities.get(id).map(|d| d.kind.layer());
        let node = |id: &EntityId| !bound.contains(id);
        let (la, lb) = (layer_of(&edge.a), layer_of(&edge.b));
        let (Some(la), Some(lb)) = (la, lb) else {
            return; // undeclared endpoints already reported
        };
        let ok = match edge.class {
            EdgeClass::Pp => la == Layer::Power && lb == Layer::Power,
            EdgeClass::Cc => {
                matches!(la, Layer::Comm | Layer::Coupling)
                    && matches!(lb, Layer::Comm | Layer::Coupling)
            }
            EdgeClass::Pc => {
                (la == Layer::Power && matches!(lb, Layer::Comm | Layer::Coupling))
                    || (lb == Layer::Power && matches!(la, Layer::Comm | Layer::Coupling))
            }
        };
        if !ok {
            issues.push(ValidationIssue::error(
                label.to_owned(),
                format!(
                    "layer violation: {} edge cannot join {} and {}",
                    edge.class.keyword(),
                    self.entities[&edge.a].kind,
                    self.entities[&edge.b].kind
                ),
            ));
        }
        if !node(&edge.a) || !node(&edge.b) {
            issues.push(ValidationIssue::error(
                label.to_owned(),
                "edge endpoints must be node entities, not edge-bound channels".to_owned(),
            ));
        }
    }

    /// True when validation yields no error-severity issues.
    pub fn is_valid(&self) -> bool {
        !self
            .validate()
            .iter()
            .any(|i| i.severity == IssueSeverity::Error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueSeverity {
    Error,
    Warning,
}

/// One finding from [`JointNetwork::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub severity: IssueSeverity,
    /// The entity or edge the issue is about.
    pub subject: String,
    pub message: String,
}

impl ValidationIssue {
    fn error(subject: String, message: String) -> Self {
        ValidationIssue {
            severity: IssueSeverity::Error,
            subject,
            message,
        }
    }

    fn warning(subject: String, message: String) -> Self {
        ValidationIssue {
            severity: IssueSeverity::Warning,
            subject,
            message,
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            IssueSeverity::Error => "error",
            IssueSeverity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.subject, self.message)
    }
}
