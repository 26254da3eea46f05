//! The three-pillar ESG taxonomy.
//!
//! Ten subcategories hang off three pillars, which in turn hang off a single
//! root (`EsgAll`). Messages are only ever tagged with subcategories; pillar
//! and root membership is always derived through [`NodeSet::with_ancestors`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaxonomyNode {
    EsgAll,
    Environment,
    Social,
    Governance,
    ClimateChange,
    NaturalCapital,
    PollutionAndWaste,
    EnvironmentalOpportunities,
    HumanCapital,
    ProductLiability,
    StakeholderOpposition,
    SocialOpportunities,
    CorporateGovernance,
    CorporateBehavior,
}

/// Level of a node in the taxonomy tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Root,
    Pillar,
    Subcategory,
}

use TaxonomyNode::*;

impl TaxonomyNode {
    pub const COUNT: usize = 14;

    /// Every node, in report order: root, pillars, then the subcategories
    /// grouped by pillar.
    pub const ALL: [TaxonomyNode; 14] = [
        EsgAll,
        Environment,
        Social,
        Governance,
        ClimateChange,
        NaturalCapital,
        PollutionAndWaste,
        EnvironmentalOpportunities,
        HumanCapital,
        ProductLiability,
        StakeholderOpposition,
        SocialOpportunities,
        CorporateGovernance,
        CorporateBehavior,
    ];

    pub const PILLARS: [TaxonomyNode; 3] = [Environment, Social, Governance];

    pub const SUBCATEGORIES: [TaxonomyNode; 10] = [
        ClimateChange,
        NaturalCapital,
        PollutionAndWaste,
        EnvironmentalOpportunities,
        HumanCapital,
        ProductLiability,
        StakeholderOpposition,
        SocialOpportunities,
        CorporateGovernance,
        CorporateBehavior,
    ];

    /// Position in [`TaxonomyNode::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<TaxonomyNode> {
        Self::ALL.get(index).copied()
    }

    pub fn parent(self) -> Option<TaxonomyNode> {
        match self {
            EsgAll => None,
            Environment | Social | Governance => Some(EsgAll),
            ClimateChange | NaturalCapital | PollutionAndWaste | EnvironmentalOpportunities => {
                Some(Environment)
            }
            HumanCapital | ProductLiability | StakeholderOpposition | SocialOpportunities => {
                Some(Social)
            }
            CorporateGovernance | CorporateBehavior => Some(Governance),
        }
    }

    pub fn level(self) -> Level {
        match self {
            EsgAll => Level::Root,
            Environment | Social | Governance => Level::Pillar,
            _ => Level::Subcategory,
        }
    }

    pub fn is_subcategory(self) -> bool {
        self.level() == Level::Subcategory
    }

    /// Subcategories below a pillar (or all ten for the root).
    pub fn subcategories(self) -> Vec<TaxonomyNode> {
        match self.level() {
            Level::Subcategory => vec![self],
            Level::Root => Self::SUBCATEGORIES.to_vec(),
            Level::Pillar => Self::SUBCATEGORIES
                .iter()
                .copied()
                .filter(|s| s.parent() == Some(self))
                .collect(),
        }
    }

    /// Human-readable label as used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            EsgAll => "ESG",
            Environment => "Environment",
            Social => "Social",
            Governance => "Governance",
            ClimateChange => "Climate Change",
            NaturalCapital => "Natural Capital",
            PollutionAndWaste => "Pollution and Waste",
            EnvironmentalOpportunities => "Environmental Opportunities",
            HumanCapital => "Human Capital",
            ProductLiability => "Product Liability",
            StakeholderOpposition => "Stakeholder Opposition",
            SocialOpportunities => "Social Opportunities",
            CorporateGovernance => "Corporate Governance",
            CorporateBehavior => "Corporate Behavior",
        }
    }

    /// Compact identifier used in machine-readable files.
    pub fn ident(self) -> &'static str {
        match self {
            EsgAll => "ESG_ALL",
            Environment => "Environment",
            Social => "Social",
            Governance => "Governance",
            ClimateChange => "ClimateChange",
            NaturalCapital => "NaturalCapital",
            PollutionAndWaste => "PollutionAndWaste",
            EnvironmentalOpportunities => "EnvironmentalOpportunities",
            HumanCapital => "HumanCapital",
            ProductLiability => "ProductLiability",
            StakeholderOpposition => "StakeholderOpposition",
            SocialOpportunities => "SocialOpportunities",
            CorporateGovernance => "CorporateGovernance",
            CorporateBehavior => "CorporateBehavior",
        }
    }
}

impl fmt::Display for TaxonomyNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.ident())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownNode(pub String);

impl fmt::Display for UnknownNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown taxonomy node {:?}", self.0)
    }
}

impl std::error::Error for UnknownNode {}

fn squash(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for TaxonomyNode {
    type Err = UnknownNode;

    /// Case-insensitive; whitespace, `_` and `-` are ignored, so both table
    /// labels ("Pollution and Waste") and identifiers ("PollutionAndWaste")
    /// parse.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = squash(s);
        if key == "esgall" || key == "esg" {
            return Ok(EsgAll);
        }
        Self::ALL
            .iter()
            .copied()
            .find(|n| squash(n.ident()) == key)
            .ok_or_else(|| UnknownNode(s.to_string()))
    }
}

impl Serialize for TaxonomyNode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.ident())
    }
}

impl<'de> Deserialize<'de> for TaxonomyNode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A set of taxonomy nodes packed into a bitmask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct NodeSet(u16);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn insert(&mut self, node: TaxonomyNode) {
        self.0 |= 1 << node.index();
    }

    pub fn contains(self, node: TaxonomyNode) -> bool {
        self.0 & (1 << node.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = TaxonomyNode> {
        TaxonomyNode::ALL
            .into_iter()
            .filter(move |n| self.contains(*n))
    }

    /// Closure over parents: the set plus every pillar and the root above it.
    /// The empty set stays empty.
    pub fn with_ancestors(self) -> NodeSet {
        let mut out = self;
        for node in self.iter() {
            let mut cur = node.parent();
            while let Some(p) = cur {
                out.insert(p);
                cur = p.parent();
            }
        }
        out
    }
}

impl FromIterator<TaxonomyNode> for NodeSet {
    fn from_iter<I: IntoIterator<Item = TaxonomyNode>>(iter: I) -> Self {
        let mut set = NodeSet::EMPTY;
        for n in iter {
            set.insert(n);
        }
        set
    }
}

/// Expand a set of subcategories to include their pillars and the root.
pub fn expand_to_ancestors(nodes: NodeSet) -> NodeSet {
    nodes.with_ancestors()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcategories_belong_to_the_expected_pillars() {
        let e: Vec<_> = Environment.subcategories();
        assert_eq!(
            e,
            vec![
                ClimateChange,
                NaturalCapital,
                PollutionAndWaste,
                EnvironmentalOpportunities
            ]
        );
        assert_eq!(Social.subcategories().len(), 4);
        assert_eq!(
            Governance.subcategories(),
            vec![CorporateGovernance, CorporateBehavior]
        );
        for p in TaxonomyNode::PILLARS {
            assert_eq!(p.parent(), Some(EsgAll));
        }
        assert_eq!(EsgAll.subcategories().len(), 10);
    }

    #[test]
    fn closure_over_parents() {
        let one: NodeSet = [ClimateChange].into_iter().collect();
        let want: NodeSet = [ClimateChange, Environment, EsgAll].into_iter().collect();
        assert_eq!(expand_to_ancestors(one), want);

        let two: NodeSet = [HumanCapital, CorporateBehavior].into_iter().collect();
        let want: NodeSet = [
            HumanCapital,
            CorporateBehavior,
            Social,
            Governance,
            EsgAll,
        ]
        .into_iter()
        .collect();
        assert_eq!(expand_to_ancestors(two), want);

        assert_eq!(expand_to_ancestors(NodeSet::EMPTY), NodeSet::EMPTY);
    }

    #[test]
    fn parses_labels_and_idents() {
        for n in TaxonomyNode::ALL {
            assert_eq!(n.label().parse::<TaxonomyNode>().unwrap(), n);
            assert_eq!(n.ident().parse::<TaxonomyNode>().unwrap(), n);
        }
        assert_eq!(
            "pollution  and  waste".parse::<TaxonomyNode>().unwrap(),
            PollutionAndWaste
        );
        assert_eq!(
            "CORPORATE GOVERNANCE".parse::<TaxonomyNode>().unwrap(),
            CorporateGovernance
        );
        assert!("Climate Chnage".parse::<TaxonomyNode>().is_err());
    }

    #[test]
    fn index_round_trips() {
        for (i, n) in TaxonomyNode::ALL.iter().enumerate() {
            assert_eq!(n.index(), i);
            assert_eq!(TaxonomyNode::from_index(i), Some(*n));
        }
    }
}
