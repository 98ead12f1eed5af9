//! Feature recipes: named covariate definitions over the star nodes, and the
//! default recipe sets for the `direct` and `full` variable catalogs.

use serde::{Deserialize, Serialize};

use super::{NodeId, VariableSet};

pub const PRESSURE_LEVELS: [u32; 6] = [500, 700, 750, 800, 850, 900];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarmonicPhase {
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupAgg {
    Sum,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureRecipe {
    /// interpolated field value at one node
    Raw {
        name: String,
        field: String,
        node: NodeId,
    },
    /// day-of-year harmonic of the given order
    Harmonic {
        name: String,
        order: u8,
        phase: HarmonicPhase,
    },
    /// field(level_hi) - field(level_lo) at one node, field name composed as
    /// `{field}_{level}`
    VerticalGradient {
        name: String,
        field: String,
        level_lo: u32,
        level_hi: u32,
        node: NodeId,
    },
    /// same computation as vertical_gradient, conventionally applied to
    /// geopotential
    Thickness {
        name: String,
        field: String,
        level_lo: u32,
        level_hi: u32,
        node: NodeId,
    },
    /// field(node_a) - field(node_b)
    SpatialDiff {
        name: String,
        field: String,
        node_a: NodeId,
        node_b: NodeId,
    },
    GroupSum {
        name: String,
        field: String,
        nodes: Vec<NodeId>,
    },
    GroupMean {
        name: String,
        field: String,
        nodes: Vec<NodeId>,
    },
    /// agg(plus nodes) - agg(minus nodes)
    GroupDiff {
        name: String,
        field: String,
        agg: GroupAgg,
        plus: Vec<NodeId>,
        minus: Vec<NodeId>,
    },
    /// change of field(node) over `lag_hours`: positive lag is the change to
    /// t+lag, negative lag the change since t+lag
    TemporalDiff {
        name: String,
        field: String,
        node: NodeId,
        lag_hours: i64,
    },
    /// temporal change of the spatial difference field(node_a) - field(node_b)
    Spatiotemporal {
        name: String,
        field: String,
        node_a: NodeId,
        node_b: NodeId,
        lag_hours: i64,
    },
}

impl FeatureRecipe {
    pub fn name(&self) -> &str {
        match self {
            FeatureRecipe::Raw { name, .. }
            | FeatureRecipe::Harmonic { name, .. }
            | FeatureRecipe::VerticalGradient { name, .. }
            | FeatureRecipe::Thickness { name, .. }
            | FeatureRecipe::SpatialDiff { name, .. }
            | FeatureRecipe::GroupSum { name, .. }
            | FeatureRecipe::GroupMean { name, .. }
            | FeatureRecipe::GroupDiff { name, .. }
            | FeatureRecipe::TemporalDiff { name, .. }
            | FeatureRecipe::Spatiotemporal { name, .. } => name,
        }
    }

    pub fn lag_hours(&self) -> i64 {
        match self {
            FeatureRecipe::TemporalDiff { lag_hours, .. }
            | FeatureRecipe::Spatiotemporal { lag_hours, .. } => *lag_hours,
            _ => 0,
        }
    }

    /// (field, node) pairs this recipe interpolates.
    pub fn inputs(&self) -> Vec<(String, NodeId)> {
        match self {
            FeatureRecipe::Raw { field, node, .. } => vec![(field.clone(), *node)],
            FeatureRecipe::Harmonic { .. } => vec![],
            FeatureRecipe::VerticalGradient {
                field,
                level_lo,
                level_hi,
                node,
                ..
            }
            | FeatureRecipe::Thickness {
                field,
                level_lo,
                level_hi,
                node,
                ..
            } => vec![
                (format!("{field}_{level_lo}"), *node),
                (format!("{field}_{level_hi}"), *node),
            ],
            FeatureRecipe::SpatialDiff {
                field,
                node_a,
                node_b,
                ..
            }
            | FeatureRecipe::Spatiotemporal {
                field,
                node_a,
                node_b,
                ..
            } => vec![(field.clone(), *node_a), (field.clone(), *node_b)],
            FeatureRecipe::GroupSum { field, nodes, .. }
            | FeatureRecipe::GroupMean { field, nodes, .. } => {
                nodes.iter().map(|n| (field.clone(), *n)).collect()
            }
            FeatureRecipe::GroupDiff {
                field, plus, minus, ..
            } => plus
                .iter()
                .chain(minus)
                .map(|n| (field.clone(), *n))
                .collect(),
            FeatureRecipe::TemporalDiff { field, node, .. } => vec![(field.clone(), *node)],
        }
    }
}

/// Splits a pressure-level field name like `temperature_700` into its base
/// and level.
fn level_base(name: &str) -> Option<(&str, u32)> {
    let (base, suffix) = name.rsplit_once('_')?;
    let level: u32 = suffix.parse().ok()?;
    PRESSURE_LEVELS.contains(&level).then_some((base, level))
}

const SPATIAL_PAIRS: [(NodeId, NodeId); 6] = [
    (NodeId::C, NodeId::U),
    (NodeId::U, NodeId::C),
    (NodeId::UL, NodeId::DR),
    (NodeId::UR, NodeId::DL),
    (NodeId::UU, NodeId::DD),
    (NodeId::C, NodeId::D),
];

const TEMPORAL_LAGS: [i64; 2] = [-3, 3];

fn is_precip(name: &str) -> bool {
    name.contains("precipitation")
}

fn is_cloud(name: &str) -> bool {
    name.contains("cloud_cover")
}

fn wants_temporal(name: &str) -> bool {
    ["geopotential", "temperature", "humidity", "pressure"]
        .iter()
        .any(|k| name.contains(k))
}

fn wants_spatiotemporal(name: &str) -> bool {
    name.contains("pressure") || name.contains("geopotential")
}

/// Default recipe list covering every category of the variable catalog:
/// raws, vertical gradients, level thicknesses, harmonics for `direct`; node
/// pair differences, upwind/downwind group aggregates, temporal changes and
/// temporal changes of spatial differences on top for `full`.
pub fn default_recipes(field_names: &[String], set: VariableSet) -> Vec<FeatureRecipe> {
    let mut recipes = Vec::new();

    for field in field_names {
        recipes.push(FeatureRecipe::Raw {
            name: format!("{field}@C"),
            field: field.clone(),
            node: NodeId::C,
        });
    }

    // adjacent-level differences per pressure-level base
    let mut bases: Vec<(&str, Vec<u32>)> = Vec::new();
    for name in field_names {
        if let Some((base, level)) = level_base(name) {
            match bases.iter_mut().find(|(b, _)| *b == base) {
                Some((_, levels)) => levels.push(level),
                None => bases.push((base, vec![level])),
            }
        }
    }
    for (base, mut levels) in bases {
        levels.sort_unstable();
        for pair in levels.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            if base.contains("geopotential") {
                recipes.push(FeatureRecipe::Thickness {
                    name: format!("{base}_thickness_{lo}_{hi}@C"),
                    field: base.to_string(),
                    level_lo: lo,
                    level_hi: hi,
                    node: NodeId::C,
                });
            } else {
                recipes.push(FeatureRecipe::VerticalGradient {
                    name: format!("{base}_vgrad_{lo}_{hi}@C"),
                    field: base.to_string(),
                    level_lo: lo,
                    level_hi: hi,
                    node: NodeId::C,
                });
            }
        }
    }

    for (order, phase, name) in [
        (1u8, HarmonicPhase::Sin, "harmonic_sin1"),
        (1, HarmonicPhase::Cos, "harmonic_cos1"),
        (2, HarmonicPhase::Sin, "harmonic_sin2"),
        (2, HarmonicPhase::Cos, "harmonic_cos2"),
    ] {
        recipes.push(FeatureRecipe::Harmonic {
            name: name.to_string(),
            order,
            phase,
        });
    }

    if set == VariableSet::Direct {
        return recipes;
    }

    for field in field_names {
        for (a, b) in SPATIAL_PAIRS {
            recipes.push(FeatureRecipe::SpatialDiff {
                name: format!("{field}@{a}-{b}"),
                field: field.clone(),
                node_a: a,
                node_b: b,
            });
        }
    }

    for field in field_names.iter().filter(|f| is_precip(f)) {
        recipes.push(FeatureRecipe::GroupSum {
            name: format!("{field}@upwind_sum"),
            field: field.clone(),
            nodes: NodeId::UPWIND.to_vec(),
        });
        recipes.push(FeatureRecipe::GroupSum {
            name: format!("{field}@downwind_sum"),
            field: field.clone(),
            nodes: NodeId::DOWNWIND.to_vec(),
        });
        recipes.push(FeatureRecipe::GroupDiff {
            name: format!("{field}@updown_sum_diff"),
            field: field.clone(),
            agg: GroupAgg::Sum,
            plus: NodeId::UPWIND.to_vec(),
            minus: NodeId::DOWNWIND.to_vec(),
        });
    }

    for field in field_names.iter().filter(|f| is_cloud(f)) {
        recipes.push(FeatureRecipe::GroupMean {
            name: format!("{field}@upwind_mean"),
            field: field.clone(),
            nodes: NodeId::UPWIND.to_vec(),
        });
        recipes.push(FeatureRecipe::GroupMean {
            name: format!("{field}@downwind_mean"),
            field: field.clone(),
            nodes: NodeId::DOWNWIND.to_vec(),
        });
        recipes.push(FeatureRecipe::GroupDiff {
            name: format!("{field}@updown_mean_diff"),
            field: field.clone(),
            agg: GroupAgg::Mean,
            plus: NodeId::UPWIND.to_vec(),
            minus: NodeId::DOWNWIND.to_vec(),
        });
    }

    for field in field_names.iter().filter(|f| wants_temporal(f)) {
        for lag in TEMPORAL_LAGS {
            recipes.push(FeatureRecipe::TemporalDiff {
                name: format!("{field}@C_dt{lag:+}"),
                field: field.clone(),
                node: NodeId::C,
                lag_hours: lag,
            });
        }
    }

    for field in field_names.iter().filter(|f| wants_spatiotemporal(f)) {
        for lag in TEMPORAL_LAGS {
            recipes.push(FeatureRecipe::Spatiotemporal {
                name: format!("{field}@C-U_dt{lag:+}"),
                field: field.clone(),
                node_a: NodeId::C,
                node_b: NodeId::U,
                lag_hours: lag,
            });
        }
    }

    recipes
}

pub fn load_recipes(path: &std::path::Path) -> crate::Result<Vec<FeatureRecipe>> {
    Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
}

pub fn write_recipes(recipes: &[FeatureRecipe], path: &std::path::Path) -> crate::Result<()> {
    serde_json::to_writer_pretty(std::fs::File::create(path)?, recipes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn direct_is_strict_subset_of_full() {
        let fields = names(&[
            "surface_pressure",
            "total_precipitation",
            "total_cloud_cover",
            "temperature_700",
            "temperature_850",
            "geopotential_700",
            "geopotential_850",
        ]);
        let direct = default_recipes(&fields, VariableSet::Direct);
        let full = default_recipes(&fields, VariableSet::Full);
        assert!(direct.len() < full.len());
        for r in &direct {
            assert!(full.contains(r), "direct recipe {} missing from full", r.name());
        }
        // names unique
        let mut seen = std::collections::BTreeSet::new();
        for r in &full {
            assert!(seen.insert(r.name().to_string()), "duplicate {}", r.name());
        }
    }

    #[test]
    fn level_pairs_are_adjacent() {
        let fields = names(&["temperature_500", "temperature_700", "temperature_850"]);
        let direct = default_recipes(&fields, VariableSet::Direct);
        let grads: Vec<_> = direct
            .iter()
            .filter(|r| matches!(r, FeatureRecipe::VerticalGradient { .. }))
            .collect();
        assert_eq!(grads.len(), 2);
    }

    #[test]
    fn recipe_json_roundtrip() {
        let fields = names(&["surface_pressure", "geopotential_700", "geopotential_850"]);
        let full = default_recipes(&fields, VariableSet::Full);
        let json = serde_json::to_string(&full).unwrap();
        let back: Vec<FeatureRecipe> = serde_json::from_str(&json).unwrap();
        assert_eq!(full, back);
    }
}
