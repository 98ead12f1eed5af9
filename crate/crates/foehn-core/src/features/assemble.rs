//! Recipe evaluation: interpolates gridded fields to star nodes and builds
//! the hourly covariate table.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{bilinear, harmonics, FeatureRecipe, GroupAgg, HarmonicPhase, NodeId, NodeStar, VariableSet};
use crate::data_io::GriddedFieldSet;
use crate::time::{format_utc, parse_utc, TimeAxis, HOUR_SECS};
use crate::{Error, Result};

/// Hourly matrix of named covariates. Gap-free by construction.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub times: TimeAxis,
    pub names: Vec<String>,
    /// column-major values, each column `times.len` long
    pub columns: Vec<Vec<f64>>,
    pub variable_set: VariableSet,
    /// rows dropped at the span edges because temporal lags were uncovered
    pub dropped_leading: usize,
    pub dropped_trailing: usize,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.times.len
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Row of covariates at time `t`, in column order.
    pub fn row_at(&self, t: DateTime<Utc>) -> Option<Vec<f64>> {
        let i = self.times.index_of(t)?;
        Some(self.columns.iter().map(|c| c[i]).collect())
    }
}

fn validate_recipes(
    gridded: &GriddedFieldSet,
    star: &NodeStar,
    recipes: &[FeatureRecipe],
) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for r in recipes {
        if !seen.insert(r.name().to_string()) {
            return Err(Error::Recipe(format!("duplicate column name {:?}", r.name())));
        }
        for (field, node) in r.inputs() {
            if !gridded.fields.contains_key(&field) {
                return Err(Error::Recipe(format!(
                    "recipe {:?} references unknown field {field:?}",
                    r.name()
                )));
            }
            if !star.nodes.contains_key(&node) {
                return Err(Error::Recipe(format!(
                    "recipe {:?} references node {node} absent from the star",
                    r.name()
                )));
            }
        }
    }
    Ok(())
}

/// Evaluates `recipes` over the gridded set at the star nodes. Rows at the
/// span edges that temporal lags cannot cover are dropped and reported in
/// the returned table.
pub fn assemble(
    gridded: &GriddedFieldSet,
    star: &NodeStar,
    recipes: &[FeatureRecipe],
    variable_set: VariableSet,
) -> Result<FeatureTable> {
    validate_recipes(gridded, star, recipes)?;

    let n_times = gridded.times.len;
    let max_past = recipes
        .iter()
        .map(|r| (-r.lag_hours()).max(0))
        .max()
        .unwrap_or(0) as usize;
    let max_future = recipes.iter().map(|r| r.lag_hours().max(0)).max().unwrap_or(0) as usize;
    if n_times <= max_past + max_future {
        return Err(Error::Recipe(format!(
            "time axis of {n_times} hours cannot cover temporal lags (-{max_past}, +{max_future})"
        )));
    }

    // interpolate each needed (field, node) series once
    let mut series: BTreeMap<(String, NodeId), Vec<f64>> = BTreeMap::new();
    for r in recipes {
        for key in r.inputs() {
            if series.contains_key(&key) {
                continue;
            }
            let (lat, lon) = star.node(key.1);
            let mut values = Vec::with_capacity(n_times);
            for ti in 0..n_times {
                let slice = gridded.slice_at(&key.0, ti)?;
                values.push(bilinear(&gridded.grid, slice, lat, lon)?);
            }
            series.insert(key, values);
        }
    }
    let get = |field: &str, node: NodeId| -> &Vec<f64> { &series[&(field.to_string(), node)] };

    let row_range = max_past..(n_times - max_future);
    let times = TimeAxis::new(gridded.times.at(max_past), HOUR_SECS, row_range.len());

    let mut names = Vec::with_capacity(recipes.len());
    let mut columns = Vec::with_capacity(recipes.len());
    for r in recipes {
        names.push(r.name().to_string());
        let col: Vec<f64> = match r {
            FeatureRecipe::Raw { field, node, .. } => {
                let v = get(field, *node);
                row_range.clone().map(|t| v[t]).collect()
            }
            FeatureRecipe::Harmonic { order, phase, .. } => row_range
                .clone()
                .map(|t| {
                    let h = harmonics(times.at(t - max_past));
                    match (order, phase) {
                        (1, HarmonicPhase::Sin) => h[0],
                        (1, HarmonicPhase::Cos) => h[1],
                        (2, HarmonicPhase::Sin) => h[2],
                        (2, HarmonicPhase::Cos) => h[3],
                        _ => f64::NAN,
                    }
                })
                .collect(),
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
            } => {
                let lo = get(&format!("{field}_{level_lo}"), *node);
                let hi = get(&format!("{field}_{level_hi}"), *node);
                row_range.clone().map(|t| hi[t] - lo[t]).collect()
            }
            FeatureRecipe::SpatialDiff {
                field,
                node_a,
                node_b,
                ..
            } => {
                let a = get(field, *node_a);
                let b = get(field, *node_b);
                row_range.clone().map(|t| a[t] - b[t]).collect()
            }
            FeatureRecipe::GroupSum { field, nodes, .. } => {
                let vs: Vec<&Vec<f64>> = nodes.iter().map(|n| get(field, *n)).collect();
                row_range
                    .clone()
                    .map(|t| vs.iter().map(|v| v[t]).sum())
                    .collect()
            }
            FeatureRecipe::GroupMean { field, nodes, .. } => {
                let vs: Vec<&Vec<f64>> = nodes.iter().map(|n| get(field, *n)).collect();
                row_range
                    .clone()
                    .map(|t| vs.iter().map(|v| v[t]).sum::<f64>() / vs.len() as f64)
                    .collect()
            }
            FeatureRecipe::GroupDiff {
                field,
                agg,
                plus,
                minus,
                ..
            } => {
                let p: Vec<&Vec<f64>> = plus.iter().map(|n| get(field, *n)).collect();
                let m: Vec<&Vec<f64>> = minus.iter().map(|n| get(field, *n)).collect();
                let scale = |sum: f64, n: usize| match agg {
                    GroupAgg::Sum => sum,
                    GroupAgg::Mean => sum / n as f64,
                };
                row_range
                    .clone()
                    .map(|t| {
                        scale(p.iter().map(|v| v[t]).sum(), p.len())
                            - scale(m.iter().map(|v| v[t]).sum(), m.len())
                    })
                    .collect()
            }
            FeatureRecipe::TemporalDiff {
                field,
                node,
                lag_hours,
                ..
            } => {
                let v = get(field, *node);
                let (hi, lo) = (lag_hours.max(&0), lag_hours.min(&0));
                row_range
                    .clone()
                    .map(|t| {
                        v[(t as i64 + hi) as usize] - v[(t as i64 + lo) as usize]
                    })
                    .collect()
            }
            FeatureRecipe::Spatiotemporal {
                field,
                node_a,
                node_b,
                lag_hours,
                ..
            } => {
                let a = get(field, *node_a);
                let b = get(field, *node_b);
                let (hi, lo) = (*lag_hours.max(&0), *lag_hours.min(&0));
                row_range
                    .clone()
                    .map(|t| {
                        let th = (t as i64 + hi) as usize;
                        let tl = (t as i64 + lo) as usize;
                        (a[th] - b[th]) - (a[tl] - b[tl])
                    })
                    .collect()
            }
        };
        columns.push(col);
    }

    Ok(FeatureTable {
        times,
        names,
        columns,
        variable_set,
        dropped_leading: max_past,
        dropped_trailing: max_future,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ColumnManifest {
    variable_set: VariableSet,
    dropped_leading: usize,
    dropped_trailing: usize,
    columns: Vec<FeatureRecipe>,
}

/// Persists the table as `<stem>.csv` plus a `<stem>.columns.json` manifest
/// recording each column's recipe provenance.
pub fn write_feature_table(
    table: &FeatureTable,
    recipes: &[FeatureRecipe],
    stem: &Path,
) -> Result<()> {
    let manifest = ColumnManifest {
        variable_set: table.variable_set,
        dropped_leading: table.dropped_leading,
        dropped_trailing: table.dropped_trailing,
        columns: recipes.to_vec(),
    };
    serde_json::to_writer_pretty(
        std::fs::File::create(stem.with_extension("columns.json"))?,
        &manifest,
    )?;

    let mut w = std::io::BufWriter::new(std::fs::File::create(stem.with_extension("csv"))?);
    writeln!(w, "timestamp,{}", table.names.join(","))?;
    for (i, t) in table.times.iter().enumerate() {
        write!(w, "{}", format_utc(t))?;
        for col in &table.columns {
            write!(w, ",{}", col[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn load_feature_table(stem: &Path) -> Result<FeatureTable> {
    let manifest: ColumnManifest = serde_json::from_reader(std::fs::File::open(
        stem.with_extension("columns.json"),
    )?)?;
    let file = std::fs::File::open(stem.with_extension("csv"))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Integrity("empty feature table".into()))??;
    let names: Vec<String> = header
        .split(',')
        .skip(1)
        .map(|s| s.to_string())
        .collect();
    let mut times: Vec<DateTime<Utc>> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        times.push(parse_utc(parts.next().unwrap())?);
        for col in columns.iter_mut() {
            let cell = parts
                .next()
                .ok_or_else(|| Error::Integrity("short feature row".into()))?;
            col.push(
                cell.parse::<f64>()
                    .map_err(|_| Error::Integrity(format!("bad feature value {cell:?}")))?,
            );
        }
    }
    if times.is_empty() {
        return Err(Error::Integrity("feature table has no rows".into()));
    }
    let axis = TimeAxis::spanning(times[0], *times.last().unwrap(), HOUR_SECS)?;
    if axis.len != times.len() {
        return Err(Error::Integrity("feature table not on uniform hourly grid".into()));
    }
    Ok(FeatureTable {
        times: axis,
        names,
        columns,
        variable_set: manifest.variable_set,
        dropped_leading: manifest.dropped_leading,
        dropped_trailing: manifest.dropped_trailing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::{FoehnType, GridSpec, StationMeta, StationRole};
    use crate::features::{build_star, default_recipes};
    use approx::assert_abs_diff_eq;

    fn test_star() -> NodeStar {
        let station = StationMeta {
            id: "s".into(),
            role: StationRole::Valley,
            lat: 47.0,
            lon: 10.0,
            altitude: 500.0,
            foehn_type: Some(FoehnType::South),
        };
        build_star(&station, &[(46.5, 6.0), (46.5, 14.0)], FoehnType::South).unwrap()
    }

    /// Gridded set covering the star with a per-field generator
    /// value(t, lat, lon).
    fn synth_gridded(
        fields: &[(&str, fn(f64, f64, f64) -> f64)],
        n_times: usize,
    ) -> GriddedFieldSet {
        let grid = GridSpec {
            lat0: 44.0,
            lon0: 7.0,
            dlat: 0.5,
            dlon: 0.5,
            nlat: 13,
            nlon: 13,
        };
        let times = TimeAxis::new(
            parse_utc("2020-01-01T00:00:00Z").unwrap(),
            HOUR_SECS,
            n_times,
        );
        let mut set = GriddedFieldSet::new(grid, times);
        for (name, f) in fields {
            let mut values = Vec::new();
            for ti in 0..n_times {
                for i in 0..grid.nlat {
                    for j in 0..grid.nlon {
                        values.push(f(ti as f64, grid.lat(i), grid.lon(j)));
                    }
                }
            }
            set.insert_field(name, values).unwrap();
        }
        set
    }

    #[test]
    fn spatial_diff_of_constant_field_is_zero() {
        let set = synth_gridded(&[("surface_pressure", |_, _, _| 1013.0)], 4);
        let star = test_star();
        let recipes = vec![FeatureRecipe::SpatialDiff {
            name: "d".into(),
            field: "surface_pressure".into(),
            node_a: NodeId::UL,
            node_b: NodeId::DR,
        }];
        let t = assemble(&set, &star, &recipes, VariableSet::Full).unwrap();
        for &v in t.column("d").unwrap() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn group_sums_on_constructed_field() {
        // upwind (south of the station) = 1, downwind = 0
        let set = synth_gridded(&[("total_precipitation", |_, lat, _| if lat < 47.0 { 1.0 } else { 0.0 })], 2);
        let star = test_star();
        let recipes = vec![FeatureRecipe::GroupDiff {
            name: "updown".into(),
            field: "total_precipitation".into(),
            agg: GroupAgg::Sum,
            plus: NodeId::UPWIND.to_vec(),
            minus: NodeId::DOWNWIND.to_vec(),
        }];
        let t = assemble(&set, &star, &recipes, VariableSet::Full).unwrap();
        for &v in t.column("updown").unwrap() {
            assert_abs_diff_eq!(v, 4.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn temporal_diff_matches_slope() {
        // field linear in time with slope 2 per hour
        let set = synth_gridded(&[("geopotential_700", |t, _, _| 5.0 + 2.0 * t)], 10);
        let star = test_star();
        let recipes = vec![FeatureRecipe::TemporalDiff {
            name: "dt".into(),
            field: "geopotential_700".into(),
            node: NodeId::C,
            lag_hours: 3,
        }];
        let t = assemble(&set, &star, &recipes, VariableSet::Full).unwrap();
        assert_eq!(t.n_rows(), 7);
        assert_eq!(t.dropped_trailing, 3);
        for &v in t.column("dt").unwrap() {
            assert_abs_diff_eq!(v, 6.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn unknown_node_or_field_rejected() {
        let set = synth_gridded(&[("surface_pressure", |_, _, _| 1.0)], 2);
        let star = test_star();
        let recipes = vec![FeatureRecipe::Raw {
            name: "x".into(),
            field: "nope".into(),
            node: NodeId::C,
        }];
        assert!(matches!(
            assemble(&set, &star, &recipes, VariableSet::Full),
            Err(Error::Recipe(_))
        ));
    }

    #[test]
    fn direct_columns_bit_identical_in_full() {
        let set = synth_gridded(
            &[
                ("surface_pressure", |t, lat, lon| 1000.0 + t + lat * 2.0 - lon),
                ("temperature_700", |t, lat, lon| (t * 0.1).sin() + lat + lon),
                ("temperature_850", |t, lat, lon| (t * 0.2).cos() - lat + lon),
            ],
            12,
        );
        let star = test_star();
        let fields: Vec<String> = set.fields.keys().cloned().collect();
        let direct = assemble(
            &set,
            &star,
            &default_recipes(&fields, VariableSet::Direct),
            VariableSet::Direct,
        )
        .unwrap();
        let full = assemble(
            &set,
            &star,
            &default_recipes(&fields, VariableSet::Full),
            VariableSet::Full,
        )
        .unwrap();
        for (ni, name) in direct.names.iter().enumerate() {
            let fc = full.column(name).expect("direct column present in full");
            let dc = &direct.columns[ni];
            // full drops lag edges; compare on the shared time range
            for (i, t) in full.times.iter().enumerate() {
                let di = direct.times.index_of(t).unwrap();
                assert_eq!(dc[di], fc[i], "column {name} differs at {t}");
            }
        }
    }

    #[test]
    fn translation_invariance_of_spatial_diffs() {
        let base = synth_gridded(&[("surface_pressure", |t, lat, lon| t + lat + lon)], 4);
        let shifted = synth_gridded(&[("surface_pressure", |t, lat, lon| t + lat + lon + 100.0)], 4);
        let star = test_star();
        let recipes = vec![
            FeatureRecipe::Raw {
                name: "raw".into(),
                field: "surface_pressure".into(),
                node: NodeId::C,
            },
            FeatureRecipe::SpatialDiff {
                name: "sd".into(),
                field: "surface_pressure".into(),
                node_a: NodeId::C,
                node_b: NodeId::U,
            },
        ];
        let a = assemble(&base, &star, &recipes, VariableSet::Full).unwrap();
        let b = assemble(&shifted, &star, &recipes, VariableSet::Full).unwrap();
        for i in 0..a.n_rows() {
            assert_abs_diff_eq!(
                b.column("raw").unwrap()[i] - a.column("raw").unwrap()[i],
                100.0,
                epsilon = 1e-9
            );
            assert_abs_diff_eq!(
                b.column("sd").unwrap()[i],
                a.column("sd").unwrap()[i],
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn table_io_roundtrip() {
        let set = synth_gridded(&[("surface_pressure", |t, lat, lon| t * 0.37 + lat - lon)], 12);
        let star = test_star();
        let recipes = default_recipes(&["surface_pressure".to_string()], VariableSet::Full);
        let table = assemble(&set, &star, &recipes, VariableSet::Full).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("features");
        write_feature_table(&table, &recipes, &stem).unwrap();
        let back = load_feature_table(&stem).unwrap();
        assert_eq!(back.names, table.names);
        assert_eq!(back.columns, table.columns);
        assert_eq!(back.times, table.times);
    }
}
