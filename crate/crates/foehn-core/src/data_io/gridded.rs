//! Gridded field sets: a directory with `manifest.json` plus one flat
//! little-endian float64 `.bin` per field, time-major then lat then lon.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;


use serde::{Deserialize, Serialize};

use crate::time::{format_utc, parse_utc, TimeAxis, HOUR_SECS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lat0: f64,
    pub lon0: f64,
    pub dlat: f64,
    pub dlon: f64,
    pub nlat: usize,
    pub nlon: usize,
}

impl GridSpec {
    pub fn lat(&self, i: usize) -> f64 {
        self.lat0 + self.dlat * i as f64
    }

    pub fn lon(&self, j: usize) -> f64 {
        self.lon0 + self.dlon * j as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.dlat <= 0.0 || self.dlon <= 0.0 || self.nlat < 2 || self.nlon < 2 {
            return Err(Error::Integrity(
                "grid must be strictly increasing with at least 2 nodes per axis".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestTimes {
    start: String,
    count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    grid: GridSpec,
    times: ManifestTimes,
    /// field name -> relative .bin file; dtype is always little-endian f64
    fields: BTreeMap<String, String>,
}

/// All fields share the grid and hourly time axis; values are gap-free.
#[derive(Debug, Clone)]
pub struct GriddedFieldSet {
    pub grid: GridSpec,
    pub times: TimeAxis,
    pub fields: BTreeMap<String, Vec<f64>>,
}

impl GriddedFieldSet {
    pub fn new(grid: GridSpec, times: TimeAxis) -> Self {
        GriddedFieldSet {
            grid,
            times,
            fields: BTreeMap::new(),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.times.len * self.grid.nlat * self.grid.nlon
    }

    pub fn insert_field(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.cell_count() {
            return Err(Error::Integrity(format!(
                "field {name}: expected {} values, got {}",
                self.cell_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity(format!(
                "field {name}: non-finite cell (reanalysis contract is gap-free)"
            )));
        }
        self.fields.insert(name.to_string(), values);
        Ok(())
    }

    /// 2-D slice (nlat x nlon, row-major over lat then lon) of `field` at time index `ti`.
    pub fn slice_at(&self, field: &str, ti: usize) -> Result<&[f64]> {
        let values = self
            .fields
            .get(field)
            .ok_or_else(|| Error::Schema(format!("unknown field {field:?}")))?;
        let n = self.grid.nlat * self.grid.nlon;
        if ti >= self.times.len {
            return Err(Error::Range(format!("time index {ti} out of axis")));
        }
        Ok(&values[ti * n..(ti + 1) * n])
    }

    pub fn value(&self, field: &str, ti: usize, lat_i: usize, lon_j: usize) -> Result<f64> {
        let slice = self.slice_at(field, ti)?;
        Ok(slice[lat_i * self.grid.nlon + lon_j])
    }
}

/// Loads a gridded set from its directory (the one holding `manifest.json`).
pub fn load_gridded(dir: &Path) -> Result<GriddedFieldSet> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_reader(std::fs::File::open(&manifest_path)?)?;
    manifest.grid.validate()?;
    let start = parse_utc(&manifest.times.start)?;
    let times = TimeAxis::new(start, HOUR_SECS, manifest.times.count);
    let mut set = GriddedFieldSet::new(manifest.grid, times);
    for (name, file) in &manifest.fields {
        let path = dir.join(file);
        let mut bytes = Vec::new();
        std::fs::File::open(&path)?.read_to_end(&mut bytes)?;
        if bytes.len() != set.cell_count() * 8 {
            return Err(Error::Integrity(format!(
                "field {name}: file {} holds {} bytes, expected {}",
                path.display(),
                bytes.len(),
                set.cell_count() * 8
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        set.insert_field(name, values)?;
    }
    Ok(set)
}

/// Writes a gridded set into `dir` (created if needed) in the manifest contract.
pub fn write_gridded(set: &GriddedFieldSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut fields = BTreeMap::new();
    for (name, values) in &set.fields {
        let file = format!("{name}.bin");
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(&file))?);
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        fields.insert(name.clone(), file);
    }
    let manifest = Manifest {
        grid: set.grid,
        times: ManifestTimes {
            start: format_utc(set.times.start),
            count: set.times.len,
        },
        fields,
    };
    let f = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::parse_utc;

    fn small_set() -> GriddedFieldSet {
        let grid = GridSpec {
            lat0: 46.0,
            lon0: 8.0,
            dlat: 1.0,
            dlon: 1.0,
            nlat: 2,
            nlon: 2,
        };
        let times = TimeAxis::new(parse_utc("2020-01-01T00:00:00Z").unwrap(), HOUR_SECS, 1);
        let mut set = GriddedFieldSet::new(grid, times);
        set.insert_field("surface_pressure", vec![1.0, 2.0, 3.0, 4.0])
            .unwrap();
        set
    }

    #[test]
    fn single_field_roundtrip() {
        let set = small_set();
        let dir = tempfile::tempdir().unwrap();
        write_gridded(&set, dir.path()).unwrap();
        let loaded = load_gridded(dir.path()).unwrap();
        assert_eq!(loaded.fields["surface_pressure"], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(loaded.times.len, 1);
    }

    #[test]
    fn wrong_length_rejected() {
        let mut set = small_set();
        assert!(matches!(
            set.insert_field("bad", vec![1.0; 3]),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn nan_cell_rejected() {
        let mut set = small_set();
        assert!(matches!(
            set.insert_field("bad", vec![1.0, f64::NAN, 3.0, 4.0]),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn unknown_field_names_accepted() {
        let mut set = small_set();
        set.insert_field("made_up_name_900", vec![0.0; 4]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_gridded(&set, dir.path()).unwrap();
        let loaded = load_gridded(dir.path()).unwrap();
        assert!(loaded.fields.contains_key("made_up_name_900"));
    }
}
