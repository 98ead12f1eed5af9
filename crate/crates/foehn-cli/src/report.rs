//! The `report` subcommand: renders the SVG figures and a REPORT.md summary
//! from the CSV artifacts earlier stages left in the workspace.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use foehn_core::features::VariableSet;
use foehn_core::learners::LearnerKind;
use foehn_core::{Error, Result};

use crate::commands::{Loaded, Workspace};
use crate::svg;
use crate::util::{info, write_atomic};

const LEARNERS: [LearnerKind; 3] = [LearnerKind::Lasso, LearnerKind::Stabsel, LearnerKind::Gbt];
const SETS: [VariableSet; 2] = [VariableSet::Direct, VariableSet::Full];

/// Reference values from the original study. They were obtained on real
/// station and reanalysis data that cannot be redistributed, so this pipeline
/// documents them as target magnitudes instead of asserting them in tests.
const REFERENCE_TARGETS: &str = "\
## Reference targets

The values below come from the study this pipeline reimplements. The
underlying station and reanalysis data are not redistributable, so they are
reference magnitudes for plausibility reading only, never test assertions.

| quantity | reference value |
|---|---|
| mean test Brier score, lasso (full set) | 0.0261 |
| mean test Brier score, stability selection (full set) | 0.0276 |
| mean test Brier score, boosted trees (full set) | 0.0283 |
| Altdorf false negative rate at threshold 0.5 | 15.7% |
| Altdorf false positive rate at threshold 0.5 | 0.4% |
| Altdorf percent correct at threshold 0.5 | 98.8% |
| Altdorf mean annual foehn duration | 482.4 h/year |
";

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let mut lines = text.lines().map(str::to_string);
    let _header = lines
        .next()
        .ok_or_else(|| Error::Integrity(format!("{}: empty file", path.display())))?;
    Ok(lines.filter(|l| !l.trim().is_empty()).collect())
}

fn field<T: std::str::FromStr>(cols: &[&str], i: usize, path: &Path) -> Result<T> {
    cols.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Integrity(format!("{}: bad field {i}", path.display())))
}

fn opt_field(cols: &[&str], i: usize) -> Option<f64> {
    cols.get(i).and_then(|s| s.trim().parse().ok())
}

/// `year,recon_annual_mean,obs_annual_mean,...`
fn read_years(path: &Path) -> Result<(Vec<i32>, Vec<f64>, Vec<Option<f64>>)> {
    let mut years = Vec::new();
    let mut recon = Vec::new();
    let mut obs = Vec::new();
    for line in read_lines(path)? {
        let cols: Vec<&str> = line.split(',').collect();
        years.push(field(&cols, 0, path)?);
        recon.push(field(&cols, 1, path)?);
        obs.push(opt_field(&cols, 2));
    }
    Ok((years, recon, obs))
}

/// `t,year,month,y,trend,ci_lo,ci_hi,seasonal,remainder`
fn read_str(path: &Path) -> Result<(i32, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut start_year = None;
    let mut trend = Vec::new();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for line in read_lines(path)? {
        let cols: Vec<&str> = line.split(',').collect();
        if start_year.is_none() {
            start_year = Some(field(&cols, 1, path)?);
        }
        trend.push(field(&cols, 4, path)?);
        lo.push(field(&cols, 5, path)?);
        hi.push(field(&cols, 6, path)?);
    }
    let start_year =
        start_year.ok_or_else(|| Error::Integrity(format!("{}: no rows", path.display())))?;
    Ok((start_year, trend, lo, hi))
}

/// `month,<decade...>,all`
fn read_decades(path: &Path) -> Result<(BTreeMap<i32, [f64; 12]>, [f64; 12])> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Integrity(format!("{}: empty file", path.display())))?;
    let names: Vec<&str> = header.split(',').skip(1).collect();
    if names.last() != Some(&"all") {
        return Err(Error::Integrity(format!("{}: unexpected header", path.display())));
    }
    let decade_ids: Vec<i32> = names[..names.len() - 1]
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Integrity(format!("{}: bad decade {s:?}", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut decades: BTreeMap<i32, [f64; 12]> =
        decade_ids.iter().map(|&d| (d, [0.0; 12])).collect();
    let mut mean = [0.0; 12];
    for (m, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        for (k, &d) in decade_ids.iter().enumerate() {
            decades.get_mut(&d).unwrap()[m] = field(&cols, k + 1, path)?;
        }
        mean[m] = field(&cols, decade_ids.len() + 1, path)?;
    }
    Ok((decades, mean))
}

/// `month,h00..h23`
fn read_hovmoller(path: &Path) -> Result<[[f64; 24]; 12]> {
    let mut out = [[0.0; 24]; 12];
    for (m, line) in read_lines(path)?.iter().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        for h in 0..24 {
            out[m][h] = field(&cols, h + 1, path)?;
        }
    }
    Ok(out)
}

/// Weighted mean test Brier per (learner, set) from a score CSV.
fn read_cv_means(path: &Path) -> Result<BTreeMap<(String, String), f64>> {
    let mut acc: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    for line in read_lines(path)? {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 10 || cols[4] != "test" {
            continue;
        }
        let brier: f64 = field(&cols, 5, path)?;
        let n: f64 = field(&cols, 9, path)?;
        let e = acc
            .entry((cols[1].to_string(), cols[2].to_string()))
            .or_insert((0.0, 0.0));
        e.0 += brier * n;
        e.1 += n;
    }
    Ok(acc
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n))
        .collect())
}

pub fn report(loaded: &Loaded, out: &Path, station: Option<&str>) -> Result<()> {
    let ws = Workspace(out.to_path_buf());
    let mut md = String::from("# Foehn pipeline report\n\n## Artifacts\n\n");
    let mut rendered = 0usize;

    for st in loaded.valleys(station)? {
        let id = &st.meta.id;
        let _ = writeln!(md, "### Station {id}\n");

        for learner in LEARNERS {
            for set in SETS {
                let years_path = ws.recon_years(id, learner, set);
                if years_path.exists() {
                    let (years, recon, obs) = read_years(&years_path)?;
                    let svg_doc = svg::annual_series(
                        &format!("{id}: annual mean foehn probability ({learner}, {set})"),
                        &years,
                        &recon,
                        &obs,
                    )?;
                    let name = format!("annual_{id}_{learner}_{set}.svg");
                    write_atomic(&ws.report(&name), svg_doc.as_bytes())?;
                    let _ = writeln!(md, "- annual series: `report/{name}`");
                    rendered += 1;
                }
                let str_path = ws.str_fit(id, learner, set);
                if str_path.exists() {
                    let (start_year, trend, lo, hi) = read_str(&str_path)?;
                    let svg_doc = svg::trend_band(
                        &format!("{id}: trend with 95% band ({learner}, {set})"),
                        start_year,
                        &trend,
                        &lo,
                        &hi,
                    )?;
                    let name = format!("trend_{id}_{learner}_{set}.svg");
                    write_atomic(&ws.report(&name), svg_doc.as_bytes())?;
                    let _ = writeln!(md, "- trend decomposition: `report/{name}`");
                    rendered += 1;
                }
                let dec_path = ws.decades(id, learner, set);
                if dec_path.exists() {
                    let (decades, mean) = read_decades(&dec_path)?;
                    let svg_doc = svg::decade_seasonal(
                        &format!("{id}: seasonal component per decade ({learner}, {set})"),
                        &decades,
                        &mean,
                    )?;
                    let name = format!("decade_seasonal_{id}_{learner}_{set}.svg");
                    write_atomic(&ws.report(&name), svg_doc.as_bytes())?;
                    let _ = writeln!(md, "- decade seasonal cycles: `report/{name}`");
                    rendered += 1;
                }
            }
        }

        // hovmoller heatmaps from the aggregate stage, one per decade file
        let agg_dir = ws.0.join("aggregate");
        if agg_dir.is_dir() {
            let prefix = format!("{id}_hovmoller_");
            let mut files: Vec<String> = std::fs::read_dir(&agg_dir)?
                .filter_map(|e| e.ok())
                .filter_map(|e| e.file_name().into_string().ok())
                .filter(|n| n.starts_with(&prefix) && n.ends_with(".csv"))
                .collect();
            files.sort();
            for file in files {
                let decade = file
                    .trim_start_matches(&prefix)
                    .trim_end_matches(".csv")
                    .to_string();
                let matrix = read_hovmoller(&agg_dir.join(&file))?;
                let svg_doc = svg::hovmoller(
                    &format!("{id}: mean probability by month and hour, {decade}s"),
                    &matrix,
                )?;
                let name = format!("hovmoller_{id}_{decade}.svg");
                write_atomic(&ws.report(&name), svg_doc.as_bytes())?;
                let _ = writeln!(md, "- climatology heatmap ({decade}s): `report/{name}`");
                rendered += 1;
            }
        }

        // Brier bars over every scored (learner, set) combination
        let mut labels = Vec::new();
        let mut values = Vec::new();
        let mut table = String::new();
        for set in SETS {
            let cv_path = ws.cv(id, set);
            if !cv_path.exists() {
                continue;
            }
            for ((learner, set_name), brier) in read_cv_means(&cv_path)? {
                labels.push(format!("{learner}/{set_name}"));
                values.push(brier);
                let _ = writeln!(table, "| {learner} | {set_name} | {brier:.6} |");
            }
        }
        if !labels.is_empty() {
            let svg_doc =
                svg::brier_bars(&format!("{id}: mean test Brier score"), &labels, &values)?;
            let name = format!("brier_{id}.svg");
            write_atomic(&ws.report(&name), svg_doc.as_bytes())?;
            let _ = writeln!(md, "- Brier comparison: `report/{name}`\n");
            let _ = writeln!(md, "| learner | set | mean test Brier |\n|---|---|---|");
            md.push_str(&table);
            md.push('\n');
            rendered += 1;
        }
    }

    if rendered == 0 {
        return Err(Error::Config(
            "no artifacts to report on; run the pipeline stages first".into(),
        ));
    }
    md.push('\n');
    md.push_str(REFERENCE_TARGETS);
    write_atomic(&ws.report("REPORT.md"), md.as_bytes())?;
    info!("rendered {rendered} figures into {}", ws.report("").display());
    Ok(())
}
