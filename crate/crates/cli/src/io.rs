use std::fs::File;
use std::io::Write;
use std::path::Path;

use alphait::simplex::zero_pattern;
use alphait::{Composition, CompositionalField, Error as CoreError, Location};
use anyhow::{anyhow, bail, Context, Result};

/// Floats are written with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Number of compositions with exactly `k` zero parts, `k = 0..D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroCensus {
    pub by_zero_count: Vec<usize>,
}

impl ZeroCensus {
    pub fn of(field: &CompositionalField) -> Self {
        let mut by_zero_count = vec![0; field.dim() + 1];
        for x in field.compositions() {
            by_zero_count[zero_pattern(x).zero_count()] += 1;
        }
        Self { by_zero_count }
    }

    pub fn has_zeros(&self) -> bool {
        self.by_zero_count[1..].iter().any(|&c| c > 0)
    }

    pub fn report(&self) -> String {
        let n: usize = self.by_zero_count.iter().sum();
        self.by_zero_count
            .iter()
            .enumerate()
            .map(|(k, c)| {
                format!(
                    "{:.0}% with {k} zero{}",
                    100.0 * *c as f64 / n as f64,
                    if k == 1 { "" } else { "s" }
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedField {
    pub field: CompositionalField,
    pub part_names: Vec<String>,
    pub census: ZeroCensus,
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

/// Numeric table with a header; every row must have the header's width.
/// Returns the header and `(line number, values)` rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<(u64, Vec<f64>)>)> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            anyhow!("{}:{line}: {e}", path.display())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            bail!(
                "{}:{line}: expected {} columns, found {}",
                path.display(),
                header.len(),
                rec.len()
            );
        }
        let vals = rec
            .iter()
            .enumerate()
            .map(|(c, s)| {
                s.parse::<f64>()
                    .map_err(|_| anyhow!("{}:{line}: column {:?} is not a number: {s:?}", path.display(), header[c]))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, vals));
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok((header, rows))
}

/// Reads `x, y, part_1, …, part_D`; parts are renormalized within the
/// closure tolerance and tiny values snapped to zero.
pub fn load_field(path: &Path) -> Result<LoadedField> {
    let (header, rows) = read_table(path)?;
    if header.len() < 4 {
        bail!("{}: need x, y and at least two part columns", path.display());
    }
    let mut locations = Vec::with_capacity(rows.len());
    let mut compositions = Vec::with_capacity(rows.len());
    for (line, vals) in &rows {
        let x = Composition::new(vals[2..].to_vec())
            .map_err(|e| anyhow!("{}:{line}: {e}", path.display()))?;
        locations.push([vals[0], vals[1]]);
        compositions.push(x);
    }
    let field = CompositionalField::new(locations, compositions).map_err(|e| match e {
        CoreError::DuplicateLocation { index } => anyhow!(
            "{}:{}: duplicate coordinates ({}, {})",
            path.display(),
            rows[index].0,
            rows[index].1[0],
            rows[index].1[1]
        ),
        other => anyhow!("{}: {other}", path.display()),
    })?;
    let census = ZeroCensus::of(&field);
    Ok(LoadedField {
        field,
        part_names: header[2..].to_vec(),
        census,
    })
}

/// Reads `x, y, z_1, …, z_k` score tables.
pub fn load_scores(path: &Path) -> Result<(Vec<Location>, Vec<Vec<f64>>, Vec<String>)> {
    let (header, rows) = read_table(path)?;
    if header.len() < 3 {
        bail!("{}: need x, y and at least one score column", path.display());
    }
    let locs = rows.iter().map(|(_, v)| [v[0], v[1]]).collect();
    let scores = rows.iter().map(|(_, v)| v[2..].to_vec()).collect();
    Ok((locs, scores, header[2..].to_vec()))
}

pub fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_points(
    path: &Path,
    names: &[String],
    locations: &[Location],
    values: &[Vec<f64>],
) -> Result<()> {
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend(names.iter().cloned());
    let rows: Vec<Vec<String>> = locations
        .iter()
        .zip(values)
        .map(|(s, v)| {
            let mut r = vec![fmt_f64(s[0]), fmt_f64(s[1])];
            r.extend(v.iter().map(|x| fmt_f64(*x)));
            r
        })
        .collect();
    write_rows(path, &header, &rows)
}

pub fn write_field(path: &Path, field: &CompositionalField, names: &[String]) -> Result<()> {
    let values: Vec<Vec<f64>> = field
        .compositions()
        .iter()
        .map(|c| c.parts().to_vec())
        .collect();
    write_points(path, names, field.locations(), &values)
}

pub fn default_part_names(d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("part{k}")).collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_file() {
        let f = tmp_csv("x,y,a,b,c\n0,0,0.2,0.3,0.5\n1,0,0.1,0.1,0.8\n0,1,0.5,0.5,0\n");
        let l = load_field(f.path()).unwrap();
        assert_eq!(l.field.len(), 3);
        assert_eq!(l.part_names, vec!["a", "b", "c"]);
        assert_eq!(l.census.by_zero_count, vec![2, 1, 0, 0]);
    }

    #[test]
    fn reports_the_offending_line() {
        let f = tmp_csv("x,y,a,b\n0,0,0.5,0.5\n1,1,0.5,0.4\n");
        let err = load_field(f.path()).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
        let f = tmp_csv("x,y,a,b\n0,0,0.5,0.5\n0,0,0.4,0.6\n");
        let err = load_field(f.path()).unwrap_err().to_string();
        assert!(err.contains(":3:") && err.contains("duplicate"), "{err}");
        let f = tmp_csv("x,y,a,b\n0,0,0.5,oops\n");
        assert!(load_field(f.path()).unwrap_err().to_string().contains(":2:"));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }
}
