//! Listening-test analysis: comparative MOS matrices, one-sample t-tests
//! and a one-dimensional classical MDS ordering of systems.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Both triangles may be given if they agree up to this.
const ANTISYMMETRY_TOLERANCE: f64 = 1e-6;

/// Pairwise comparative scores; `score(a, b) > 0` means `a` was preferred.
/// Stored complete, with `score(b, a) = -score(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmosMatrix {
    pub systems: Vec<String>,
    scores: Vec<Vec<Option<f64>>>,
}

impl CmosMatrix {
    pub fn new(systems: Vec<String>) -> Self {
        let n = systems.len();
        let mut scores = vec![vec![None; n]; n];
        for (i, row) in scores.iter_mut().enumerate() {
            row[i] = Some(0.0);
        }
        CmosMatrix { systems, scores }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.systems.iter().position(|s| s == name)
    }

    pub fn score(&self, a: usize, b: usize) -> Option<f64> {
        self.scores[a][b]
    }

    /// Records `score(a, b)` and its mirror.
    pub fn set(&mut self, a: usize, b: usize, score: f64) -> Result<()> {
        if a == b {
            if score.abs() > ANTISYMMETRY_TOLERANCE {
                return Err(Error::Cmos(format!(
                    "non-zero diagonal entry for `{}`",
                    self.systems[a]
                )));
            }
            return Ok(());
        }
        if !score.is_finite() {
            return Err(Error::Cmos(format!(
                "non-finite score for `{}` vs `{}`",
                self.systems[a], self.systems[b]
            )));
        }
        if let Some(existing) = self.scores[a][b] {
            if (existing - score).abs() > ANTISYMMETRY_TOLERANCE {
                return Err(Error::Cmos(format!(
                    "`{}` vs `{}` given as both {} and {}",
                    self.systems[a], self.systems[b], existing, score
                )));
            }
        }
        self.scores[a][b] = Some(score);
        self.scores[b][a] = Some(-score);
        Ok(())
    }

    /// Square CSV with every known score; missing pairs are left blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("A\\B");
        for s in &self.systems {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
        for (i, name) in self.systems.iter().enumerate() {
            out.push_str(name);
            for j in 0..self.systems.len() {
                match self.scores[i][j] {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Reads a CMOS table: a header row of column systems and one row per row
/// system, `score(row, column)` in each cell. The table may be any shape
/// (e.g. upper triangle only); blank cells are unknown and a trailing `*`
/// significance flag is ignored.
pub fn load_cmos(path: impl AsRef<Path>) -> Result<CmosMatrix> {
    let path = path.as_ref();
    let mut text = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_cmos(&text)
}

pub fn parse_cmos(text: &str) -> Result<CmosMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Cmos(e.to_string()))?;
    let (header, body) = rows
        .split_first()
        .ok_or_else(|| Error::Cmos("empty table".into()))?;
    let columns: Vec<&str> = header.iter().skip(1).collect();

    let mut systems: Vec<String> = Vec::new();
    let mut add = |name: &str| {
        if !systems.iter().any(|s| s == name) {
            systems.push(name.to_string());
        }
    };
    body.iter()
        .filter_map(|r| r.get(0))
        .filter(|s| !s.is_empty())
        .for_each(&mut add);
    columns
        .iter()
        .filter(|s| !s.is_empty())
        .for_each(|s| add(s));
    if systems.len() < 2 {
        return Err(Error::Cmos(
            "need at least two systems to form a pair".into(),
        ));
    }

    let mut matrix = CmosMatrix::new(systems);
    for row in body {
        let Some(a_name) = row.get(0).filter(|s| !s.is_empty()) else {
            continue;
        };
        let a = matrix.index_of(a_name).expect("registered above");
        for (col, cell) in row.iter().skip(1).enumerate() {
            let cell = cell.trim_end_matches('*').trim();
            if cell.is_empty() || cell == "-" {
                continue;
            }
            let b_name = columns.get(col).filter(|s| !s.is_empty()).ok_or_else(|| {
                Error::Cmos(format!("row `{a_name}` has a value in an unnamed column"))
            })?;
            let b = matrix.index_of(b_name).expect("registered above");
            let value: f64 = cell.replace('\u{2212}', "-").parse().map_err(|_| {
                Error::Cmos(format!("bad score `{cell}` for `{a_name}` vs `{b_name}`"))
            })?;
            matrix.set(a, b, value)?;
        }
    }
    Ok(matrix)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub df: f64,
}

/// Student one-sample t-test of `ratings` against the mean `mu0`.
pub fn one_sample_ttest(ratings: &[f64], mu0: f64) -> Result<TTest> {
    let n = ratings.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "t-test needs at least two ratings".into(),
        ));
    }
    let nf = n as f64;
    let mean = ratings.iter().sum::<f64>() / nf;
    let ss: f64 = ratings.iter().map(|r| (r - mean).powi(2)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::InvalidInput("ratings have zero variance".into()));
    }
    let t = (mean - mu0) / (sd / nf.sqrt());
    let df = nf - 1.0;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest { t, p, df })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdsResult {
    pub systems: Vec<String>,
    pub coordinates: Vec<f64>,
    /// System names by ascending coordinate.
    pub ordering: Vec<String>,
}

impl MdsResult {
    /// `system<TAB>coordinate` lines followed by the ordering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (s, c) in self.systems.iter().zip(&self.coordinates) {
            let _ = writeln!(out, "{s}\t{c:.6}");
        }
        let _ = writeln!(out, "{}", self.ordering.join(" < "));
        out
    }
}

/// Classical (Torgerson) scaling of an arbitrary symmetric dissimilarity
/// matrix onto its leading axis.
pub fn classical_mds_1d(dissimilarity: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = dissimilarity.nrows();
    let sq = dissimilarity.map(|d| d * d);
    let centering = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let gram = -0.5 * &centering * sq * &centering;
    let eigen = SymmetricEigen::new(gram);
    let (lead, &value) = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Cmos("empty matrix".into()))?;
    let scale = dissimilarity.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if scale == 0.0 || value <= 1e-12 * scale * scale {
        return Err(Error::Cmos(
            "dissimilarities are all zero; no axis to project on".into(),
        ));
    }
    Ok(eigen
        .eigenvectors
        .column(lead)
        .iter()
        .map(|v| v * value.sqrt())
        .collect())
}

/// Projects systems onto one axis using `|score(a, b)|` as dissimilarity,
/// oriented so `reference` sits on the positive side.
pub fn mds_1d(matrix: &CmosMatrix, reference: &str) -> Result<MdsResult> {
    let r = matrix.index_of(reference).ok_or_else(|| {
        Error::Cmos(format!(
            "reference system `{reference}` is not in the matrix"
        ))
    })?;
    let n = matrix.systems.len();
    let mut d = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let score = matrix.score(i, j).ok_or_else(|| {
                Error::Cmos(format!(
                    "missing score for pair `{}` vs `{}`",
                    matrix.systems[i], matrix.systems[j]
                ))
            })?;
            d[(i, j)] = score.abs();
        }
    }
    let mut coords = classical_mds_1d(&d)?;
    if coords[r] < 0.0 {
        coords.iter_mut().for_each(|c| *c = -*c);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        coords[a]
            .total_cmp(&coords[b])
            .then_with(|| matrix.systems[a].cmp(&matrix.systems[b]))
    });
    Ok(MdsResult {
        systems: matrix.systems.clone(),
        coordinates: coords,
        ordering: order
            .into_iter()
            .map(|i| matrix.systems[i].clone())
            .collect(),
    })
}
