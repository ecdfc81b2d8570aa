//! Benchmarking split policies on real tabular data.
//!
//! A CSV file is reduced to a centered design matrix and target, then the
//! average held-out loss over random row permutations is compared for
//! `p = m/2`, `p = 3m/4` and the integrity-optimal `p`.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrity::{optimal_p, SplitProblem};
use crate::lstsq;
use crate::rng::{chunked_reduce, stream_rng, MomentSum};

/// Permutation count used when none is given.
pub const DEFAULT_PERMUTATIONS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    /// Column (0-based, in file order) used as the target.
    pub target_column: usize,
    /// Columns (0-based, in file order) ignored entirely, e.g. dates or secondary targets.
    pub drop_columns: Vec<usize>,
    pub has_header: bool,
    /// Cell value marking a missing entry to be replaced by the column mean.
    pub missing_token: String,
    pub delimiter: u8,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            target_column: 0,
            drop_columns: Vec::new(),
            has_header: false,
            missing_token: "?".to_string(),
            delimiter: b',',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub log: Vec<String>,
}

/// Centered design matrix and target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    target: DVector<f64>,
    provenance: Provenance,
}

impl Dataset {
    /// Builds a dataset from raw values, removing column means from both `features` and `target`.
    pub fn from_raw(features: DMatrix<f64>, target: DVector<f64>) -> Result<Self> {
        Self::centered(features, target, Provenance::default())
    }

    fn centered(mut features: DMatrix<f64>, mut target: DVector<f64>, mut provenance: Provenance) -> Result<Self> {
        if features.nrows() != target.len() {
            return Err(Error::domain(format!(
                "features have {} rows but target has {}",
                features.nrows(),
                target.len()
            )));
        }
        if features.nrows() == 0 {
            return Err(Error::domain("dataset has no rows"));
        }
        if features.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset contains non-finite values"));
        }
        for mut col in features.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        let mean = target.mean();
        target.add_scalar_mut(-mean);
        provenance
            .log
            .push("removed column means from features and target".into());
        Ok(Self {
            features,
            target,
            provenance,
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Number of rows.
    pub fn m(&self) -> u64 {
        self.features.nrows() as u64
    }

    /// Number of feature columns.
    pub fn n(&self) -> u64 {
        self.features.ncols() as u64
    }
}

enum Cell {
    Value(f64),
    Missing,
    NotANumber,
}

pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(file, options, Some(path.to_path_buf()))
}

/// Reads a delimited table.
///
/// Dropped columns are never parsed. Rows holding a NaN (or empty) cell are
/// removed, then every `missing_token` cell is replaced by the mean of its
/// column over the remaining rows. Finally the target is split off and all
/// columns are centered.
pub fn parse_dataset<R: Read>(reader: R, options: &LoadOptions, source: Option<PathBuf>) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .delimiter(options.delimiter)
        .flexible(false)
        .from_reader(reader);
    let dropped: BTreeSet<usize> = options.drop_columns.iter().copied().collect();
    if dropped.contains(&options.target_column) {
        return Err(Error::domain(format!(
            "target column {} is also listed in drop_columns",
            options.target_column
        )));
    }

    let mut log = Vec::new();
    let mut kept: Option<Vec<usize>> = None;
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut nan_rows = 0usize;
    for record in csv.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let cols = kept.get_or_insert_with(|| (0..record.len()).filter(|c| !dropped.contains(c)).collect());
        if options.target_column >= record.len() {
            return Err(Error::domain(format!(
                "target column {} out of range for {} columns",
                options.target_column,
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(cols.len());
        let mut has_nan = false;
        for &c in cols.iter() {
            match parse_cell(&record[c], &options.missing_token, line, c)? {
                Cell::Value(v) => row.push(Some(v)),
                Cell::Missing => row.push(None),
                Cell::NotANumber => {
                    has_nan = true;
                    break;
                }
            }
        }
        if has_nan {
            nan_rows += 1;
        } else {
            rows.push(row);
        }
    }
    let kept = kept.ok_or_else(|| Error::domain("input contains no data rows"))?;
    if !dropped.is_empty() {
        log.push(format!("dropped columns {:?}", dropped));
    }
    if nan_rows > 0 {
        log.push(format!("dropped {nan_rows} rows containing NaN or empty cells"));
    }
    if rows.is_empty() {
        return Err(Error::domain("dataset is empty after dropping rows with NaN"));
    }

    let width = kept.len();
    let m = rows.len();
    let mut matrix = DMatrix::<f64>::zeros(m, width);
    for (j, &file_col) in kept.iter().enumerate() {
        let present: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
        let missing = m - present.len();
        let fill = if missing > 0 {
            if present.is_empty() {
                return Err(Error::domain(format!(
                    "column {file_col} has no values other than '{}'",
                    options.missing_token
                )));
            }
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            log.push(format!(
                "column {file_col}: imputed {missing} '{}' cells with mean {mean} (computed after row drops)",
                options.missing_token
            ));
            mean
        } else {
            0.0
        };
        for (i, r) in rows.iter().enumerate() {
            matrix[(i, j)] = r[j].unwrap_or(fill);
        }
    }

    let target_pos = kept
        .iter()
        .position(|&c| c == options.target_column)
        .expect("target column is kept");
    let target = matrix.column(target_pos).into_owned();
    let features = matrix.remove_column(target_pos);
    log.push(format!(
        "target = column {}; {} rows x {} feature columns",
        options.target_column,
        m,
        features.ncols()
    ));
    Dataset::centered(features, target, Provenance { source, log })
}

fn parse_cell(raw: &str, missing_token: &str, line: u64, column: usize) -> Result<Cell> {
    let cell = raw.trim();
    if cell == missing_token {
        return Ok(Cell::Missing);
    }
    if cell.is_empty() {
        return Ok(Cell::NotANumber);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_nan() => Ok(Cell::NotANumber),
        Ok(v) if v.is_finite() => Ok(Cell::Value(v)),
        Ok(_) => Err(Error::Parse {
            line,
            column,
            message: format!("non-finite value '{cell}'"),
        }),
        Err(_) => Err(Error::Parse {
            line,
            column,
            message: format!("'{cell}' is neither a number nor the missing token '{missing_token}'"),
        }),
    }
}

fn csv_error(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermutationLoss {
    pub mean_loss: f64,
    pub std_err: f64,
    /// Permutations whose training block was rank deficient (fitted by minimum norm).
    pub rank_deficient_fits: u64,
}

/// Mean held-out loss `(1/(m-p)) |X_test b_hat - y_test|^2` over random row
/// permutations, with `b_hat` fitted on the first `p` permuted rows.
pub fn permutation_loss(data: &Dataset, p: u64, permutations: u64, seed: u64) -> Result<PermutationLoss> {
    let (m, n) = (data.m(), data.n());
    if p < n + 1 || p + 1 > m {
        return Err(Error::domain(format!(
            "training size p = {p} outside [{}, {}] for m = {m}, n = {n}",
            n + 1,
            m.saturating_sub(1)
        )));
    }
    if permutations == 0 {
        return Err(Error::domain("permutations must be at least 1"));
    }
    let (m, n, p) = (m as usize, n as usize, p as usize);
    let x = &data.features;
    let y = &data.target;
    let (sum, deficient) = chunked_reduce(
        permutations,
        || (MomentSum::default(), 0u64),
        |acc, k| {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut stream_rng(seed, k));
            let train_x = DMatrix::from_fn(p, n, |i, j| x[(order[i], j)]);
            let train_y = DVector::from_fn(p, |i, _| y[order[i]]);
            let fit = lstsq::solve(&train_x, &train_y);
            if fit.rank_deficient {
                acc.1 += 1;
            }
            let resid: f64 = order[p..]
                .iter()
                .map(|&i| (x.row(i).transpose().dot(&fit.coeffs) - y[i]).powi(2))
                .sum();
            acc.0.push(resid / (m - p) as f64);
        },
        |t, part| {
            t.0.merge(&part.0);
            t.1 += part.1;
        },
    );
    Ok(PermutationLoss {
        mean_loss: sum.mean(),
        std_err: sum.std_err(),
        rank_deficient_fits: deficient,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Half,
    ThreeQuarter,
    Optimal,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Half => "half",
            Policy::ThreeQuarter => "three_quarter",
            Policy::Optimal => "optimal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyResult {
    pub policy: Policy,
    pub p: u64,
    pub loss: PermutationLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub m: u64,
    pub n: u64,
    pub half: PolicyResult,
    pub three_quarter: PolicyResult,
    pub optimal: PolicyResult,
    /// `optimal.p / m`.
    pub optimal_ratio: f64,
    pub permutations: u64,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl BenchReport {
    pub fn policies(&self) -> [&PolicyResult; 3] {
        [&self.half, &self.three_quarter, &self.optimal]
    }
}

/// Training size the optimal policy uses for an `m x n` dataset, with a note
/// when the analytic domain is empty and `m - 1` is used instead.
pub fn optimal_policy_p(m: u64, n: u64) -> Result<(u64, Option<String>)> {
    if m >= n + 5 {
        let p = optimal_p(&SplitProblem::new(m, n)?)?;
        Ok((p.clamp(n + 1, m - 1), None))
    } else {
        Ok((
            m - 1,
            Some(format!(
                "m = {m} < n + 5 = {}: analytic optimum undefined, optimal policy falls back to p = m - 1",
                n + 5
            )),
        ))
    }
}

/// Permutation losses of the three split policies.
pub fn bench_table(data: &Dataset, permutations: u64, seed: u64) -> Result<BenchReport> {
    let (m, n) = (data.m(), data.n());
    if m < n + 2 {
        return Err(Error::domain(format!("benchmark needs m >= n + 2 (m = {m}, n = {n})")));
    }
    let mut notes = Vec::new();
    let half_p = (m as f64 / 2.0).round() as u64;
    let three_p = (3.0 * m as f64 / 4.0).round() as u64;
    let (opt_p, note) = optimal_policy_p(m, n)?;
    notes.extend(note);

    let run = |policy: Policy, p: u64| -> Result<PolicyResult> {
        Ok(PolicyResult {
            policy,
            p,
            loss: permutation_loss(data, p, permutations, seed)?,
        })
    };
    let half = run(Policy::Half, half_p)?;
    let three_quarter = run(Policy::ThreeQuarter, three_p)?;
    let optimal = run(Policy::Optimal, opt_p)?;
    for r in [&half, &three_quarter, &optimal] {
        if r.loss.rank_deficient_fits > 0 {
            notes.push(format!(
                "{}: {} of {permutations} fits rank deficient, used minimum-norm least squares",
                r.policy.name(),
                r.loss.rank_deficient_fits
            ));
        }
    }
    Ok(BenchReport {
        m,
        n,
        optimal_ratio: opt_p as f64 / m as f64,
        half,
        three_quarter,
        optimal,
        permutations,
        seed,
        notes,
    })
}
