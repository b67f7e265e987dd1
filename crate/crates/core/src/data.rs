//! Time-series ingestion, min-max normalization, chronological splitting,
//! and the built-in synthetic generators.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of f64, rows are timesteps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in &rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: n_rows,
            cols: n_cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// A multivariate time series with named columns and designated input and
/// output column index lists. Values contain no NaN once ingested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesSet {
    pub column_names: Vec<String>,
    pub values: Matrix,
    pub input_columns: Vec<usize>,
    pub output_columns: Vec<usize>,
}

impl TimeSeriesSet {
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_inputs(&self) -> usize {
        self.input_columns.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_columns.len()
    }

    fn select(&self, cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.len(), cols.len());
        for t in 0..self.len() {
            for (j, &c) in cols.iter().enumerate() {
                m.set(t, j, self.values.get(t, c));
            }
        }
        m
    }

    /// The T x n_inputs matrix fed to phenotypes.
    pub fn input_matrix(&self) -> Matrix {
        self.select(&self.input_columns)
    }

    /// The T x n_outputs target matrix.
    pub fn output_matrix(&self) -> Matrix {
        self.select(&self.output_columns)
    }

    fn rows_slice(&self, range: std::ops::Range<usize>) -> TimeSeriesSet {
        let mut values = Matrix::zeros(range.len(), self.values.cols());
        for (i, t) in range.clone().enumerate() {
            values.row_mut(i).copy_from_slice(self.values.row(t));
        }
        TimeSeriesSet {
            column_names: self.column_names.clone(),
            values,
            input_columns: self.input_columns.clone(),
            output_columns: self.output_columns.clone(),
        }
    }
}

/// Column selection for CSV ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub input_columns: Vec<String>,
    pub output_columns: Vec<String>,
    /// Permit a column to serve as both input and output.
    #[serde(default)]
    pub allow_overlap: bool,
}

/// Load selected columns of a headered CSV file into a series set.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<TimeSeriesSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    load_csv_reader(file, schema)
}

pub fn load_csv_reader<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<TimeSeriesSet> {
    if !schema.allow_overlap {
        for name in &schema.input_columns {
            if schema.output_columns.contains(name) {
                return Err(Error::Schema(format!(
                    "column {name:?} is both input and output; set allow_overlap to permit this"
                )));
            }
        }
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Ingestion(format!("cannot read header row: {e}")))?
        .clone();

    let mut selected: Vec<String> = schema.input_columns.clone();
    for name in &schema.output_columns {
        if !selected.contains(name) {
            selected.push(name.clone());
        }
    }
    let mut col_idx = Vec::with_capacity(selected.len());
    for name in &selected {
        match headers.iter().position(|h| h == name) {
            Some(i) => col_idx.push(i),
            None => return Err(Error::Schema(format!("missing column {name:?} in CSV header"))),
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut bad_rows: Vec<(usize, String)> = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Ingestion(format!("row {row_no}: {e}")))?;
        let mut row = Vec::with_capacity(col_idx.len());
        let mut bad: Option<String> = None;
        for (&ci, name) in col_idx.iter().zip(&selected) {
            let cell = record.get(ci).unwrap_or("");
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    bad = Some(format!("column {name:?} value {cell:?}"));
                    break;
                }
            }
        }
        match bad {
            None => rows.push(row),
            Some(reason) => bad_rows.push((row_no, reason)),
        }
    }
    if !bad_rows.is_empty() {
        let listed: Vec<String> = bad_rows
            .iter()
            .take(8)
            .map(|(r, why)| format!("row {r}: {why}"))
            .collect();
        return Err(Error::Ingestion(format!(
            "{} unparseable row(s): {}{}",
            bad_rows.len(),
            listed.join("; "),
            if bad_rows.len() > 8 { "; ..." } else { "" }
        )));
    }
    if rows.is_empty() {
        return Err(Error::Ingestion("no data rows in CSV".to_string()));
    }

    let input_columns = (0..schema.input_columns.len()).collect();
    let output_columns = schema
        .output_columns
        .iter()
        .map(|n| selected.iter().position(|s| s == n).unwrap())
        .collect();
    Ok(TimeSeriesSet {
        column_names: selected,
        values: Matrix::from_rows(rows),
        input_columns,
        output_columns,
    })
}

/// Per-column min and max, fitted on the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Fit min-max parameters on a series set. Constant columns are an error.
pub fn fit_normalization(ts: &TimeSeriesSet) -> Result<NormalizationParams> {
    let cols = ts.values.cols();
    let mut min = vec![f64::INFINITY; cols];
    let mut max = vec![f64::NEG_INFINITY; cols];
    for t in 0..ts.len() {
        for (c, &v) in ts.values.row(t).iter().enumerate() {
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
    }
    for c in 0..cols {
        if max[c] <= min[c] {
            return Err(Error::DegenerateColumn(ts.column_names[c].clone()));
        }
    }
    Ok(NormalizationParams { min, max })
}

/// Scale every column to `(x - min) / (max - min)`. When `params` is given
/// (validation data) it is applied verbatim and values may leave [0, 1];
/// otherwise the parameters are fitted on `ts` itself.
pub fn normalize(
    ts: &TimeSeriesSet,
    params: Option<&NormalizationParams>,
) -> Result<(TimeSeriesSet, NormalizationParams)> {
    let params = match params {
        Some(p) => p.clone(),
        None => fit_normalization(ts)?,
    };
    let mut out = ts.clone();
    for t in 0..out.len() {
        let row = out.values.row_mut(t);
        for (c, v) in row.iter_mut().enumerate() {
            *v = (*v - params.min[c]) / (params.max[c] - params.min[c]);
        }
    }
    Ok((out, params))
}

/// Invert [`normalize`].
pub fn denormalize(ts: &TimeSeriesSet, params: &NormalizationParams) -> TimeSeriesSet {
    let mut out = ts.clone();
    for t in 0..out.len() {
        let row = out.values.row_mut(t);
        for (c, v) in row.iter_mut().enumerate() {
            *v = *v * (params.max[c] - params.min[c]) + params.min[c];
        }
    }
    out
}

/// Drop constant columns from a set, remapping the input/output index lists.
/// A constant output column is always an error since the target would be
/// degenerate.
pub fn drop_constant_columns(ts: &TimeSeriesSet) -> Result<TimeSeriesSet> {
    let cols = ts.values.cols();
    let mut keep = Vec::new();
    for c in 0..cols {
        let first = ts.values.get(0, c);
        let constant = (0..ts.len()).all(|t| ts.values.get(t, c) == first);
        if constant {
            if ts.output_columns.contains(&c) {
                return Err(Error::DegenerateColumn(ts.column_names[c].clone()));
            }
        } else {
            keep.push(c);
        }
    }
    if keep.len() == cols {
        return Ok(ts.clone());
    }
    let remap = |old: &usize| keep.iter().position(|k| k == old);
    let input_columns: Vec<usize> = ts.input_columns.iter().filter_map(remap).collect();
    if input_columns.is_empty() {
        return Err(Error::Schema("all input columns are constant".to_string()));
    }
    let output_columns: Vec<usize> = ts.output_columns.iter().filter_map(remap).collect();
    let mut values = Matrix::zeros(ts.len(), keep.len());
    for t in 0..ts.len() {
        for (j, &c) in keep.iter().enumerate() {
            values.set(t, j, ts.values.get(t, c));
        }
    }
    Ok(TimeSeriesSet {
        column_names: keep.iter().map(|&c| ts.column_names[c].clone()).collect(),
        values,
        input_columns,
        output_columns,
    })
}

/// Chronologically split and normalized data, ready for training. The
/// normalization parameters come from the training rows only; validation is
/// scaled with the same parameters (no leakage).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainValSplit {
    pub train: TimeSeriesSet,
    pub validation: TimeSeriesSet,
    pub split_fraction: f64,
    pub norm: NormalizationParams,
}

/// Split chronologically at `fraction`, fit normalization on the training
/// rows, and scale both splits. `drop_constant` removes constant columns
/// (judged on the training rows) instead of failing on them.
pub fn prepare_split(ts: &TimeSeriesSet, fraction: f64, drop_constant: bool) -> Result<TrainValSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split_fraction must be in (0,1), got {fraction}"
        )));
    }
    let cut = ((ts.len() as f64) * fraction).floor() as usize;
    if cut == 0 || cut >= ts.len() {
        return Err(Error::Config(format!(
            "split_fraction {fraction} leaves an empty split for {} rows",
            ts.len()
        )));
    }
    let mut train = ts.rows_slice(0..cut);
    let mut validation = ts.rows_slice(cut..ts.len());
    if drop_constant {
        train = drop_constant_columns(&train)?;
        // Keep validation's columns aligned with the training selection.
        let keep: Vec<usize> = train
            .column_names
            .iter()
            .map(|n| validation.column_names.iter().position(|m| m == n).unwrap())
            .collect();
        let mut values = Matrix::zeros(validation.len(), keep.len());
        for t in 0..validation.len() {
            for (j, &c) in keep.iter().enumerate() {
                values.set(t, j, validation.values.get(t, c));
            }
        }
        validation = TimeSeriesSet {
            column_names: train.column_names.clone(),
            values,
            input_columns: train.input_columns.clone(),
            output_columns: train.output_columns.clone(),
        };
    }
    let (train, norm) = normalize(&train, None)?;
    let (validation, _) = normalize(&validation, Some(&norm))?;
    Ok(TrainValSplit {
        train,
        validation,
        split_fraction: fraction,
        norm,
    })
}

/// Built-in synthetic series kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SynthKind {
    SineMix,
    MackeyGlass,
    NoisyAr { noise: f64 },
}

impl SynthKind {
    pub fn parse(name: &str) -> Result<SynthKind> {
        match name {
            "sine_mix" => Ok(SynthKind::SineMix),
            "mackey_glass" => Ok(SynthKind::MackeyGlass),
            "noisy_ar" => Ok(SynthKind::NoisyAr { noise: 0.05 }),
            other => Err(Error::Config(format!(
                "unknown synthetic kind {other:?}; expected sine_mix, mackey_glass, or noisy_ar"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SynthKind::SineMix => "sine_mix",
            SynthKind::MackeyGlass => "mackey_glass",
            SynthKind::NoisyAr { .. } => "noisy_ar",
        }
    }
}

/// Fundamental period of the sine_mix output column, used by tests.
pub const SINE_MIX_PERIOD: usize = 24;

/// Generate a deterministic synthetic series. The output column depends on
/// history beyond lag one in every kind, so recurrent structure pays off.
pub fn synth_series(kind: SynthKind, length: usize, seed: u64) -> Result<TimeSeriesSet> {
    if length < 64 {
        return Err(Error::InvalidDimension(format!(
            "synthetic series length must be >= 64, got {length}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5e21);
    match kind {
        SynthKind::SineMix => {
            // Periods 12 and 8; the mix repeats every lcm(12, 8) = 24 steps.
            let phase1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let phase2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let s1 = |t: f64| (std::f64::consts::TAU * t / 12.0 + phase1).sin();
            let s2 = |t: f64| (std::f64::consts::TAU * t / 8.0 + phase2).sin();
            let mut rows = Vec::with_capacity(length);
            for t in 0..length {
                let tf = t as f64;
                // The second driver is only observable one step late, so the
                // network must carry it forward to reconstruct the mix.
                rows.push(vec![s1(tf), s2(tf - 1.0), 0.6 * s1(tf) + 0.4 * s2(tf)]);
            }
            Ok(TimeSeriesSet {
                column_names: vec!["s1".into(), "s2_lag1".into(), "mix".into()],
                values: Matrix::from_rows(rows),
                input_columns: vec![0, 1],
                output_columns: vec![2],
            })
        }
        SynthKind::MackeyGlass => {
            // x' = 0.2 x(t-17) / (1 + x(t-17)^10) - 0.1 x(t), Euler dt = 1.
            const TAU: usize = 17;
            let burn = 256;
            let total = burn + length + 1;
            let mut x = vec![0.0f64; total + TAU];
            for v in x.iter_mut().take(TAU + 1) {
                *v = 1.2 + rng.random_range(-0.1..0.1);
            }
            for t in TAU..total + TAU - 1 {
                let lag = x[t - TAU];
                x[t + 1] = x[t] + 0.2 * lag / (1.0 + lag.powi(10)) - 0.1 * x[t];
            }
            let mut rows = Vec::with_capacity(length);
            for i in 0..length {
                let t = TAU + burn + i;
                let avg5 = (x[t] + x[t - 1] + x[t - 2] + x[t - 3] + x[t - 4]) / 5.0;
                rows.push(vec![x[t], avg5, x[t + 1]]);
            }
            Ok(TimeSeriesSet {
                column_names: vec!["mg".into(), "mg_avg5".into(), "mg_next".into()],
                values: Matrix::from_rows(rows),
                input_columns: vec![0, 1],
                output_columns: vec![2],
            })
        }
        SynthKind::NoisyAr { noise } => {
            // AR(3) with |phi| summing under 1, so the recurrence is stable.
            const PHI: [f64; 3] = [0.4, -0.3, 0.25];
            let burn = 64;
            let total = burn + length;
            let mut y = vec![0.0f64; total + 3];
            for v in y.iter_mut().take(3) {
                *v = rng.random_range(0.5..1.0);
            }
            for t in 3..total + 3 {
                let eps: f64 = rng.random_range(-1.0..1.0);
                y[t] = PHI[0] * y[t - 1] + PHI[1] * y[t - 2] + PHI[2] * y[t - 3] + noise * eps;
            }
            let mut rows = Vec::with_capacity(length);
            for i in 0..length {
                let t = 3 + burn + i;
                rows.push(vec![y[t - 1], y[t]]);
            }
            Ok(TimeSeriesSet {
                column_names: vec!["y_lag1".into(), "y".into()],
                values: Matrix::from_rows(rows),
                input_columns: vec![0],
                output_columns: vec![1],
            })
        }
    }
}

/// AR coefficients of the noisy_ar generator, exposed for its tests.
pub const NOISY_AR_PHI: [f64; 3] = [0.4, -0.3, 0.25];

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_set(rows: Vec<Vec<f64>>) -> TimeSeriesSet {
        let cols = rows[0].len();
        TimeSeriesSet {
            column_names: (0..cols).map(|c| format!("c{c}")).collect(),
            values: Matrix::from_rows(rows),
            input_columns: (0..cols - 1).collect(),
            output_columns: vec![cols - 1],
        }
    }

    #[test]
    fn load_small_csv() {
        let csv = "a,b\n1,2\n3,4\n5,6\n";
        let schema = CsvSchema {
            input_columns: vec!["a".into()],
            output_columns: vec!["b".into()],
            allow_overlap: false,
        };
        let ts = load_csv_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.values.cols(), 2);
        assert_eq!(ts.values.get(2, 1), 6.0);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "a,b\n1,2\n";
        let schema = CsvSchema {
            input_columns: vec!["a".into()],
            output_columns: vec!["zzz".into()],
            allow_overlap: false,
        };
        match load_csv_reader(csv.as_bytes(), &schema) {
            Err(Error::Schema(msg)) => assert!(msg.contains("zzz")),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn text_cell_reports_row_index() {
        let csv = "a,b\n1,2\n1,oops\n3,4\n";
        let schema = CsvSchema {
            input_columns: vec!["a".into()],
            output_columns: vec!["b".into()],
            allow_overlap: false,
        };
        match load_csv_reader(csv.as_bytes(), &schema) {
            Err(Error::Ingestion(msg)) => {
                assert!(msg.contains("row 1"), "message was {msg:?}");
                assert!(msg.contains("oops"));
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_ingestion_error() {
        let schema = CsvSchema {
            input_columns: vec!["a".into()],
            output_columns: vec!["b".into()],
            allow_overlap: false,
        };
        assert!(matches!(
            load_csv_reader("a,b\n".as_bytes(), &schema),
            Err(Error::Ingestion(_))
        ));
    }

    #[test]
    fn normalize_basics() {
        let ts = toy_set(vec![vec![0.0, 1.0], vec![5.0, 2.0], vec![10.0, 3.0]]);
        let (norm, params) = normalize(&ts, None).unwrap();
        assert_eq!(
            (0..3).map(|t| norm.values.get(t, 0)).collect::<Vec<_>>(),
            vec![0.0, 0.5, 1.0]
        );
        // Reapplying training params to out-of-range data is allowed.
        let wild = toy_set(vec![vec![20.0, 1.0], vec![0.0, 2.0]]);
        let (wild_norm, _) = normalize(&wild, Some(&params)).unwrap();
        assert_eq!(wild_norm.values.get(0, 0), 2.0);
    }

    #[test]
    fn denormalize_round_trip() {
        let ts = toy_set(vec![
            vec![0.3, 1.5],
            vec![5.2, 2.25],
            vec![-10.0, 3.125],
            vec![7.5, -0.5],
        ]);
        let (norm, params) = normalize(&ts, None).unwrap();
        let back = denormalize(&norm, &params);
        for t in 0..ts.len() {
            for c in 0..2 {
                assert!((back.values.get(t, c) - ts.values.get(t, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_column_errors_without_drop_flag() {
        let ts = toy_set(vec![
            vec![1.0, 5.0, 1.0],
            vec![1.0, 6.0, 2.0],
            vec![1.0, 7.0, 3.0],
        ]);
        assert!(matches!(normalize(&ts, None), Err(Error::DegenerateColumn(_))));
        let dropped = drop_constant_columns(&ts).unwrap();
        assert_eq!(dropped.values.cols(), 2);
        assert_eq!(dropped.column_names, vec!["c1".to_string(), "c2".to_string()]);
        assert_eq!(dropped.input_columns, vec![0]);
        assert_eq!(dropped.output_columns, vec![1]);
    }

    #[test]
    fn split_is_chronological_and_leak_free() {
        // Validation extends the range: params from train-only must differ
        // from params fitted on the full data.
        let rows: Vec<Vec<f64>> = (0..30).map(|t| vec![t as f64, (2 * t) as f64]).collect();
        let ts = toy_set(rows);
        let split = prepare_split(&ts, 2.0 / 3.0, false).unwrap();
        assert_eq!(split.train.len(), 20);
        assert_eq!(split.validation.len(), 10);
        // Chronological: first validation row is the row right after the cut.
        assert_eq!(split.validation.values.get(0, 0), (20.0 - 0.0) / 19.0);
        let full_params = fit_normalization(&ts).unwrap();
        assert_ne!(full_params.max, split.norm.max);
        // Validation values exceed 1.0 exactly because no leakage occurred.
        assert!(split.validation.values.get(9, 0) > 1.0);
    }

    #[test]
    fn synth_deterministic() {
        for kind in [
            SynthKind::SineMix,
            SynthKind::MackeyGlass,
            SynthKind::NoisyAr { noise: 0.05 },
        ] {
            let a = synth_series(kind, 128, 7).unwrap();
            let b = synth_series(kind, 128, 7).unwrap();
            assert_eq!(a, b, "{kind:?} not deterministic");
            let c = synth_series(kind, 128, 8).unwrap();
            assert_ne!(a.values, c.values, "{kind:?} ignores seed");
        }
    }

    #[test]
    fn synth_rejects_short_lengths() {
        assert!(synth_series(SynthKind::SineMix, 63, 1).is_err());
    }

    fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let cov: f64 = (0..n - lag)
            .map(|t| (xs[t] - mean) * (xs[t + lag] - mean))
            .sum::<f64>()
            / (n - lag) as f64;
        cov / var
    }

    #[test]
    fn sine_mix_autocorrelation_at_period() {
        let ts = synth_series(SynthKind::SineMix, 480, 3).unwrap();
        let out_col = ts.output_columns[0];
        let xs: Vec<f64> = (0..ts.len()).map(|t| ts.values.get(t, out_col)).collect();
        let acf = autocorrelation(&xs, SINE_MIX_PERIOD);
        assert!(acf > 0.9, "autocorrelation at period was {acf}");
    }

    #[test]
    fn noisy_ar_zero_noise_is_exact_recurrence() {
        let ts = synth_series(SynthKind::NoisyAr { noise: 0.0 }, 128, 9).unwrap();
        // Output column y_t, input column y_{t-1}; check the AR identity on
        // consecutive rows: y_t = phi1*y_{t-1} + phi2*y_{t-2} + phi3*y_{t-3}.
        let y = |t: usize| ts.values.get(t, 1);
        for t in 3..ts.len() {
            let expect = NOISY_AR_PHI[0] * y(t - 1) + NOISY_AR_PHI[1] * y(t - 2) + NOISY_AR_PHI[2] * y(t - 3);
            assert!((y(t) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_flag_enforced() {
        let csv = "a,b\n1,2\n3,4\n";
        let schema = CsvSchema {
            input_columns: vec!["a".into(), "b".into()],
            output_columns: vec!["b".into()],
            allow_overlap: false,
        };
        assert!(matches!(
            load_csv_reader(csv.as_bytes(), &schema),
            Err(Error::Schema(_))
        ));
        let schema = CsvSchema {
            allow_overlap: true,
            ..schema
        };
        let ts = load_csv_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(ts.values.cols(), 2);
        assert_eq!(ts.input_columns, vec![0, 1]);
        assert_eq!(ts.output_columns, vec![1]);
    }
}
