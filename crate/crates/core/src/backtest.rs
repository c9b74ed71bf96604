//! Realized-score backtest harness: load competing point forecasts, score
//! them against observations, rank methods, and test ranking stability
//! across a grid of consistent scores.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::parse::parse_score;
use crate::scores::ScoreSpec;

/// One observation period with every method's forecast vector.
#[derive(Clone, Debug)]
pub struct ForecastRow {
    pub period: String,
    pub y: f64,
    pub forecasts: Vec<Vec<f64>>,
}

/// Parsed forecast panel. Domain filtering happens at evaluation time,
/// when a score (and hence an action domain) is in hand.
#[derive(Clone, Debug)]
pub struct ForecastTable {
    pub methods: Vec<String>,
    pub k: usize,
    pub rows: Vec<ForecastRow>,
    /// Rows dropped at load time for non-finite values.
    pub rows_skipped_invalid: usize,
}

/// Reads the CSV format `period,y,<method>:x1[,<method>:x2,...]`. Every
/// method must supply coordinates x1..xk; rows with non-finite numbers are
/// dropped and counted; non-numeric cells and header defects are errors.
pub fn load_forecasts(path: impl AsRef<Path>) -> Result<ForecastTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| Error::ForecastTable(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::ForecastTable(e.to_string()))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "period" || cols[1] != "y" {
        return Err(Error::ForecastTable(format!(
            "header must start with `period,y`, got `{}`",
            cols.join(",")
        )));
    }

    let mut methods: Vec<String> = Vec::new();
    let mut columns: Vec<(usize, usize, usize)> = Vec::new();
    for (col, label) in cols.iter().enumerate().skip(2) {
        let Some((method, coord)) = label.split_once(':') else {
            return Err(Error::ForecastTable(format!(
                "column `{label}` is not of the form `<method>:x<j>`"
            )));
        };
        let Some(j) = coord
            .strip_prefix('x')
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|j| *j >= 1)
        else {
            return Err(Error::ForecastTable(format!(
                "column `{label}` must index a coordinate `x1`, `x2`, ..."
            )));
        };
        let m = match methods.iter().position(|m| m == method) {
            Some(m) => m,
            None => {
                methods.push(method.to_string());
                methods.len() - 1
            }
        };
        columns.push((m, j, col));
    }
    let k = columns.iter().map(|&(_, j, _)| j).max().unwrap_or(0);
    let mut layout = vec![vec![usize::MAX; k]; methods.len()];
    for &(m, j, col) in &columns {
        if layout[m][j - 1] != usize::MAX {
            return Err(Error::ForecastTable(format!(
                "duplicate column for method `{}` coordinate x{j}",
                methods[m]
            )));
        }
        layout[m][j - 1] = col;
    }
    for (m, coords) in layout.iter().enumerate() {
        if let Some(j) = coords.iter().position(|&c| c == usize::MAX) {
            return Err(Error::ForecastTable(format!(
                "method `{}` is missing coordinate x{}",
                methods[m],
                j + 1
            )));
        }
    }

    let mut rows = Vec::new();
    let mut rows_skipped_invalid = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::ForecastTable(e.to_string()))?;
        let line = idx + 2;
        if record.len() != cols.len() {
            return Err(Error::ForecastTable(format!(
                "row {line}: expected {} fields, got {}",
                cols.len(),
                record.len()
            )));
        }
        let cell = |col: usize| -> Result<f64> {
            record[col].parse::<f64>().map_err(|_| {
                Error::ForecastTable(format!(
                    "row {line}: non-numeric cell `{}` in column `{}`",
                    &record[col], cols[col]
                ))
            })
        };
        let y = cell(1)?;
        let mut forecasts = Vec::with_capacity(methods.len());
        for coords in &layout {
            let mut x = Vec::with_capacity(k);
            for &col in coords {
                x.push(cell(col)?);
            }
            forecasts.push(x);
        }
        if !y.is_finite() || forecasts.iter().flatten().any(|v| !v.is_finite()) {
            rows_skipped_invalid += 1;
            continue;
        }
        rows.push(ForecastRow {
            period: record[0].to_string(),
            y,
            forecasts,
        });
    }
    if rows.is_empty() {
        return Err(Error::NoDataRows);
    }
    Ok(ForecastTable {
        methods,
        k,
        rows,
        rows_skipped_invalid,
    })
}

/// Per-method outcome of one evaluation.
#[derive(Clone, Debug, Serialize)]
pub struct MethodResult {
    pub method: String,
    pub mean_score: f64,
    /// Mean paired score difference against the baseline method.
    pub mean_diff_vs_baseline: f64,
    /// Naive iid standard error of the mean paired difference; no
    /// autocorrelation correction is applied.
    pub se_diff_vs_baseline: f64,
    pub rank: usize,
}

/// Ranking of all methods under one score.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub score: String,
    pub baseline: String,
    pub methods: Vec<MethodResult>,
    pub rows_used: usize,
    /// Rows on which at least one method left the action domain; dropped
    /// for every method so comparisons stay paired.
    pub rows_skipped_domain: usize,
    pub rows_skipped_invalid: usize,
}

impl ComparisonReport {
    /// Method names ordered by rank.
    pub fn ranking(&self) -> Vec<String> {
        let mut by_rank = self.methods.clone();
        by_rank.sort_by_key(|m| m.rank);
        by_rank.into_iter().map(|m| m.method).collect()
    }
}

/// Scores every method on every row inside the action domain and ranks by
/// mean realized score, ascending. The first listed method is the paired
/// baseline; ties in the mean break by input order.
pub fn evaluate(table: &ForecastTable, score: &ScoreSpec) -> Result<ComparisonReport> {
    score.validate()?;
    if table.k != score.dim() {
        return Err(Error::DimensionMismatch {
            expected: score.dim(),
            got: table.k,
        });
    }
    if table.methods.is_empty() {
        return Err(Error::Precondition("table lists no methods".into()));
    }
    let domain = score.action_domain();
    let n_methods = table.methods.len();
    let mut per_row: Vec<Vec<f64>> = Vec::with_capacity(table.rows.len());
    let mut rows_skipped_domain = 0usize;
    let mut rows_skipped_invalid = table.rows_skipped_invalid;
    for row in &table.rows {
        if !row.y.is_finite() || row.forecasts.iter().flatten().any(|v| !v.is_finite()) {
            rows_skipped_invalid += 1;
            continue;
        }
        if row.forecasts.iter().any(|x| !domain.contains(x)) {
            rows_skipped_domain += 1;
            continue;
        }
        let mut scores = Vec::with_capacity(n_methods);
        for x in &row.forecasts {
            scores.push(score.score_unchecked(x, row.y)?);
        }
        per_row.push(scores);
    }
    let n = per_row.len();
    if n == 0 {
        return Err(Error::NoDataRows);
    }

    let mut results: Vec<MethodResult> = (0..n_methods)
        .map(|i| {
            let mean = per_row.iter().map(|r| r[i]).sum::<f64>() / n as f64;
            let diffs: Vec<f64> = per_row.iter().map(|r| r[i] - r[0]).collect();
            let mean_diff = diffs.iter().sum::<f64>() / n as f64;
            let se = if n > 1 {
                let var = diffs
                    .iter()
                    .map(|d| (d - mean_diff) * (d - mean_diff))
                    .sum::<f64>()
                    / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            MethodResult {
                method: table.methods[i].clone(),
                mean_score: mean,
                mean_diff_vs_baseline: mean_diff,
                se_diff_vs_baseline: se,
                rank: 0,
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..n_methods).collect();
    order.sort_by(|&a, &b| {
        results[a]
            .mean_score
            .total_cmp(&results[b].mean_score)
            .then(a.cmp(&b))
    });
    for (rank, &i) in order.iter().enumerate() {
        results[i].rank = rank + 1;
    }

    Ok(ComparisonReport {
        score: score.to_string(),
        baseline: table.methods[0].clone(),
        methods: results,
        rows_used: n,
        rows_skipped_domain,
        rows_skipped_invalid,
    })
}

/// One grid point of a score sweep: either an evaluation or a skip reason.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub label: String,
    pub report: Option<ComparisonReport>,
    pub skipped: Option<String>,
}

/// Rankings across a grid of scores plus a stability summary.
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub modal_ranking: Vec<String>,
    /// Fraction of evaluated grid points whose ranking equals the modal one.
    pub stability_fraction: f64,
}

/// Evaluates the table under every score literal in `grid`. Literals that
/// fail to parse or violate shape flags are skipped with the reason
/// recorded, not raised.
pub fn score_sweep(table: &ForecastTable, grid: &[String]) -> Result<SweepReport> {
    let mut points = Vec::with_capacity(grid.len());
    let mut rankings: Vec<Vec<String>> = Vec::new();
    for label in grid {
        match parse_score(label).and_then(|score| evaluate(table, &score)) {
            Ok(report) => {
                rankings.push(report.ranking());
                points.push(SweepPoint {
                    label: label.clone(),
                    report: Some(report),
                    skipped: None,
                });
            }
            Err(e) => points.push(SweepPoint {
                label: label.clone(),
                report: None,
                skipped: Some(e.to_string()),
            }),
        }
    }
    if rankings.is_empty() {
        return Err(Error::Precondition(
            "every grid point was skipped; nothing to rank".into(),
        ));
    }
    let mut modal = rankings[0].clone();
    let mut modal_count = 0usize;
    for candidate in &rankings {
        let count = rankings.iter().filter(|r| *r == candidate).count();
        if count > modal_count {
            modal_count = count;
            modal = candidate.clone();
        }
    }
    Ok(SweepReport {
        points,
        modal_ranking: modal,
        stability_fraction: modal_count as f64 / rankings.len() as f64,
    })
}

/// Renders an aligned-column text table, rows ordered by rank.
pub fn render_table(report: &ComparisonReport) -> String {
    let mut rows = report.methods.clone();
    rows.sort_by_key(|m| m.rank);
    let name_width = rows
        .iter()
        .map(|m| m.method.len())
        .chain(["method".len()])
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    out.push_str(&format!(
        "{:<name_width$}  {:>12}  {:>12}  {:>12}  {:>4}\n",
        "method", "mean score", "diff vs base", "se(diff)", "rank"
    ));
    for m in &rows {
        out.push_str(&format!(
            "{:<name_width$}  {:>12.6}  {:>12.6}  {:>12.6}  {:>4}\n",
            m.method, m.mean_score, m.mean_diff_vs_baseline, m.se_diff_vs_baseline, m.rank
        ));
    }
    out.push_str(&format!(
        "rows used: {}, skipped (domain): {}, skipped (invalid): {}\n",
        report.rows_used, report.rows_skipped_domain, report.rows_skipped_invalid
    ));
    out
}

/// Renders the sweep summary with one line per grid point.
pub fn render_sweep_table(report: &SweepReport) -> String {
    let label_width = report
        .points
        .iter()
        .map(|p| p.label.len())
        .chain(["score".len()])
        .max()
        .unwrap_or(5);
    let mut out = String::new();
    out.push_str(&format!("{:<label_width$}  ranking\n", "score"));
    for p in &report.points {
        match (&p.report, &p.skipped) {
            (Some(r), _) => {
                out.push_str(&format!(
                    "{:<label_width$}  {}\n",
                    p.label,
                    r.ranking().join(" < ")
                ));
            }
            (None, Some(reason)) => {
                out.push_str(&format!("{:<label_width$}  skipped: {reason}\n", p.label));
            }
            (None, None) => {}
        }
    }
    out.push_str(&format!(
        "modal ranking: {} (stability {:.3})\n",
        report.modal_ranking.join(" < "),
        report.stability_fraction
    ));
    out
}

/// Builds a table of `n` draws from `d` against constant per-method
/// forecasts, for simulation studies. Deterministic in `seed`.
pub fn simulate_static_table(
    d: &Distribution,
    methods: &[(String, Vec<f64>)],
    n: usize,
    seed: u64,
) -> Result<ForecastTable> {
    if methods.is_empty() {
        return Err(Error::Precondition("no methods supplied".into()));
    }
    let k = methods[0].1.len();
    if methods.iter().any(|(_, x)| x.len() != k) {
        return Err(Error::Precondition(
            "all methods must forecast the same dimension".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let forecasts: Vec<Vec<f64>> = methods.iter().map(|(_, x)| x.clone()).collect();
    let rows = (0..n)
        .map(|i| ForecastRow {
            period: (i + 1).to_string(),
            y: d.sample(&mut rng),
            forecasts: forecasts.clone(),
        })
        .collect();
    Ok(ForecastTable {
        methods: methods.iter().map(|(name, _)| name.clone()).collect(),
        k,
        rows,
        rows_skipped_invalid: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{eval_functional, FunctionalSpec};
    use crate::shapes::{BaseFn, ShapeFn};
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(contents.as_bytes()).unwrap();
        file
    }

    #[test]
    fn loads_a_two_method_var_es_panel() {
        let file = write_csv(
            "period,y,A:x1,A:x2,B:x1,B:x2\n\
             1,-0.3,-1.6,-2.1,-1.0,-1.5\n\
             2,0.8,-1.6,-2.1,-1.0,-1.5\n\
             3,-2.5,-1.6,-2.1,-1.0,-1.5\n",
        );
        let table = load_forecasts(file.path()).unwrap();
        assert_eq!(table.methods, vec!["A", "B"]);
        assert_eq!(table.k, 2);
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.rows[0].forecasts[1], vec![-1.0, -1.5]);
    }

    #[test]
    fn header_and_cell_defects_are_errors() {
        let file = write_csv("time,y,A:x1\n1,0.0,1.0\n");
        assert!(matches!(
            load_forecasts(file.path()),
            Err(Error::ForecastTable(_))
        ));
        let file = write_csv("period,y,A:x1,A:x3\n1,0.0,1.0,2.0\n");
        let err = load_forecasts(file.path()).unwrap_err();
        assert!(err.to_string().contains("missing coordinate x2"), "{err}");
        let file = write_csv("period,y,A:x1\n1,oops,1.0\n");
        assert!(matches!(
            load_forecasts(file.path()),
            Err(Error::ForecastTable(_))
        ));
        let file = write_csv("period,y,A:x1\n");
        assert!(matches!(load_forecasts(file.path()), Err(Error::NoDataRows)));
    }

    #[test]
    fn domain_violations_drop_the_row_for_every_method() {
        let file = write_csv(
            "period,y,A:x1,A:x2,B:x1,B:x2\n\
             1,0.0,-1.0,-2.0,-1.0,-1.5\n\
             2,0.0,-1.0,-2.0,-1.0,-0.5\n",
        );
        let table = load_forecasts(file.path()).unwrap();
        let score = ScoreSpec::var_es(0.05, ShapeFn::Zero, ShapeFn::Exp).unwrap();
        let report = evaluate(&table, &score).unwrap();
        assert_eq!(report.rows_used, 1);
        assert_eq!(report.rows_skipped_domain, 1);
    }

    #[test]
    fn single_method_gets_rank_one_and_ties_break_by_input_order() {
        let d = Distribution::normal(0.0, 1.0).unwrap();
        let solo = simulate_static_table(&d, &[("only".into(), vec![0.1])], 50, 3).unwrap();
        let score = ScoreSpec::pinball(0.5, ShapeFn::Identity).unwrap();
        let report = evaluate(&solo, &score).unwrap();
        assert_eq!(report.methods[0].rank, 1);

        let tied = simulate_static_table(
            &d,
            &[("B".into(), vec![0.1]), ("A".into(), vec![0.1])],
            50,
            3,
        )
        .unwrap();
        let report = evaluate(&tied, &score).unwrap();
        assert_eq!(report.methods[0].mean_score, report.methods[1].mean_score);
        assert_eq!(report.methods[0].rank, 1);
        assert_eq!(report.methods[1].rank, 2);
        assert_eq!(report.ranking(), vec!["B", "A"]);
    }

    #[test]
    fn truthful_var_es_beats_a_biased_reporter() {
        let d = Distribution::normal(0.0, 1.0).unwrap();
        let t = eval_functional(&FunctionalSpec::VarEs(0.05), &d).unwrap();
        let table = simulate_static_table(
            &d,
            &[
                ("truthful".into(), t.clone()),
                ("biased".into(), vec![t[0], t[1] - 0.5]),
            ],
            20_000,
            41,
        )
        .unwrap();
        let score = ScoreSpec::var_es(0.05, ShapeFn::Zero, ShapeFn::Exp).unwrap();
        let report = evaluate(&table, &score).unwrap();
        assert_eq!(report.ranking()[0], "truthful");
        let biased = &report.methods[1];
        assert!(biased.mean_diff_vs_baseline > 0.0);
        assert!(biased.se_diff_vs_baseline > 0.0);
    }

    #[test]
    fn affine_transforms_preserve_the_ranking() {
        let d = Distribution::normal(0.0, 1.0).unwrap();
        let table = simulate_static_table(
            &d,
            &[
                ("good".into(), vec![-1.6449]),
                ("bad".into(), vec![-0.8]),
                ("worse".into(), vec![0.5]),
            ],
            5_000,
            5,
        )
        .unwrap();
        let base = ScoreSpec::pinball(0.05, ShapeFn::Identity).unwrap();
        let shifted =
            ScoreSpec::affine(base.clone(), 2.5, BaseFn::Square, 0.75).unwrap();
        let r1 = evaluate(&table, &base).unwrap();
        let r2 = evaluate(&table, &shifted).unwrap();
        assert_eq!(r1.ranking(), r2.ranking());
    }

    #[test]
    fn sweep_reports_stability_and_skips_invalid_points() {
        // Positive support keeps both forecasts where the alpha-half-square
        // variant is strictly consistent (x2 > 0).
        let d = Distribution::exponential(1.0).unwrap();
        let t = eval_functional(&FunctionalSpec::VarEs(0.05), &d).unwrap();
        let table = simulate_static_table(
            &d,
            &[
                ("truthful".into(), t.clone()),
                ("biased".into(), vec![t[0] + 0.4, t[1] + 0.3]),
            ],
            20_000,
            9,
        )
        .unwrap();
        let grid = vec![
            "var_es(0.05, G1=zero, G2=exp)".to_string(),
            "var_es_unchecked(0.05, G1=zero, G2=alpha_half_square(0.05))".to_string(),
            "var_es(0.05, G1=zero, G2=negsquare_scaled(1))".to_string(),
        ];
        let sweep = score_sweep(&table, &grid).unwrap();
        assert!(sweep.points[0].report.is_some());
        assert!(sweep.points[1].report.is_some());
        assert!(sweep.points[2].skipped.as_deref().unwrap().contains("convex"));
        assert_eq!(sweep.stability_fraction, 1.0);
        assert_eq!(sweep.modal_ranking[0], "truthful");

        let single = score_sweep(&table, &grid[..1].to_vec()).unwrap();
        let direct = evaluate(
            &table,
            &ScoreSpec::var_es(0.05, ShapeFn::Zero, ShapeFn::Exp).unwrap(),
        )
        .unwrap();
        let swept = single.points[0].report.as_ref().unwrap();
        assert_eq!(swept.methods[0].mean_score, direct.methods[0].mean_score);
        assert_eq!(swept.ranking(), direct.ranking());
    }

    #[test]
    fn reports_are_deterministic() {
        let d = Distribution::normal(0.0, 1.0).unwrap();
        let table = simulate_static_table(
            &d,
            &[("a".into(), vec![0.0]), ("b".into(), vec![0.3])],
            2_000,
            17,
        )
        .unwrap();
        let score = ScoreSpec::pinball(0.5, ShapeFn::Identity).unwrap();
        let r1 = serde_json::to_string(&evaluate(&table, &score).unwrap()).unwrap();
        let r2 = serde_json::to_string(&evaluate(&table, &score).unwrap()).unwrap();
        assert_eq!(r1, r2);
        let text = render_table(&evaluate(&table, &score).unwrap());
        assert!(text.contains("rows used: 2000"));
    }
}
