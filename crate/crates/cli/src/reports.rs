//! Report generation over an immutable results-store snapshot.
//!
//! Four report kinds: the mean-rank table, the wins-per-algorithm table,
//! the Nemenyi critical-difference analysis, and the per-source breakdown
//! with the ensemble-vs-base win share. Each kind writes CSV data plus a
//! standalone SVG where a figure is useful. Output is deterministic:
//! fixed sort orders, fixed float formatting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tscombine_core::metrics::{cd_groups, nemenyi_cd, rank_results, RankTable};
use tscombine_core::{AlgoKind, RecordStatus, ResultRecord};

use crate::error::{HarnessError, Result};

/// Significance level of the critical-difference analysis.
pub const CD_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Ranks,
    Wins,
    Cd,
    PerSource,
}

/// Writes one report kind into `<out>/reports/`, returning the files written.
pub fn generate_report(
    records: &[ResultRecord],
    kind: ReportKind,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    if !records.iter().any(|r| r.status == RecordStatus::Ok) {
        return Err(HarnessError::EmptyStore);
    }
    let dir = out.join("reports");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let mut records = records.to_vec();
    records.sort_by(|a, b| {
        (a.dataset_id.as_str(), a.algorithm_id.as_str())
            .cmp(&(b.dataset_id.as_str(), b.algorithm_id.as_str()))
    });
    match kind {
        ReportKind::Ranks => ranks_report(&records, &dir),
        ReportKind::Wins => wins_report(&records, &dir),
        ReportKind::Cd => cd_report(&records, &dir),
        ReportKind::PerSource => per_source_report(&records, &dir),
    }
}

fn kind_by_algorithm(records: &[ResultRecord]) -> BTreeMap<String, AlgoKind> {
    records.iter().map(|r| (r.algorithm_id.clone(), r.kind)).collect()
}

fn kind_label(kind: AlgoKind) -> &'static str {
    match kind {
        AlgoKind::Base => "base",
        AlgoKind::Ensemble => "ensemble",
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).map_err(|e| HarnessError::csv(path, e))?;
    for row in rows {
        writer.write_record(row).map_err(|e| HarnessError::csv(path, e))?;
    }
    write_file(path, &writer.into_inner().expect("vec writer never fails"))
}

/// Mean-rank rows sorted best-first; unranked algorithms sort last.
fn mean_rank_order(table: &RankTable) -> Vec<usize> {
    let mut order: Vec<usize> = (0..table.algorithms.len()).collect();
    order.sort_by(|&a, &b| {
        let key = |i: usize| table.mean_ranks[i].unwrap_or(f64::INFINITY);
        key(a).partial_cmp(&key(b)).unwrap().then_with(|| table.algorithms[a].cmp(&table.algorithms[b]))
    });
    order
}

fn mean_rank_rows(table: &RankTable, kinds: &BTreeMap<String, AlgoKind>) -> Vec<Vec<String>> {
    mean_rank_order(table)
        .into_iter()
        .map(|i| {
            let ranked = table.ranks.iter().filter(|row| row[i].is_some()).count();
            vec![
                table.algorithms[i].clone(),
                kinds.get(&table.algorithms[i]).map_or("base", |&k| kind_label(k)).to_string(),
                table.mean_ranks[i].map_or(String::new(), |r| format!("{r:.6}")),
                table.wins[i].to_string(),
                ranked.to_string(),
            ]
        })
        .collect()
}

fn ranks_report(records: &[ResultRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    let table = rank_results(records)?;
    let kinds = kind_by_algorithm(records);
    let csv_path = dir.join("mean_ranks.csv");
    write_csv(
        &csv_path,
        &["algorithm", "kind", "mean_rank", "wins", "datasets"],
        &mean_rank_rows(&table, &kinds),
    )?;

    let bars: Vec<(String, f64)> = mean_rank_order(&table)
        .into_iter()
        .filter_map(|i| table.mean_ranks[i].map(|r| (table.algorithms[i].clone(), r)))
        .collect();
    let svg_path = dir.join("mean_ranks.svg");
    write_file(&svg_path, bar_chart_svg("Mean rank (lower is better)", &bars, "{:.3}").as_bytes())?;
    Ok(vec![csv_path, svg_path])
}

fn wins_report(records: &[ResultRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    let table = rank_results(records)?;
    let kinds = kind_by_algorithm(records);
    let mut order: Vec<usize> = (0..table.algorithms.len()).collect();
    order.sort_by(|&a, &b| {
        table.wins[b].cmp(&table.wins[a]).then_with(|| table.algorithms[a].cmp(&table.algorithms[b]))
    });
    let rows: Vec<Vec<String>> = order
        .iter()
        .map(|&i| {
            vec![
                table.algorithms[i].clone(),
                kinds.get(&table.algorithms[i]).map_or("base", |&k| kind_label(k)).to_string(),
                table.wins[i].to_string(),
            ]
        })
        .collect();
    let csv_path = dir.join("wins.csv");
    write_csv(&csv_path, &["algorithm", "kind", "wins"], &rows)?;

    let bars: Vec<(String, f64)> =
        order.iter().map(|&i| (table.algorithms[i].clone(), f64::from(table.wins[i]))).collect();
    let svg_path = dir.join("wins.svg");
    write_file(&svg_path, bar_chart_svg("Wins per algorithm", &bars, "{:.0}").as_bytes())?;
    Ok(vec![csv_path, svg_path])
}

/// Restricts the store to datasets where every algorithm has a rank; the
/// Nemenyi test assumes a complete design.
fn complete_subset(records: &[ResultRecord]) -> Result<(RankTable, usize)> {
    let full = rank_results(records)?;
    let complete: Vec<&String> = full
        .datasets
        .iter()
        .zip(&full.ranks)
        .filter(|(_, row)| row.iter().all(Option::is_some))
        .map(|(d, _)| d)
        .collect();
    if complete.is_empty() {
        return Err(HarnessError::Report(
            "no dataset ranks every algorithm; cannot run the critical-difference test".into(),
        ));
    }
    let keep: Vec<ResultRecord> = records
        .iter()
        .filter(|r| complete.contains(&&r.dataset_id))
        .cloned()
        .collect();
    let n = complete.len();
    Ok((rank_results(&keep)?, n))
}

fn cd_report(records: &[ResultRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    let (table, n) = complete_subset(records)?;
    let k = table.algorithms.len();
    let cd = nemenyi_cd(k, n, CD_ALPHA)?;
    let order = mean_rank_order(&table);
    let ranks: Vec<f64> = order.iter().map(|&i| table.mean_ranks[i].expect("complete")).collect();
    let names: Vec<String> = order.iter().map(|&i| table.algorithms[i].clone()).collect();
    let groups = cd_groups(&ranks, cd.cd_value);

    let cd_path = dir.join("cd.csv");
    write_csv(
        &cd_path,
        &["k", "n", "alpha", "cd_value"],
        &[vec![k.to_string(), n.to_string(), format!("{CD_ALPHA}"), format!("{:.6}", cd.cd_value)]],
    )?;
    let mut group_rows = Vec::new();
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            group_rows.push(vec![(g + 1).to_string(), names[i].clone(), format!("{:.6}", ranks[i])]);
        }
    }
    let groups_path = dir.join("cd_groups.csv");
    write_csv(&groups_path, &["group", "algorithm", "mean_rank"], &group_rows)?;

    let svg_path = dir.join("cd_diagram.svg");
    write_file(&svg_path, cd_diagram_svg(&names, &ranks, cd.cd_value, &groups, n).as_bytes())?;
    Ok(vec![cd_path, groups_path, svg_path])
}

/// Per-dataset winners: every algorithm tied on the lowest error wins.
fn ensemble_win_share(records: &[ResultRecord]) -> (usize, usize) {
    let mut by_dataset: BTreeMap<&str, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == RecordStatus::Ok) {
        by_dataset.entry(&r.dataset_id).or_default().push(r);
    }
    let mut ensemble_wins = 0usize;
    for rs in by_dataset.values() {
        let best = rs.iter().map(|r| r.smape.expect("ok record")).fold(f64::INFINITY, f64::min);
        if rs.iter().any(|r| r.smape == Some(best) && r.kind == AlgoKind::Ensemble) {
            ensemble_wins += 1;
        }
    }
    (by_dataset.len(), ensemble_wins)
}

fn per_source_report(records: &[ResultRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    let kinds = kind_by_algorithm(records);
    let mut sources: Vec<String> = records.iter().map(|r| r.source.clone()).collect();
    sources.sort();
    sources.dedup();

    let mut rows = Vec::new();
    for source in &sources {
        let subset: Vec<ResultRecord> =
            records.iter().filter(|r| &r.source == source).cloned().collect();
        if !subset.iter().any(|r| r.status == RecordStatus::Ok) {
            continue;
        }
        let table = rank_results(&subset)?;
        for row in mean_rank_rows(&table, &kinds) {
            let mut with_source = vec![source.clone()];
            with_source.extend(row);
            rows.push(with_source);
        }
    }
    let csv_path = dir.join("per_source.csv");
    write_csv(
        &csv_path,
        &["source", "algorithm", "kind", "mean_rank", "wins", "datasets"],
        &rows,
    )?;

    let mut share_rows = Vec::new();
    let (datasets, wins) = ensemble_win_share(records);
    let share = |w: usize, d: usize| format!("{:.4}", 100.0 * w as f64 / d as f64);
    share_rows.push(vec!["all".into(), datasets.to_string(), wins.to_string(), share(wins, datasets)]);
    for source in &sources {
        let subset: Vec<ResultRecord> =
            records.iter().filter(|r| &r.source == source).cloned().collect();
        let (d, w) = ensemble_win_share(&subset);
        if d > 0 {
            share_rows.push(vec![source.clone(), d.to_string(), w.to_string(), share(w, d)]);
        }
    }
    let share_path = dir.join("win_share.csv");
    write_csv(
        &share_path,
        &["scope", "datasets", "ensemble_wins", "ensemble_win_share_pct"],
        &share_rows,
    )?;
    Ok(vec![csv_path, share_path])
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A horizontal bar chart; `value_format` is applied to the bar labels.
fn bar_chart_svg(title: &str, bars: &[(String, f64)], value_format: &str) -> String {
    const WIDTH: f64 = 900.0;
    const LABEL_W: f64 = 420.0;
    const ROW_H: f64 = 18.0;
    const TOP: f64 = 40.0;
    let height = TOP + ROW_H * bars.len() as f64 + 20.0;
    let max = bars.iter().map(|(_, v)| *v).fold(0.0, f64::max).max(1e-12);
    let mut body = String::new();
    body.push_str(&format!(
        "  <text x=\"10\" y=\"24\" font-size=\"16\" font-family=\"sans-serif\">{}</text>\n",
        xml_escape(title)
    ));
    let fmt_value = |v: f64| match value_format {
        "{:.0}" => format!("{v:.0}"),
        _ => format!("{v:.3}"),
    };
    for (i, (label, value)) in bars.iter().enumerate() {
        let y = TOP + ROW_H * i as f64;
        let bar = (value / max) * (WIDTH - LABEL_W - 80.0);
        body.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" font-family=\"monospace\" text-anchor=\"end\">{}</text>\n",
            LABEL_W - 6.0,
            y + 12.0,
            xml_escape(label)
        ));
        body.push_str(&format!(
            "  <rect x=\"{LABEL_W:.1}\" y=\"{:.1}\" width=\"{:.2}\" height=\"12\" fill=\"#4878a8\"/>\n",
            y + 2.0,
            bar.max(0.5)
        ));
        body.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" font-family=\"monospace\">{}</text>\n",
            LABEL_W + bar.max(0.5) + 6.0,
            y + 12.0,
            fmt_value(*value)
        ));
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH:.0} {height:.0}\">\n{body}</svg>\n"
    )
}

/// The significance diagram: a mean-rank axis, one labeled marker per
/// algorithm, and a thick bar per group of statistically indistinguishable
/// algorithms.
fn cd_diagram_svg(
    names: &[String],
    mean_ranks: &[f64],
    cd_value: f64,
    groups: &[Vec<usize>],
    n_datasets: usize,
) -> String {
    const WIDTH: f64 = 900.0;
    const MARGIN: f64 = 60.0;
    const AXIS_Y: f64 = 70.0;
    let k = names.len().max(2) as f64;
    let scale = |rank: f64| MARGIN + (rank - 1.0) / (k - 1.0) * (WIDTH - 2.0 * MARGIN);
    let group_rows = groups.len() as f64;
    let list_top = AXIS_Y + 14.0 + 10.0 * group_rows + 18.0;
    let height = list_top + 16.0 * names.len() as f64 + 20.0;

    let mut body = String::new();
    body.push_str(&format!(
        "  <text x=\"10\" y=\"24\" font-size=\"16\" font-family=\"sans-serif\">Mean ranks over {n_datasets} datasets (CD = {cd_value:.4} at alpha = {CD_ALPHA})</text>\n"
    ));
    body.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{AXIS_Y:.1}\" x2=\"{:.1}\" y2=\"{AXIS_Y:.1}\" stroke=\"black\"/>\n",
        scale(1.0),
        scale(k)
    ));
    for tick in 1..=names.len().max(2) {
        let x = scale(tick as f64);
        body.push_str(&format!(
            "  <line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            AXIS_Y - 4.0,
            AXIS_Y + 4.0
        ));
        body.push_str(&format!(
            "  <text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"middle\">{tick}</text>\n",
            AXIS_Y - 8.0
        ));
    }
    // The CD ruler, drawn above the left end of the axis.
    body.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"40\" x2=\"{:.1}\" y2=\"40\" stroke=\"#a04040\" stroke-width=\"3\"/>\n",
        scale(1.0),
        scale(1.0 + cd_value)
    ));
    for (g, members) in groups.iter().enumerate() {
        let lo = members.iter().map(|&i| mean_ranks[i]).fold(f64::INFINITY, f64::min);
        let hi = members.iter().map(|&i| mean_ranks[i]).fold(f64::NEG_INFINITY, f64::max);
        let y = AXIS_Y + 14.0 + 10.0 * g as f64;
        body.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#303030\" stroke-width=\"4\"/>\n",
            scale(lo) - 3.0,
            scale(hi) + 3.0
        ));
    }
    for (i, (name, &rank)) in names.iter().zip(mean_ranks).enumerate() {
        let y = list_top + 16.0 * i as f64;
        body.push_str(&format!(
            "  <circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"#4878a8\"/>\n",
            scale(rank),
            y - 4.0
        ));
        body.push_str(&format!(
            "  <text x=\"{MARGIN:.1}\" y=\"{y:.1}\" font-size=\"11\" font-family=\"monospace\">{:.3}  {}</text>\n",
            rank,
            xml_escape(name)
        ));
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH:.0} {height:.0}\">\n{body}</svg>\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(dataset: &str, alg: &str, kind: AlgoKind, smape: f64) -> ResultRecord {
        ResultRecord::ok(dataset, alg, kind, "m3", smape)
    }

    fn read(path: &Path) -> String {
        std::fs::read_to_string(path).unwrap()
    }

    #[test]
    fn constant_winner_takes_every_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let mut records = Vec::new();
        for d in ["d1", "d2", "d3"] {
            records.push(record(d, "mean@all", AlgoKind::Ensemble, 1.0));
            records.push(record(d, "naive", AlgoKind::Base, 2.0));
        }
        let files = generate_report(&records, ReportKind::Wins, dir.path()).unwrap();
        let text = read(&files[0]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("algorithm,kind,wins"));
        assert_eq!(lines.next(), Some("mean@all,ensemble,3"));
        assert_eq!(lines.next(), Some("naive,base,0"));
        assert!(read(&files[1]).starts_with("<svg"));
    }

    #[test]
    fn identical_errors_collapse_to_one_cd_group() {
        let dir = tempfile::tempdir().unwrap();
        let mut records = Vec::new();
        for d in ["d1", "d2", "d3", "d4"] {
            records.push(record(d, "a", AlgoKind::Base, 5.0));
            records.push(record(d, "b", AlgoKind::Base, 5.0));
        }
        let files = generate_report(&records, ReportKind::Cd, dir.path()).unwrap();
        let groups = read(&files[1]);
        let rows: Vec<&str> = groups.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.starts_with("1,")), "{groups}");
    }

    #[test]
    fn win_share_counts_ensemble_winners() {
        let dir = tempfile::tempdir().unwrap();
        let mut records = Vec::new();
        for (d, ens, base) in
            [("d1", 1.0, 2.0), ("d2", 1.0, 2.0), ("d3", 1.0, 2.0), ("d4", 3.0, 2.0)]
        {
            records.push(record(d, "mean@all", AlgoKind::Ensemble, ens));
            records.push(record(d, "naive", AlgoKind::Base, base));
        }
        let files = generate_report(&records, ReportKind::PerSource, dir.path()).unwrap();
        let share = read(&files[1]);
        assert!(share.contains("all,4,3,75.0000"), "{share}");
    }

    #[test]
    fn mean_rank_table_sorts_best_first_and_counts_failures() {
        let dir = tempfile::tempdir().unwrap();
        let mut records = vec![
            record("d1", "good", AlgoKind::Ensemble, 1.0),
            record("d1", "bad", AlgoKind::Base, 9.0),
            record("d2", "good", AlgoKind::Ensemble, 1.0),
        ];
        records.push(ResultRecord::without_value(
            "d2",
            "bad",
            AlgoKind::Base,
            "m3",
            RecordStatus::Failed,
        ));
        let files = generate_report(&records, ReportKind::Ranks, dir.path()).unwrap();
        let text = read(&files[0]);
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "algorithm,kind,mean_rank,wins,datasets");
        assert!(rows[1].starts_with("good,ensemble,1.0"), "{text}");
        assert!(rows[2].starts_with("bad,base,2.0") && rows[2].ends_with(",1"), "{text}");
    }

    #[test]
    fn empty_store_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![ResultRecord::without_value(
            "d1",
            "naive",
            AlgoKind::Base,
            "m3",
            RecordStatus::Failed,
        )];
        assert!(matches!(
            generate_report(&records, ReportKind::Ranks, dir.path()),
            Err(HarnessError::EmptyStore)
        ));
    }

    #[test]
    fn reports_are_byte_deterministic_and_order_independent() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut records = Vec::new();
        for (i, d) in ["d1", "d2", "d3", "d4", "d5"].iter().enumerate() {
            records.push(record(d, "mean@all", AlgoKind::Ensemble, 1.0 + i as f64 * 0.1));
            records.push(record(d, "naive", AlgoKind::Base, 2.0 - i as f64 * 0.3));
            records.push(record(d, "theta", AlgoKind::Base, 1.5));
        }
        for kind in [ReportKind::Ranks, ReportKind::Wins, ReportKind::Cd, ReportKind::PerSource] {
            let a = generate_report(&records, kind, dir_a.path()).unwrap();
            let mut shuffled = records.clone();
            shuffled.reverse();
            let b = generate_report(&shuffled, kind, dir_b.path()).unwrap();
            for (fa, fb) in a.iter().zip(&b) {
                assert_eq!(read(fa), read(fb), "{}", fa.display());
            }
        }
    }

    #[test]
    fn cd_report_needs_one_complete_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            record("d1", "a", AlgoKind::Base, 1.0),
            record("d2", "b", AlgoKind::Base, 2.0),
        ];
        let err = generate_report(&records, ReportKind::Cd, dir.path()).unwrap_err();
        assert!(matches!(err, HarnessError::Report(_)), "{err}");
    }
}
