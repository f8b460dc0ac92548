//! Error metrics, rank tables, and critical-difference statistics.
//!
//! The headline metric is a customized sMAPE whose denominator sums over the
//! whole horizon instead of per point, which keeps it well-defined on series
//! with many zeros:
//!
//! ```text
//! sMAPE = 100 · Σ|ŷ_t − y_t| / |Σ(ŷ_t + y_t)|
//! ```

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::store::{RecordStatus, ResultRecord};

/// Customized sMAPE in percent (summed denominator).
///
/// Returns `ZeroDenominator` when `Σ(ŷ+y) = 0`; callers exclude such results
/// from ranking rather than treating them as failures.
pub fn smape_custom(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "smape_custom needs equal non-empty lengths, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    let num: f64 = actual.iter().zip(predicted).map(|(y, yh)| (yh - y).abs()).sum();
    let den: f64 = actual.iter().zip(predicted).map(|(y, yh)| yh + y).sum();
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(100.0 * num / den.abs())
}

/// Per-point symmetric absolute percentage error in percent.
///
/// `sape(0, 0) = 0` by convention so a perfect zero forecast is not
/// penalized; any other zero sum is a genuine `ZeroDenominator`.
pub fn sape(actual: f64, predicted: f64) -> Result<f64> {
    let den = actual + predicted;
    if den == 0.0 {
        return if actual == 0.0 && predicted == 0.0 { Ok(0.0) } else { Err(Error::ZeroDenominator) };
    }
    Ok(100.0 * (predicted - actual).abs() / den.abs())
}

/// Mean squared error.
pub fn mse(actual: &[f64], predicted: &[f64]) -> f64 {
    debug_assert_eq!(actual.len(), predicted.len());
    if actual.is_empty() {
        return 0.0;
    }
    actual.iter().zip(predicted).map(|(y, yh)| (yh - y) * (yh - y)).sum::<f64>() / actual.len() as f64
}

/// Mean absolute error.
pub fn mae(actual: &[f64], predicted: &[f64]) -> f64 {
    debug_assert_eq!(actual.len(), predicted.len());
    if actual.is_empty() {
        return 0.0;
    }
    actual.iter().zip(predicted).map(|(y, yh)| (yh - y).abs()).sum::<f64>() / actual.len() as f64
}

/// Average ranks (ties shared) of `values`, smaller value = better rank 1.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite metric values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the average of ranks i+1..=j+1
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Mean ranks and win counts of every algorithm over a set of result records.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    /// Algorithm ids in lexicographic order.
    pub algorithms: Vec<String>,
    /// Dataset ids in lexicographic order.
    pub datasets: Vec<String>,
    /// `ranks[d][a]` = rank of algorithm `a` on dataset `d`, when ranked there.
    pub ranks: Vec<Vec<Option<f64>>>,
    /// Mean rank per algorithm over the datasets where it was ranked.
    pub mean_ranks: Vec<Option<f64>>,
    /// Rank-1 finishes per algorithm; every member of a tie at rank 1 wins.
    pub wins: Vec<u32>,
}

impl RankTable {
    pub fn algorithm_index(&self, id: &str) -> Option<usize> {
        self.algorithms.iter().position(|a| a == id)
    }

    pub fn mean_rank_of(&self, id: &str) -> Option<f64> {
        self.mean_ranks[self.algorithm_index(id)?]
    }

    pub fn wins_of(&self, id: &str) -> Option<u32> {
        Some(self.wins[self.algorithm_index(id)?])
    }
}

/// Builds the rank table from ok-status records; failed and excluded records
/// leave holes (the algorithm is simply unranked on that dataset).
pub fn rank_results(records: &[ResultRecord]) -> Result<RankTable> {
    let mut algorithms: Vec<String> = Vec::new();
    let mut per_dataset: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    let mut seen: std::collections::HashSet<(&str, &str)> = std::collections::HashSet::new();
    for r in records {
        if !seen.insert((&r.dataset_id, &r.algorithm_id)) {
            return Err(Error::InvalidArgument(format!(
                "duplicate record for dataset `{}`, algorithm `{}`",
                r.dataset_id, r.algorithm_id
            )));
        }
        if !algorithms.iter().any(|a| a == &r.algorithm_id) {
            algorithms.push(r.algorithm_id.clone());
        }
        per_dataset.entry(&r.dataset_id).or_default();
        if r.status == RecordStatus::Ok {
            let v = r.smape.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "ok record without a metric value: {} / {}",
                    r.dataset_id, r.algorithm_id
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite metric for {} / {}",
                    r.dataset_id, r.algorithm_id
                )));
            }
            per_dataset.get_mut(r.dataset_id.as_str()).unwrap().insert(&r.algorithm_id, v);
        }
    }
    algorithms.sort();
    let datasets: Vec<String> = per_dataset.keys().map(|s| s.to_string()).collect();

    let mut ranks = vec![vec![None; algorithms.len()]; datasets.len()];
    let mut sums = vec![0.0; algorithms.len()];
    let mut counts = vec![0u32; algorithms.len()];
    let mut wins = vec![0u32; algorithms.len()];
    for (d, id) in datasets.iter().enumerate() {
        let errs = &per_dataset[id.as_str()];
        if errs.is_empty() {
            continue;
        }
        let names: Vec<&str> = errs.keys().copied().collect();
        let values: Vec<f64> = names.iter().map(|n| errs[n]).collect();
        let rs = average_ranks(&values);
        let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
        for (n, (&name, &rank)) in names.iter().zip(&rs).enumerate() {
            let a = algorithms.binary_search_by(|x| x.as_str().cmp(name)).expect("known algorithm");
            ranks[d][a] = Some(rank);
            sums[a] += rank;
            counts[a] += 1;
            if values[n] == best {
                wins[a] += 1;
            }
        }
    }
    let mean_ranks = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { Some(s / c as f64) } else { None })
        .collect();
    Ok(RankTable { algorithms, datasets, ranks, mean_ranks, wins })
}

/// Nemenyi critical difference for comparing `k` algorithms over `n` datasets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalDifference {
    pub k: usize,
    pub n: usize,
    pub alpha: f64,
    pub cd_value: f64,
}

// Critical values q_alpha(k) of the Nemenyi test for k = 2..=60, i.e. the
// upper-alpha quantile of the range of k standard normal variates divided by
// sqrt(2) (the infinite-degrees-of-freedom limit of the studentized range).
// Computed offline by Gauss-Legendre quadrature of the range distribution
// plus bisection to ~1e-12; anchors match the closed forms q(2) = z_{1-a/2}
// exactly. See README for the derivation note.
const Q_ALPHA_05: [f64; 59] = [
    1.959963984538, 2.343700586376, 2.569031772544, 2.727774370868,
    2.849705419608, 2.948320017528, 3.030878449613, 3.101730341302,
    3.163683577052, 3.218653607327, 3.268003924464, 3.312738593349,
    3.353617751851, 3.391230283764, 3.426041379369, 3.458424707346,
    3.488684799378, 3.517073008690, 3.543799131516, 3.569040029949,
    3.592946136983, 3.615646437225, 3.637252331687, 3.657860673070,
    3.677556175851, 3.696413349183, 3.714498061374, 3.731868816885,
    3.748577806829, 3.764671779384, 3.780192765839, 3.795178690012,
    3.809663882745, 3.823679518638, 3.837253988675, 3.850413219671,
    3.863180949378, 3.875578964404, 3.887627306807, 3.899344454179,
    3.910747477167, 3.921852177755, 3.932673211030, 3.943224192752,
    3.953517794657, 3.963565829127, 3.973379324618, 3.982968593026,
    3.992343290008, 4.001512469102, 4.010484630417, 4.019267764514,
    4.027869392045, 4.036296599625, 4.044556072365, 4.052654123420,
    4.060596720887, 4.068389512321, 4.076037847120,
];
const Q_ALPHA_10: [f64; 59] = [
    1.644853626950, 2.052292730496, 2.291341496887, 2.459515764270,
    2.588520601921, 2.692732100967, 2.779883608152, 2.854606431197,
    2.919888840061, 2.977768251264, 3.029694183178, 3.076733468268,
    3.119693333136, 3.159198818908, 3.195743433019, 3.229723400907,
    3.261461489646, 3.291223986599, 3.319233059548, 3.345675924520,
    3.370711759647, 3.394476997162, 3.417089428419, 3.438651426836,
    3.459252506195, 3.478971371806, 3.497877580224, 3.516032893596,
    3.533492393479, 3.550305403481, 3.566516258659, 3.582164951165,
    3.597287675189, 3.611917289430, 3.626083711582, 3.639814256450,
    3.653133927058, 3.666065666365, 3.678630575786, 3.690848105625,
    3.702736221630, 3.714311551162, 3.725589511892, 3.736584425466,
    3.747309618186, 3.757777510452, 3.767999696418, 3.777987015129,
    3.787749614194, 3.797297006923, 3.806638123710, 3.815781358332,
    3.824734609777, 3.833505320082, 3.842100508643, 3.850526803382,
    3.858790469102, 3.866897433335, 3.874853309943,
];

/// Largest algorithm count covered by the embedded critical-value table.
pub const MAX_CD_ALGORITHMS: usize = 60;

/// The Nemenyi critical value q_alpha(k) for alpha in {0.05, 0.10}, k ≤ 60.
pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64> {
    if !(2..=MAX_CD_ALGORITHMS).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "critical values cover 2..={MAX_CD_ALGORITHMS} algorithms, got {k}"
        )));
    }
    let table = if alpha == 0.05 {
        &Q_ALPHA_05
    } else if alpha == 0.10 {
        &Q_ALPHA_10
    } else {
        return Err(Error::UnsupportedAlpha(alpha));
    };
    Ok(table[k - 2])
}

/// CD = q_alpha(k) · √(k(k+1) / (6N)).
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<CriticalDifference> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 datasets, got {n}")));
    }
    let q = nemenyi_q(k, alpha)?;
    let cd_value = q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt();
    Ok(CriticalDifference { k, n, alpha, cd_value })
}

/// Maximal groups of algorithms whose mean ranks differ by less than `cd`.
///
/// Returns index groups into `mean_ranks`; groups may overlap but none is a
/// subset of another, and every algorithm appears in at least one group.
pub fn cd_groups(mean_ranks: &[f64], cd: f64) -> Vec<Vec<usize>> {
    let n = mean_ranks.len();
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mean_ranks[a].partial_cmp(&mean_ranks[b]).expect("finite ranks"));
    // for each start position, the widest interval satisfying max - min < cd
    let mut intervals: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        let mut j = i;
        while j + 1 < n && mean_ranks[order[j + 1]] - mean_ranks[order[i]] < cd {
            j += 1;
        }
        intervals.push((i, j));
    }
    // keep only maximal intervals (drop any contained in a longer one)
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut best_end = usize::MAX;
    for &(i, j) in &intervals {
        if best_end != usize::MAX && j <= best_end {
            continue; // contained in a previous interval
        }
        best_end = j;
        groups.push(order[i..=j].to_vec());
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::AlgoKind;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn smape_hand_values() {
        assert_abs_diff_eq!(smape_custom(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(smape_custom(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap(), 100.0);
        assert_abs_diff_eq!(
            smape_custom(&[10.0], &[5.0]).unwrap(),
            100.0 * 5.0 / 15.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn smape_zero_denominator() {
        assert!(matches!(
            smape_custom(&[0.0, 0.0], &[0.0, 0.0]).unwrap_err(),
            Error::ZeroDenominator
        ));
        assert!(matches!(
            smape_custom(&[1.0, -1.0], &[-1.0, 1.0]).unwrap_err(),
            Error::ZeroDenominator
        ));
    }

    #[test]
    fn sape_values() {
        assert_abs_diff_eq!(sape(5.0, 5.0).unwrap(), 0.0);
        assert_abs_diff_eq!(sape(0.0, 2.0).unwrap(), 100.0);
        assert_abs_diff_eq!(sape(0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(sape(2.0, -2.0).unwrap_err(), Error::ZeroDenominator));
    }

    proptest! {
        #[test]
        fn smape_symmetric_and_scale_invariant(
            pairs in proptest::collection::vec((0.1f64..100.0, 0.1f64..100.0), 1..20),
            c in 0.01f64..100.0,
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let yh: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let a = smape_custom(&y, &yh).unwrap();
            let b = smape_custom(&yh, &y).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
            let yhc: Vec<f64> = yh.iter().map(|v| v * c).collect();
            let s = smape_custom(&yc, &yhc).unwrap();
            prop_assert!((a - s).abs() < 1e-9 * a.max(1.0));
        }

        #[test]
        fn ranks_sum_without_ties(values in proptest::collection::hash_set(0u32..1_000_000, 2..12)) {
            let vals: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let k = vals.len();
            let total: f64 = average_ranks(&vals).iter().sum();
            prop_assert!((total - (k * (k + 1)) as f64 / 2.0).abs() < 1e-9);
        }

        #[test]
        fn cd_groups_cover_and_respect_interval(
            ranks in proptest::collection::vec(1.0f64..30.0, 1..15),
            cd in 0.1f64..10.0,
        ) {
            let groups = cd_groups(&ranks, cd);
            let mut covered = vec![false; ranks.len()];
            for g in &groups {
                let lo = g.iter().map(|&i| ranks[i]).fold(f64::INFINITY, f64::min);
                let hi = g.iter().map(|&i| ranks[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(hi - lo < cd);
                for &i in g {
                    covered[i] = true;
                }
            }
            prop_assert!(covered.iter().all(|&c| c));
            // no group contained in another
            for (a, ga) in groups.iter().enumerate() {
                for (b, gb) in groups.iter().enumerate() {
                    if a != b {
                        prop_assert!(!ga.iter().all(|i| gb.contains(i)));
                    }
                }
            }
        }
    }

    fn rec(d: &str, a: &str, v: f64) -> ResultRecord {
        ResultRecord::ok(d, a, AlgoKind::Base, "other", v)
    }

    #[test]
    fn rank_table_basic_and_ties() {
        let t = rank_results(&[rec("d1", "A", 1.0), rec("d1", "B", 2.0), rec("d1", "C", 3.0)]).unwrap();
        assert_eq!(t.mean_rank_of("A"), Some(1.0));
        assert_eq!(t.mean_rank_of("B"), Some(2.0));
        assert_eq!(t.mean_rank_of("C"), Some(3.0));
        assert_eq!(t.wins_of("A"), Some(1));
        assert_eq!(t.wins_of("B"), Some(0));

        let t = rank_results(&[rec("d1", "A", 1.0), rec("d1", "B", 1.0), rec("d1", "C", 2.0)]).unwrap();
        assert_eq!(t.mean_rank_of("A"), Some(1.5));
        assert_eq!(t.mean_rank_of("B"), Some(1.5));
        assert_eq!(t.mean_rank_of("C"), Some(3.0));
        assert_eq!(t.wins_of("A"), Some(1));
        assert_eq!(t.wins_of("B"), Some(1));

        let t = rank_results(&[
            rec("d1", "A", 1.0),
            rec("d1", "B", 2.0),
            rec("d2", "A", 0.5),
            rec("d2", "B", 0.7),
        ])
        .unwrap();
        assert_eq!(t.mean_rank_of("A"), Some(1.0));
        assert_eq!(t.wins_of("A"), Some(2));
    }

    #[test]
    fn rank_table_rejects_duplicates() {
        assert!(rank_results(&[rec("d1", "A", 1.0), rec("d1", "A", 2.0)]).is_err());
    }

    #[test]
    fn cd_formula_anchors() {
        // k=2 reduces to q/sqrt(N)
        let cd = nemenyi_cd(2, 25, 0.05).unwrap();
        assert_abs_diff_eq!(cd.cd_value, 1.959963984538 / 5.0, epsilon = 1e-12);
        // quadrupling N halves the CD
        let a = nemenyi_cd(7, 30, 0.05).unwrap().cd_value;
        let b = nemenyi_cd(7, 120, 0.05).unwrap().cd_value;
        assert_abs_diff_eq!(a, 2.0 * b, epsilon = 1e-12);
        assert!(matches!(nemenyi_cd(5, 10, 0.01).unwrap_err(), Error::UnsupportedAlpha(_)));
    }

    #[test]
    fn cd_grows_with_k() {
        let mut prev = 0.0;
        for k in 2..=60 {
            let cd = nemenyi_cd(k, 50, 0.05).unwrap().cd_value;
            assert!(cd > prev);
            prev = cd;
        }
    }

    // Independent oracle: recompute q_alpha(k) from the distribution of the
    // range of k standard normals via Simpson quadrature and bisection, then
    // compare the embedded constants.
    fn range_cdf(q: f64, k: usize) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let normal = Normal::new(0.0, 1.0).unwrap();
        let phi = |z: f64| normal.cdf(z);
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let f = |z: f64| {
            let inner: f64 = phi(z) - phi(z - q);
            pdf(z) * inner.max(0.0).powi((k - 1) as i32)
        };
        // Simpson over [-10, 10]
        let (a, b, steps) = (-10.0f64, 10.0f64, 4000usize);
        let h = (b - a) / steps as f64;
        let mut s = f(a) + f(b);
        for i in 1..steps {
            let x = a + h * i as f64;
            s += f(x) * if i % 2 == 0 { 2.0 } else { 4.0 };
        }
        k as f64 * s * h / 3.0
    }

    fn oracle_q(k: usize, alpha: f64) -> f64 {
        let target = 1.0 - alpha;
        let (mut lo, mut hi) = (0.5f64, 10.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if range_cdf(mid * std::f64::consts::SQRT_2, k) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn q_table_matches_independent_quadrature() {
        for &k in &[2usize, 3, 5, 10, 20, 40, 60] {
            for &alpha in &[0.05, 0.10] {
                let got = nemenyi_q(k, alpha).unwrap();
                let want = oracle_q(k, alpha);
                assert!(
                    (got - want).abs() < 1e-7,
                    "k={k} alpha={alpha}: table {got} vs oracle {want}"
                );
            }
        }
    }
}
