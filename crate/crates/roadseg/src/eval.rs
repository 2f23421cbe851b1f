//! Mask scoring: confusion counts, miss/false-alarm rates, grouped batch
//! reports and with/without comparison tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::netpbm::{load_mask_pgm, CodecError};
use crate::raster::BinaryMask;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Codec {
        path: PathBuf,
        source: CodecError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("prediction and ground truth dimensions differ for {path}")]
    DimensionMismatch { path: PathBuf },
    #[error("prediction and ground truth dimensions differ")]
    BareDimensionMismatch,
    #[error("reports cover different image lists: {0}")]
    MismatchedImageLists(String),
    #[error("malformed report: {0}")]
    BadReport(String),
}

/// Pixel confusion counts against ground truth (bit 1 = road).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Miss rate and false-alarm rate; `None` marks a zero denominator, which is
/// excluded from averages and flagged in reports rather than scored as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
}

pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts, EvalError> {
    if !pred.same_size(gt) {
        return Err(EvalError::BareDimensionMismatch);
    }
    let mut c = ConfusionCounts {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        match (p, g) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}

pub fn rates(c: &ConfusionCounts) -> Rates {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    Rates {
        fnr: ratio(c.false_neg, c.true_pos + c.false_neg),
        fpr: ratio(c.false_pos, c.true_neg + c.false_pos),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub name: String,
    pub counts: ConfusionCounts,
    pub rates: Rates,
}

/// Average of the defined member rates of one group; counts how many members
/// were excluded for undefined denominators.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAverage {
    pub members: usize,
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
    pub undefined_fnr: usize,
    pub undefined_fpr: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub label: String,
    pub config_digest: String,
    pub group_size: usize,
    pub images: Vec<ImageScore>,
    pub groups: Vec<GroupAverage>,
    pub overall_fnr: Option<f64>,
    pub overall_fpr: Option<f64>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize, usize) {
    let mut sum = 0.0;
    let mut defined = 0usize;
    let mut undefined = 0usize;
    for v in values {
        match v {
            Some(x) => {
                sum += x;
                defined += 1;
            }
            None => undefined += 1,
        }
    }
    let mean = if defined > 0 { Some(sum / defined as f64) } else { None };
    (mean, defined, undefined)
}

/// Assembles a report from already-scored images, grouping consecutive runs
/// of `group_size` (the trailing group averages over its actual size).
pub fn build_report(
    label: &str,
    config_digest: &str,
    group_size: usize,
    images: Vec<ImageScore>,
) -> EvalReport {
    assert!(group_size >= 1, "group size must be >= 1");
    let groups = images
        .chunks(group_size)
        .map(|chunk| {
            let (fnr, _, undefined_fnr) = mean_defined(chunk.iter().map(|s| s.rates.fnr));
            let (fpr, _, undefined_fpr) = mean_defined(chunk.iter().map(|s| s.rates.fpr));
            GroupAverage {
                members: chunk.len(),
                fnr,
                fpr,
                undefined_fnr,
                undefined_fpr,
            }
        })
        .collect();
    let (overall_fnr, _, _) = mean_defined(images.iter().map(|s| s.rates.fnr));
    let (overall_fpr, _, _) = mean_defined(images.iter().map(|s| s.rates.fpr));
    EvalReport {
        label: label.to_string(),
        config_digest: config_digest.to_string(),
        group_size,
        images,
        groups,
        overall_fnr,
        overall_fpr,
    }
}

/// Scores one prediction/ground-truth mask pair.
pub fn score_masks(name: &str, pred: &BinaryMask, gt: &BinaryMask) -> Result<ImageScore, EvalError> {
    let counts = confusion(pred, gt)?;
    Ok(ImageScore {
        name: name.to_string(),
        counts,
        rates: rates(&counts),
    })
}

/// Loads every (prediction, ground truth) pair, scores it, and groups the
/// results. Pairs are processed in input order; that order is part of the
/// protocol.
pub fn batch_eval(
    pairs: &[(PathBuf, PathBuf)],
    group_size: usize,
    label: &str,
    config_digest: &str,
) -> Result<EvalReport, EvalError> {
    let mut images = Vec::with_capacity(pairs.len());
    for (pred_path, gt_path) in pairs {
        let pred = load_mask_file(pred_path)?;
        let gt = load_mask_file(gt_path)?;
        let name = pred_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| pred_path.display().to_string());
        let counts = confusion(&pred, &gt).map_err(|_| EvalError::DimensionMismatch {
            path: pred_path.clone(),
        })?;
        images.push(ImageScore {
            name,
            counts,
            rates: rates(&counts),
        });
    }
    Ok(build_report(label, config_digest, group_size, images))
}

fn load_mask_file(path: &Path) -> Result<BinaryMask, EvalError> {
    let bytes = std::fs::read(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_mask_pgm(&bytes).map_err(|source| EvalError::Codec {
        path: path.to_path_buf(),
        source,
    })
}

fn fmt_rate(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{r:.6}"),
        None => "undef".to_string(),
    }
}

impl EvalReport {
    /// Human-readable table: per-image rows, group averages, overall means.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "run: {}", self.label);
        let _ = writeln!(out, "config digest: {}", self.config_digest);
        let _ = writeln!(out, "group size: {}", self.group_size);
        let _ = writeln!(out, "{:<28} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}", "image", "tp", "fp", "tn", "fn", "fnr", "fpr");
        for s in &self.images {
            let _ = writeln!(
                out,
                "{:<28} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
                s.name,
                s.counts.true_pos,
                s.counts.false_pos,
                s.counts.true_neg,
                s.counts.false_neg,
                fmt_rate(s.rates.fnr),
                fmt_rate(s.rates.fpr),
            );
        }
        for (i, g) in self.groups.iter().enumerate() {
            let mut flags = String::new();
            if g.undefined_fnr > 0 || g.undefined_fpr > 0 {
                flags = format!(
                    "  (excluded undefined: fnr {}, fpr {})",
                    g.undefined_fnr, g.undefined_fpr
                );
            }
            let _ = writeln!(
                out,
                "group {:>2} ({} frames): fnr {}  fpr {}{}",
                i + 1,
                g.members,
                fmt_rate(g.fnr),
                fmt_rate(g.fpr),
                flags,
            );
        }
        let _ = writeln!(
            out,
            "overall: fnr {}  fpr {}",
            fmt_rate(self.overall_fnr),
            fmt_rate(self.overall_fpr),
        );
        out
    }

    /// Machine-readable rows: name, counts and rates per image.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,tp,fp,tn,fn,fnr,fpr\n");
        for s in &self.images {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.name,
                s.counts.true_pos,
                s.counts.false_pos,
                s.counts.true_neg,
                s.counts.false_neg,
                fmt_rate(s.rates.fnr),
                fmt_rate(s.rates.fpr),
            );
        }
        out
    }

    /// Rebuilds a report from its CSV rows (rates are recomputed from the
    /// stored counts).
    pub fn from_csv(
        text: &str,
        group_size: usize,
        label: &str,
        config_digest: &str,
    ) -> Result<Self, EvalError> {
        let mut lines = text.lines();
        match lines.next() {
            Some("name,tp,fp,tn,fn,fnr,fpr") => {}
            other => {
                return Err(EvalError::BadReport(format!(
                    "unexpected header {other:?}"
                )))
            }
        }
        let mut images = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(EvalError::BadReport(format!("bad row `{line}`")));
            }
            let count = |i: usize| -> Result<usize, EvalError> {
                fields[i]
                    .parse()
                    .map_err(|_| EvalError::BadReport(format!("bad count `{}`", fields[i])))
            };
            let counts = ConfusionCounts {
                true_pos: count(1)?,
                false_pos: count(2)?,
                true_neg: count(3)?,
                false_neg: count(4)?,
            };
            images.push(ImageScore {
                name: fields[0].to_string(),
                counts,
                rates: rates(&counts),
            });
        }
        Ok(build_report(label, config_digest, group_size, images))
    }
}

/// Per-group and overall rate deltas (a - b) plus a verdict per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub label_a: String,
    pub label_b: String,
    pub group_deltas: Vec<(Option<f64>, Option<f64>)>,
    pub overall_delta_fnr: Option<f64>,
    pub overall_delta_fpr: Option<f64>,
}

pub fn compare_runs(a: &EvalReport, b: &EvalReport) -> Result<ComparisonSummary, EvalError> {
    let names_a: Vec<&str> = a.images.iter().map(|s| s.name.as_str()).collect();
    let names_b: Vec<&str> = b.images.iter().map(|s| s.name.as_str()).collect();
    if names_a != names_b {
        let detail = names_a
            .iter()
            .zip(&names_b)
            .find(|(x, y)| x != y)
            .map(|(x, y)| format!("first difference: `{x}` vs `{y}`"))
            .unwrap_or_else(|| format!("{} images vs {}", names_a.len(), names_b.len()));
        return Err(EvalError::MismatchedImageLists(detail));
    }
    if a.group_size != b.group_size {
        return Err(EvalError::MismatchedImageLists(format!(
            "group size {} vs {}",
            a.group_size, b.group_size
        )));
    }
    let delta = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    };
    let group_deltas = a
        .groups
        .iter()
        .zip(&b.groups)
        .map(|(ga, gb)| (delta(ga.fnr, gb.fnr), delta(ga.fpr, gb.fpr)))
        .collect();
    Ok(ComparisonSummary {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        group_deltas,
        overall_delta_fnr: delta(a.overall_fnr, b.overall_fnr),
        overall_delta_fpr: delta(a.overall_fpr, b.overall_fpr),
    })
}

impl ComparisonSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "comparison: {} vs {}", self.label_a, self.label_b);
        let _ = writeln!(out, "{:<8} {:>12} {:>12}", "group", "d(fnr)", "d(fpr)");
        for (i, (dfnr, dfpr)) in self.group_deltas.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<8} {:>12} {:>12}",
                i + 1,
                fmt_rate(*dfnr),
                fmt_rate(*dfpr)
            );
        }
        let _ = writeln!(
            out,
            "overall  {:>12} {:>12}",
            fmt_rate(self.overall_delta_fnr),
            fmt_rate(self.overall_delta_fpr)
        );
        for (metric, delta) in [
            ("fnr", self.overall_delta_fnr),
            ("fpr", self.overall_delta_fpr),
        ] {
            let verdict = match delta {
                Some(d) if d < 0.0 => format!("{} has lower overall {metric}", self.label_a),
                Some(d) if d > 0.0 => format!("{} has lower overall {metric}", self.label_b),
                Some(_) => format!("overall {metric} is tied"),
                None => format!("overall {metric} undefined"),
            };
            let _ = writeln!(out, "verdict: {verdict}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mask_of(bits: &[u8], w: usize, h: usize) -> BinaryMask {
        BinaryMask::new(w, h, bits.iter().map(|&b| b != 0).collect())
    }

    #[test]
    fn perfect_prediction_has_no_errors() {
        let gt = mask_of(&[1, 1, 0, 0, 1, 0], 3, 2);
        let c = confusion(&gt, &gt).unwrap();
        assert_eq!(c.false_pos, 0);
        assert_eq!(c.false_neg, 0);
        let r = rates(&c);
        assert_eq!(r.fnr, Some(0.0));
        assert_eq!(r.fpr, Some(0.0));
    }

    #[test]
    fn inverted_prediction_has_no_hits() {
        let gt = mask_of(&[1, 1, 0, 0], 2, 2);
        let pred = mask_of(&[0, 0, 1, 1], 2, 2);
        let c = confusion(&pred, &gt).unwrap();
        assert_eq!(c.true_pos, 0);
        assert_eq!(c.true_neg, 0);
    }

    #[test]
    fn worked_counts_example() {
        // 10 pixels: 6 road, 4 non-road; one road miss, two false alarms.
        let gt = mask_of(&[1, 1, 1, 1, 1, 1, 0, 0, 0, 0], 10, 1);
        let pred = mask_of(&[0, 1, 1, 1, 1, 1, 1, 1, 0, 0], 10, 1);
        let c = confusion(&pred, &gt).unwrap();
        assert_eq!(
            (c.true_pos, c.false_neg, c.false_pos, c.true_neg),
            (5, 1, 2, 2)
        );
        let r = rates(&c);
        assert!((r.fnr.unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!((r.fpr.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_denominator_yields_sentinel() {
        let gt = mask_of(&[1, 1, 1, 1], 2, 2);
        let pred = mask_of(&[1, 0, 1, 1], 2, 2);
        let r = rates(&confusion(&pred, &gt).unwrap());
        assert_eq!(r.fpr, None);
        assert!(r.fnr.is_some());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = BinaryMask::filled(2, 2, true);
        let b = BinaryMask::filled(2, 3, true);
        assert!(confusion(&a, &b).is_err());
    }

    #[test]
    fn counts_sum_to_pixel_count_and_swap_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..500 {
            let a = BinaryMask::from_fn(6, 5, |_, _| rng.gen_bool(0.5));
            let b = BinaryMask::from_fn(6, 5, |_, _| rng.gen_bool(0.5));
            let ab = confusion(&a, &b).unwrap();
            let ba = confusion(&b, &a).unwrap();
            assert_eq!(ab.total(), 30);
            assert_eq!(ab.true_pos, ba.true_pos);
            assert_eq!(ab.true_neg, ba.true_neg);
            assert_eq!(ab.false_pos, ba.false_neg);
            assert_eq!(ab.false_neg, ba.false_pos);
        }
    }

    fn score(name: &str, fnr: f64, fpr: f64) -> ImageScore {
        // Build counts realizing the requested rates over 1000+1000 pixels.
        let fn_count = (fnr * 1000.0).round() as usize;
        let fp_count = (fpr * 1000.0).round() as usize;
        let counts = ConfusionCounts {
            true_pos: 1000 - fn_count,
            false_neg: fn_count,
            false_pos: fp_count,
            true_neg: 1000 - fp_count,
        };
        ImageScore {
            name: name.to_string(),
            counts,
            rates: rates(&counts),
        }
    }

    #[test]
    fn group_averages_are_member_means() {
        let images = vec![
            score("a", 0.1, 0.0),
            score("b", 0.2, 0.3),
            score("c", 0.3, 0.3),
            score("d", 0.5, 0.1),
        ];
        let report = build_report("test", "digest", 3, images);
        assert_eq!(report.groups.len(), 2);
        assert!((report.groups[0].fnr.unwrap() - 0.2).abs() < 1e-12);
        assert!((report.groups[0].fpr.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(report.groups[1].members, 1);
        assert!((report.groups[1].fnr.unwrap() - 0.5).abs() < 1e-12);
        assert!((report.overall_fnr.unwrap() - 0.275).abs() < 1e-12);
    }

    #[test]
    fn undefined_rates_are_excluded_and_flagged() {
        let mut images = vec![score("a", 0.1, 0.2)];
        let all_road = ConfusionCounts {
            true_pos: 10,
            false_neg: 0,
            false_pos: 0,
            true_neg: 0,
        };
        images.push(ImageScore {
            name: "b".to_string(),
            counts: all_road,
            rates: rates(&all_road),
        });
        let report = build_report("test", "digest", 3, images);
        assert_eq!(report.groups[0].undefined_fpr, 1);
        assert!((report.groups[0].fpr.unwrap() - 0.2).abs() < 1e-12);
        assert!(report.to_text().contains("excluded undefined"));
    }

    #[test]
    fn csv_round_trip_preserves_scores() {
        let images = vec![score("one", 0.125, 0.25), score("two", 0.0, 0.0)];
        let report = build_report("run", "d00d", 3, images);
        let csv = report.to_csv();
        let back = EvalReport::from_csv(&csv, 3, "run", "d00d").unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn comparison_requires_matching_lists() {
        let a = build_report("a", "x", 3, vec![score("img1", 0.1, 0.1)]);
        let b = build_report("b", "x", 3, vec![score("other", 0.1, 0.1)]);
        assert!(matches!(
            compare_runs(&a, &b),
            Err(EvalError::MismatchedImageLists(_))
        ));
    }

    #[test]
    fn comparison_deltas_and_verdict() {
        let a = build_report(
            "with",
            "x",
            3,
            vec![score("i1", 0.1, 0.2), score("i2", 0.1, 0.2)],
        );
        let b = build_report(
            "without",
            "x",
            3,
            vec![score("i1", 0.3, 0.1), score("i2", 0.3, 0.1)],
        );
        let cmp = compare_runs(&a, &b).unwrap();
        assert!((cmp.overall_delta_fnr.unwrap() + 0.2).abs() < 1e-12);
        assert!((cmp.overall_delta_fpr.unwrap() - 0.1).abs() < 1e-12);
        let text = cmp.to_text();
        assert!(text.contains("with has lower overall fnr"));
        assert!(text.contains("without has lower overall fpr"));
        let same = compare_runs(&a, &a).unwrap();
        assert_eq!(same.overall_delta_fnr, Some(0.0));
    }

    #[test]
    fn batch_eval_groups_of_three_over_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut pairs = Vec::new();
        for i in 0..4 {
            let gt = BinaryMask::from_fn(4, 4, |x, _| x < 2);
            let pred = BinaryMask::from_fn(4, 4, |x, y| x < 2 && !(i == 0 && y == 0));
            let pred_path = dir.path().join(format!("frame_{i}.pgm"));
            let gt_path = dir.path().join(format!("gt_{i}.pgm"));
            std::fs::write(&pred_path, crate::netpbm::save_mask_pgm(&pred)).unwrap();
            std::fs::write(&gt_path, crate::netpbm::save_mask_pgm(&gt)).unwrap();
            pairs.push((pred_path, gt_path));
        }
        let report = batch_eval(&pairs, 3, "files", "digest").unwrap();
        assert_eq!(report.images.len(), 4);
        assert_eq!(report.groups.len(), 2);
        assert_eq!(report.groups[0].members, 3);
        assert_eq!(report.groups[1].members, 1);
        assert_eq!(report.images[0].name, "frame_0");
        assert!(report.images[0].rates.fnr.unwrap() > 0.0);
        assert_eq!(report.images[1].rates.fnr, Some(0.0));
    }

    #[test]
    fn batch_eval_reports_offending_path() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.pgm");
        std::fs::write(&good, crate::netpbm::save_mask_pgm(&BinaryMask::filled(2, 2, true)))
            .unwrap();
        let missing = dir.path().join("missing.pgm");
        let err = batch_eval(&[(good, missing.clone())], 3, "x", "y").unwrap_err();
        match err {
            EvalError::Io { path, .. } => assert_eq!(path, missing),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
