//! Human-readable comparison of ROC curves.
//!
//! Detection rates are read off each empirical ROC at a false-alarm rate of
//! 0.1 (linear interpolation between grid points). Under noise uncertainty the
//! realised false-alarm rate can sit far from the nominal CFAR target, so the
//! row whose target is nearest 0.1 is listed alongside for reference.

use std::fmt::Write;

use css_core::montecarlo::{auc, auc_std_error, pd_at_pfa, RocCurve};

/// Operating false-alarm rate of the comparison.
pub const OPERATING_PFA: f64 = 0.1;

struct Row<'a> {
    label: &'a str,
    auc: Option<(f64, f64)>,
    pd: Option<(f64, f64)>,
}

fn rows(curves: &[RocCurve]) -> Vec<Row<'_>> {
    curves
        .iter()
        .map(|c| Row {
            label: &c.label,
            auc: auc(c).ok().map(|a| (a, auc_std_error(c))),
            pd: pd_at_pfa(c, OPERATING_PFA),
        })
        .collect()
}

/// Label of the conventional hard-decision curve a curve is compared with.
fn hard_baseline(label: &str) -> Option<String> {
    if let Some(rest) = label.strip_prefix("proposed-") {
        Some(format!("conventional-{rest}"))
    } else if label.starts_with("conventional-") {
        Some(label.to_string())
    } else {
        None
    }
}

/// Label of the MRC curve sharing this curve's CR-count suffix.
fn mrc_baseline(label: &str) -> Option<String> {
    let rest = label.strip_prefix("proposed-")?;
    Some(match rest.rsplit_once('-') {
        Some((_, suffix)) if suffix.starts_with('k') => format!("mrc-{suffix}"),
        _ => "mrc".to_string(),
    })
}

/// The first other curve labelled `label`.
fn find<'a>(rows: &'a [Row<'a>], label: &str, exclude: usize) -> Option<&'a Row<'a>> {
    rows.iter().enumerate().find(|(i, r)| *i != exclude && r.label == label).map(|(_, r)| r)
}

fn ratio_line(out: &mut String, a: &Row, b: &Row) {
    match (a.pd, b.pd) {
        (Some((pa, _)), Some((pb, _))) if pb > 0.0 => {
            let _ = writeln!(out, "  {} / {} = {:.3}", a.label, b.label, pa / pb);
        }
        _ => {
            let _ = writeln!(out, "  {} / {}: undefined (zero baseline)", a.label, b.label);
        }
    }
}

/// Text report: AUC and detection rate at the operating point for every curve,
/// then detection-rate ratios against the conventional hard-decision baseline
/// (and against MRC where present).
pub fn summarize(curves: &[RocCurve]) -> String {
    let rows = rows(curves);
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>17}  {:>17}  nearest target row (target, pfa_hat, pd_hat)",
        "curve", "AUC", "P_d @ P_fa=0.1"
    );
    for (row, curve) in rows.iter().zip(curves) {
        let auc = row.auc.map_or("n/a".to_string(), |(a, s)| format!("{a:.4} ± {s:.4}"));
        let pd = row.pd.map_or("n/a".to_string(), |(p, s)| format!("{p:.4} ± {s:.4}"));
        let nearest = curve
            .points
            .iter()
            .min_by(|a, b| {
                (a.pfa_target - OPERATING_PFA)
                    .abs()
                    .total_cmp(&(b.pfa_target - OPERATING_PFA).abs())
            })
            .map_or("n/a".to_string(), |p| {
                format!("({:.4}, {:.4}, {:.4})", p.pfa_target, p.pfa_hat, p.pd_hat)
            });
        let _ = writeln!(out, "{:<width$}  {auc:>17}  {pd:>17}  {nearest}", row.label);
    }

    let mut ratios = String::new();
    let mut missing = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        match hard_baseline(row.label) {
            Some(base) => match find(&rows, &base, i) {
                Some(b) => ratio_line(&mut ratios, row, b),
                None if base != row.label => missing.push(base),
                None => {}
            },
            None => {
                // a repeated label is its own baseline
                if let Some(b) = find(&rows, row.label, i) {
                    ratio_line(&mut ratios, row, b);
                }
            }
        }
        if let Some(mrc) = mrc_baseline(row.label) {
            if let Some(b) = find(&rows, &mrc, i) {
                ratio_line(&mut ratios, row, b);
            }
        }
    }
    if !ratios.is_empty() {
        let _ = writeln!(out, "\nP_d ratios at P_fa = {OPERATING_PFA}:");
        out.push_str(&ratios);
    }
    for m in missing {
        let _ = writeln!(out, "note: baseline curve '{m}' not present; its ratio is omitted");
    }

    if let Some(search) = cr_count_table(&rows) {
        out.push('\n');
        out.push_str(&search);
    }
    out
}

type KPoint = (usize, f64, f64);

/// For curve families labelled `<family>-k<K>`, the smallest K of each family
/// whose detection rate reaches that of `proposed-or-k3`, less one standard error.
fn cr_count_table(rows: &[Row]) -> Option<String> {
    let reference = rows.iter().find(|r| r.label == "proposed-or-k3")?;
    let (target, _) = reference.pd?;
    // (K, pd, se) per family
    let mut families: Vec<(&str, Vec<KPoint>)> = Vec::new();
    for r in rows {
        let Some((family, k)) = r.label.rsplit_once("-k") else { continue };
        let (Ok(k), Some((pd, se))) = (k.parse::<usize>(), r.pd) else { continue };
        match families.iter_mut().find(|(f, _)| *f == family) {
            Some((_, v)) => v.push((k, pd, se)),
            None => families.push((family, vec![(k, pd, se)])),
        }
    }
    let mut out = format!("CRs needed to reach P_d = {target:.4} at P_fa = {OPERATING_PFA} (proposed-or with K=3):\n");
    for (family, mut v) in families {
        v.sort_by_key(|x| x.0);
        let k_max = v.last().map_or(0, |x| x.0);
        let found = v.iter().find(|(_, pd, se)| *pd >= target - se).map(|x| x.0);
        let _ = match found {
            Some(k) => writeln!(out, "  {family}: {k}"),
            None => writeln!(out, "  {family}: more than {k_max}"),
        };
    }
    Some(out)
}
