//! Timing algebra.
//!
//! Per weight assignment the quantum cost is
//! `t_prog + k99 * t_anneal + t_post`; the hybrid total embeds once,
//!
//! ```text
//! T_H   = t_embed + sum_i term_i
//! T_std = sum_i (t_embed_i + term_i)
//! R_C   = T_H / T_C
//! ```
//!
//! where `t_embed_i = t_embed` unless the standard run really re-embedded.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::TimingModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("success fraction {0} outside [0, 1]")]
    SuccessOutOfRange(f64),
    #[error("target probability {0} outside (0, 1)")]
    TargetOutOfRange(f64),
    #[error("ledger has no assignment rows")]
    Empty,
    #[error("ledger field {field} is negative or not finite ({value})")]
    Negative { field: &'static str, value: f64 },
    #[error("row {row}: {successes} successes out of {reads} reads")]
    BadCounts { row: usize, successes: usize, reads: usize },
    #[error("k99 is unsolved")]
    Unsolved,
}

/// Repetitions needed to reach the target probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum K99 {
    Finite(u64),
    /// `s = 0`: no read hit the optimum.
    Unsolved,
}

impl K99 {
    pub fn finite(self) -> Option<u64> {
        match self {
            K99::Finite(k) => Some(k),
            K99::Unsolved => None,
        }
    }
}

impl fmt::Display for K99 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            K99::Finite(k) => write!(f, "{k}"),
            K99::Unsolved => f.write_str("unsolved"),
        }
    }
}

/// `ceil(ln(1-p) / ln(1-s))`, at least 1. `s = 1` gives 1, `s = 0` is unsolved.
pub fn k99(s: f64, p: f64) -> Result<K99, MetricsError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(MetricsError::SuccessOutOfRange(s));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(MetricsError::TargetOutOfRange(p));
    }
    if s == 0.0 {
        return Ok(K99::Unsolved);
    }
    if s == 1.0 {
        return Ok(K99::Finite(1));
    }
    let ratio = (-p).ln_1p() / (-s).ln_1p();
    // absorb rounding noise so that an exact integer ratio is not bumped up
    let k = (ratio - 1e-9 * ratio.max(1.0)).ceil();
    Ok(K99::Finite((k as u64).max(1)))
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// One weight assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    /// Rebuilding the diagonal of the embedded QUBO.
    pub t_conv_ms: f64,
    /// Sampler setup.
    pub t_pre_ms: f64,
    pub t_prog_ms: f64,
    pub t_anneal_ms: f64,
    pub t_post_ms: f64,
    pub reads: usize,
    /// Reads whose logical energy reached the classical optimum.
    pub n_opt: usize,
    pub k99: K99,
    /// Per-assignment embedding time when the standard run re-embedded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_embed_ms: Option<f64>,
}

impl AssignmentRow {
    pub fn success(&self) -> f64 {
        if self.reads == 0 {
            0.0
        } else {
            self.n_opt as f64 / self.reads as f64
        }
    }

    /// `k99 * t_anneal`, or `None` when unsolved.
    pub fn anneal_ms(&self) -> Option<f64> {
        self.k99.finite().map(|k| k as f64 * self.t_anneal_ms)
    }
}

/// Row from sampler counts and the timing constants.
pub fn assignment_row(
    model: &TimingModel,
    reads: usize,
    n_opt: usize,
    p: f64,
    t_conv_ms: f64,
    t_pre_ms: f64,
) -> Result<AssignmentRow, MetricsError> {
    if reads == 0 || n_opt > reads {
        return Err(MetricsError::BadCounts { row: 0, successes: n_opt, reads });
    }
    let k99 = k99(n_opt as f64 / reads as f64, p)?;
    Ok(AssignmentRow {
        t_conv_ms,
        t_pre_ms,
        t_prog_ms: model.t_prog_ms,
        t_anneal_ms: model.t_anneal_ms,
        t_post_ms: model.t_post_ms,
        reads,
        n_opt,
        k99,
        t_embed_ms: None,
    })
}

/// `t_prog + k99 * t_anneal + t_post`.
pub fn instance_quantum_time(row: &AssignmentRow) -> Result<f64, MetricsError> {
    let anneal = row.anneal_ms().ok_or(MetricsError::Unsolved)?;
    Ok(row.t_prog_ms + anneal + row.t_post_ms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingLedger {
    pub instance: String,
    #[serde(default)]
    pub family: Option<String>,
    pub n_vertices: usize,
    /// The single embedding used by the hybrid run.
    pub t_embed_ms: f64,
    /// Independent repeats for the spread of `t_embed`.
    #[serde(default)]
    pub embed_repeats_ms: Vec<f64>,
    pub embed_calls: usize,
    pub rows: Vec<AssignmentRow>,
    /// Classical time from the baseline ledger.
    #[serde(default)]
    pub t_c_ms: Option<f64>,
}

impl TimingLedger {
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.rows.is_empty() {
            return Err(MetricsError::Empty);
        }
        let check = |field: &'static str, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(MetricsError::Negative { field, value })
            }
        };
        check("t_embed_ms", self.t_embed_ms)?;
        for &v in &self.embed_repeats_ms {
            check("embed_repeats_ms", v)?;
        }
        if let Some(t) = self.t_c_ms {
            check("t_c_ms", t)?;
        }
        for (i, r) in self.rows.iter().enumerate() {
            check("t_conv_ms", r.t_conv_ms)?;
            check("t_pre_ms", r.t_pre_ms)?;
            check("t_prog_ms", r.t_prog_ms)?;
            check("t_anneal_ms", r.t_anneal_ms)?;
            check("t_post_ms", r.t_post_ms)?;
            if let Some(t) = r.t_embed_ms {
                check("t_embed_ms", t)?;
            }
            if r.reads == 0 || r.n_opt > r.reads {
                return Err(MetricsError::BadCounts { row: i, successes: r.n_opt, reads: r.reads });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        Some(Spread { min: v[0], max: v[n - 1], mean: compensated_sum(v.iter().copied()) / n as f64, median })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwmwisReport {
    pub instance: String,
    pub family: Option<String>,
    pub n_vertices: usize,
    pub m: usize,
    pub t_embed_ms: f64,
    pub t_h_ms: f64,
    pub t_std_ms: f64,
    pub t_c_ms: Option<f64>,
    pub r_c: Option<f64>,
    /// Some rows were unsolved and left out of the sums.
    pub partial: bool,
    pub unsolved_count: usize,
    pub success: Vec<f64>,
    pub success_ci: Vec<(f64, f64)>,
    pub n_opt: Vec<usize>,
    pub terms_ms: Vec<Option<f64>>,
    pub embed_spread: Option<Spread>,
}

pub fn aggregate(ledger: &TimingLedger) -> Result<DwmwisReport, MetricsError> {
    ledger.validate()?;
    let terms: Vec<Option<f64>> = ledger.rows.iter().map(|r| instance_quantum_time(r).ok()).collect();
    let unsolved_count = terms.iter().filter(|t| t.is_none()).count();
    let solved = || ledger.rows.iter().zip(&terms).filter_map(|(r, t)| t.map(|t| (r, t)));

    let t_h_ms = compensated_sum(std::iter::once(ledger.t_embed_ms).chain(solved().map(|(_, t)| t)));
    let t_std_ms = compensated_sum(solved().flat_map(|(r, t)| [r.t_embed_ms.unwrap_or(ledger.t_embed_ms), t]));
    let r_c = match ledger.t_c_ms {
        Some(t_c) if t_c > 0.0 => Some(t_h_ms / t_c),
        _ => {
            tracing::warn!(instance = %ledger.instance, "no classical time, R_C omitted");
            None
        }
    };
    Ok(DwmwisReport {
        instance: ledger.instance.clone(),
        family: ledger.family.clone(),
        n_vertices: ledger.n_vertices,
        m: ledger.m(),
        t_embed_ms: ledger.t_embed_ms,
        t_h_ms,
        t_std_ms,
        t_c_ms: ledger.t_c_ms,
        r_c,
        partial: unsolved_count > 0,
        unsolved_count,
        success: ledger.rows.iter().map(AssignmentRow::success).collect(),
        success_ci: ledger.rows.iter().map(|r| wilson_interval(r.n_opt, r.reads)).collect(),
        n_opt: ledger.rows.iter().map(|r| r.n_opt).collect(),
        terms_ms: terms,
        embed_spread: Spread::of(&ledger.embed_repeats_ms),
    })
}

pub const CORPUS_HEADER: &str = "instance,family,n_vertices,m,t_embed_ms,T_H_ms,T_std_ms,T_C_ms,R_C,unsolved_count";
pub const DETAIL_HEADER: &str =
    "instance,assignment,t_conv_ms,t_pre_ms,t_prog_ms,k99,anneal_ms,t_post_ms,term_ms,s,s_lo,s_hi,n_opt,reads";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl DwmwisReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{},{},{}",
            self.instance,
            self.family.as_deref().unwrap_or(""),
            self.n_vertices,
            self.m,
            self.t_embed_ms,
            self.t_h_ms,
            self.t_std_ms,
            opt(self.t_c_ms),
            opt(self.r_c),
            self.unsolved_count
        )
    }
}

/// Corpus CSV with the fixed header, one row per report, in the given order.
pub fn corpus_csv(reports: &[DwmwisReport]) -> String {
    let mut out = format!("{CORPUS_HEADER}\n");
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Per-assignment detail CSV.
pub fn detail_csv(ledgers: &[TimingLedger]) -> String {
    let mut out = format!("{DETAIL_HEADER}\n");
    for l in ledgers {
        for (i, r) in l.rows.iter().enumerate() {
            let (lo, hi) = wilson_interval(r.n_opt, r.reads);
            let term = instance_quantum_time(r).ok();
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{},{},{:.6},{},{:.6},{:.6},{:.6},{},{}",
                l.instance,
                i,
                r.t_conv_ms,
                r.t_pre_ms,
                r.t_prog_ms,
                r.k99,
                opt(r.anneal_ms()),
                r.t_post_ms,
                opt(term),
                r.success(),
                lo,
                hi,
                r.n_opt,
                r.reads
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(k: K99) -> AssignmentRow {
        AssignmentRow {
            t_conv_ms: 0.0,
            t_pre_ms: 0.0,
            t_prog_ms: 20.0,
            t_anneal_ms: 0.309,
            t_post_ms: 20.0,
            reads: 100,
            n_opt: if k == K99::Unsolved { 0 } else { 50 },
            k99: k,
            t_embed_ms: None,
        }
    }

    fn ledger(m: usize, t_embed: f64) -> TimingLedger {
        TimingLedger {
            instance: "x".into(),
            family: Some("cycle".into()),
            n_vertices: 6,
            t_embed_ms: t_embed,
            embed_repeats_ms: vec![],
            embed_calls: 1,
            rows: vec![row(K99::Finite(7)); m],
            t_c_ms: Some(2.0),
        }
    }

    #[test]
    fn k99_values() {
        assert_eq!(k99(0.99, 0.99).unwrap(), K99::Finite(1));
        assert_eq!(k99(0.5, 0.99).unwrap(), K99::Finite(7));
        assert_eq!(k99(1.0, 0.99).unwrap(), K99::Finite(1));
        assert_eq!(k99(0.0, 0.99).unwrap(), K99::Unsolved);
        assert_eq!(k99(0.999, 0.99).unwrap(), K99::Finite(1));
        assert_eq!(k99(0.1, 0.99).unwrap(), K99::Finite(44));
        assert!(k99(1.5, 0.99).is_err());
        assert!(k99(0.5, 1.0).is_err());
    }

    #[test]
    fn quantum_time_examples() {
        let t1 = instance_quantum_time(&row(K99::Finite(1))).unwrap();
        assert!((t1 - 40.309).abs() < 1e-12);
        let t7 = instance_quantum_time(&row(K99::Finite(7))).unwrap();
        assert!((t7 - 42.163).abs() < 1e-12);
        assert_eq!(instance_quantum_time(&row(K99::Unsolved)), Err(MetricsError::Unsolved));
    }

    #[test]
    fn aggregate_examples() {
        let r = aggregate(&ledger(100, 1000.0)).unwrap();
        assert!(((r.t_std_ms - r.t_h_ms) - 99_000.0).abs() < 1e-9);
        let r = aggregate(&ledger(1, 1000.0)).unwrap();
        assert_eq!(r.t_h_ms, r.t_std_ms);
        let r = aggregate(&ledger(10, 0.0)).unwrap();
        assert_eq!(r.t_h_ms, r.t_std_ms);
        assert_eq!(r.r_c, Some(r.t_h_ms / 2.0));

        let mut l = ledger(3, 5.0);
        l.rows[1] = row(K99::Unsolved);
        l.t_c_ms = None;
        let r = aggregate(&l).unwrap();
        assert!(r.partial);
        assert_eq!(r.unsolved_count, 1);
        assert_eq!(r.r_c, None);
        assert!(r.csv_row().ends_with(",,1"));
    }

    #[test]
    fn rejects_invalid_ledgers() {
        assert_eq!(aggregate(&ledger(0, 1.0)).unwrap_err(), MetricsError::Empty);
        let mut l = ledger(2, 1.0);
        l.rows[0].t_post_ms = -1.0;
        assert!(matches!(aggregate(&l), Err(MetricsError::Negative { field: "t_post_ms", .. })));
        let mut l = ledger(2, 1.0);
        l.rows[1].n_opt = 200;
        assert!(matches!(aggregate(&l), Err(MetricsError::BadCounts { row: 1, .. })));
    }

    #[test]
    fn spread_and_wilson() {
        let s = Spread::of(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!((s.min, s.max, s.mean, s.median), (1.0, 10.0, 4.0, 2.5));
        assert_eq!(Spread::of(&[]), None);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(lo > 0.96 && hi == 1.0);
    }

    #[test]
    fn csv_layout() {
        let r = aggregate(&ledger(2, 1.5)).unwrap();
        let csv = corpus_csv(&[r]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CORPUS_HEADER));
        assert_eq!(lines.next(), Some("x,cycle,6,2,1.500000,85.826000,87.326000,2.000000,42.913000,0"));
        let detail = detail_csv(&[ledger(1, 1.0)]);
        assert_eq!(detail.lines().count(), 2);
        assert_eq!(detail.lines().nth(1).unwrap().split(',').count(), DETAIL_HEADER.split(',').count());
    }

    #[test]
    fn report_round_trip() {
        let mut l = ledger(4, 3.25);
        l.embed_repeats_ms = vec![1.0, 2.0, 3.0];
        l.rows[2] = row(K99::Unsolved);
        l.rows[3].t_embed_ms = Some(0.1 + 0.2);
        let text = serde_json::to_string(&l).unwrap();
        assert_eq!(serde_json::from_str::<TimingLedger>(&text).unwrap(), l);
        let r = aggregate(&l).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<DwmwisReport>(&text).unwrap(), r);
    }

    proptest! {
        #[test]
        fn k99_monotone(a in 0.0001f64..1.0, b in 0.0001f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let kl = k99(lo, 0.99).unwrap().finite().unwrap();
            let kh = k99(hi, 0.99).unwrap().finite().unwrap();
            prop_assert!(kh <= kl);
            prop_assert!(kh >= 1);
        }

        #[test]
        fn identity(m in 2usize..200, t_embed in 1.0f64..1e5, anneal in 0.0f64..1.0, ks in proptest::collection::vec(1u64..100, 1..8)) {
            let mut l = ledger(m, t_embed);
            for (i, r) in l.rows.iter_mut().enumerate() {
                r.k99 = K99::Finite(ks[i % ks.len()]);
                r.t_anneal_ms = anneal;
            }
            let rep = aggregate(&l).unwrap();
            let expected = (m as f64 - 1.0) * t_embed;
            let rel = ((rep.t_std_ms - rep.t_h_ms) - expected).abs() / expected;
            prop_assert!(rel < 1e-12, "relative error {rel}");
            prop_assert!(rep.t_std_ms >= rep.t_h_ms);
        }
    }
}
