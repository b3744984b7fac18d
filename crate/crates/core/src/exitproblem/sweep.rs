//! β sweeps and feature location on the resulting tables.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exitproblem::{solve_all, Resolution};
use crate::flowfield::{JetParameters, BETA_MAX};
use crate::geometry::{build_eddy_domain, build_jet_core_domain, Phase};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepColumn {
    /// Eddy, escape into the jet core.
    PEddyUpper,
    /// Eddy, escape into the exterior retrograde region.
    PEddyLower,
    /// Jet core, escape into the northern recirculating region.
    PCoreUpper,
    /// Jet core, escape into the southern recirculating region.
    PCoreLower,
    MaxMrtEddy,
    MaxMrtCore,
}

impl SweepColumn {
    pub const ALL: [SweepColumn; 6] = [
        SweepColumn::PEddyUpper,
        SweepColumn::PEddyLower,
        SweepColumn::PCoreUpper,
        SweepColumn::PCoreLower,
        SweepColumn::MaxMrtEddy,
        SweepColumn::MaxMrtCore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepColumn::PEddyUpper => "p_eddy_upper",
            SweepColumn::PEddyLower => "p_eddy_lower",
            SweepColumn::PCoreUpper => "p_core_upper",
            SweepColumn::PCoreLower => "p_core_lower",
            SweepColumn::MaxMrtEddy => "max_mrt_eddy",
            SweepColumn::MaxMrtCore => "max_mrt_core",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        SweepColumn::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub p_eddy_upper: Option<f64>,
    pub p_eddy_lower: Option<f64>,
    pub p_core_upper: Option<f64>,
    pub p_core_lower: Option<f64>,
    pub max_mrt_eddy: Option<f64>,
    pub max_mrt_core: Option<f64>,
    /// Why the row is incomplete.
    pub error: Option<String>,
}

impl SweepRow {
    pub fn get(&self, c: SweepColumn) -> Option<f64> {
        match c {
            SweepColumn::PEddyUpper => self.p_eddy_upper,
            SweepColumn::PEddyLower => self.p_eddy_lower,
            SweepColumn::PCoreUpper => self.p_core_upper,
            SweepColumn::PCoreLower => self.p_core_lower,
            SweepColumn::MaxMrtEddy => self.max_mrt_eddy,
            SweepColumn::MaxMrtCore => self.max_mrt_core,
        }
    }

    pub fn set(&mut self, c: SweepColumn, v: Option<f64>) {
        let slot = match c {
            SweepColumn::PEddyUpper => &mut self.p_eddy_upper,
            SweepColumn::PEddyLower => &mut self.p_eddy_lower,
            SweepColumn::PCoreUpper => &mut self.p_core_upper,
            SweepColumn::PCoreLower => &mut self.p_core_lower,
            SweepColumn::MaxMrtEddy => &mut self.max_mrt_eddy,
            SweepColumn::MaxMrtCore => &mut self.max_mrt_core,
        };
        *slot = v;
    }

    pub fn is_complete(&self) -> bool {
        self.error.is_none() && SweepColumn::ALL.iter().all(|&c| self.get(c).is_some())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub betas: Vec<f64>,
    pub phase: Phase,
    pub resolution: Resolution,
    pub code_version: String,
    /// SHA-256 over the serialized configuration and code version.
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub phase: Phase,
    pub resolution: Resolution,
}

/// `n` equally spaced values on [lo, hi].
pub fn default_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Adds points at `step` spacing within `half_width` of each center, keeping
/// the grid sorted and dropping near-duplicates.
pub fn refine_grid(grid: &[f64], centers: &[f64], step: f64, half_width: f64) -> Vec<f64> {
    let mut out: Vec<f64> = grid.to_vec();
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for &c in centers {
        let n = (half_width / step).round() as i64;
        let base = (c / step).round() * step;
        for i in -n..=n {
            let b = base + i as f64 * step;
            if b >= lo && b <= hi {
                out.push(b);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 0.25 * step);
    out
}

/// Solves everything needed for one table row.
pub fn sweep_row(beta: f64, res: &Resolution, phase: Phase) -> SweepRow {
    let mut row = SweepRow {
        beta,
        ..SweepRow::default()
    };
    let eddy = || -> Result<_> {
        let p = JetParameters::with_beta(beta)?;
        let d = build_eddy_domain(&p)?;
        solve_all(&p, &d, res)
    };
    let core = || -> Result<_> {
        let p = JetParameters::with_beta(beta)?;
        let d = build_jet_core_domain(&p, phase)?;
        solve_all(&p, &d, res)
    };
    let mut errors = Vec::new();
    match eddy() {
        Ok(s) => {
            row.p_eddy_upper = Some(s.upper.average);
            row.p_eddy_lower = Some(s.lower.average);
            row.max_mrt_eddy = Some(s.max_mrt);
        }
        Err(e) => errors.push(e.to_string()),
    }
    match core() {
        Ok(s) => {
            row.p_core_upper = Some(s.upper.average);
            row.p_core_lower = Some(s.lower.average);
            row.max_mrt_core = Some(s.max_mrt);
        }
        Err(e) => errors.push(e.to_string()),
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// One row per β, computed in parallel and gathered in input order. Failed
/// rows keep their error message and the sweep carries on.
pub fn sweep_beta(betas: &[f64], res: &Resolution, phase: Phase) -> Result<SweepTable> {
    if let Some(&b) = betas.iter().find(|b| !(0.0..=BETA_MAX).contains(*b)) {
        return Err(Error::ParameterDomain {
            field: "beta",
            value: b,
            expected: "0 <= beta <= 2/3",
        });
    }
    if betas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::DegenerateInput("sweep betas must be strictly increasing".into()));
    }
    let rows = betas.par_iter().map(|&b| sweep_row(b, res, phase)).collect();
    Ok(SweepTable {
        rows,
        phase,
        resolution: res.clone(),
    })
}

/// β values worth refining around: every crossing and extremum that the
/// table currently resolves.
pub fn refinement_centers(t: &SweepTable) -> Vec<f64> {
    let mut centers = Vec::new();
    for (a, b) in [
        (SweepColumn::PEddyLower, SweepColumn::PEddyUpper),
        (SweepColumn::PCoreUpper, SweepColumn::PCoreLower),
    ] {
        if let Ok(x) = find_crossing(t, a, b) {
            centers.push(x);
        }
    }
    for c in [SweepColumn::PEddyLower, SweepColumn::MaxMrtEddy] {
        if let Ok(x) = find_extremum(t, c) {
            centers.push(x);
        }
    }
    centers
}

/// Sweeps `grid`, then adds 0.01-spaced rows within ±0.03 of each detected
/// feature.
pub fn sweep_refined(grid: &[f64], res: &Resolution, phase: Phase) -> Result<SweepTable> {
    let mut table = sweep_beta(grid, res, phase)?;
    let refined = refine_grid(grid, &refinement_centers(&table), 0.01, 0.03);
    let extra: Vec<f64> = refined
        .into_iter()
        .filter(|b| !grid.iter().any(|g| (g - b).abs() < 1e-9))
        .collect();
    if !extra.is_empty() {
        table.merge(sweep_beta(&extra, res, phase)?);
    }
    Ok(table)
}

/// Half the grid spacing around `beta`: the sampling uncertainty of a
/// feature located there.
pub fn grid_uncertainty(t: &SweepTable, beta: f64) -> f64 {
    let b = t.betas();
    let i = b.partition_point(|&x| x < beta).clamp(1, b.len().max(2) - 1);
    match (b.get(i - 1), b.get(i)) {
        (Some(lo), Some(hi)) => 0.5 * (hi - lo),
        _ => f64::NAN,
    }
}

impl SweepTable {
    pub fn betas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.beta).collect()
    }

    /// (β, value) for rows where the column is present.
    pub fn column(&self, c: SweepColumn) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| r.get(c).map(|v| (r.beta, v))).collect()
    }

    pub fn failed_rows(&self) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.error.is_some()).collect()
    }

    /// Merges rows from `other`, replacing rows with the same β.
    pub fn merge(&mut self, other: SweepTable) {
        for r in other.rows {
            match self.rows.iter().position(|q| q.beta == r.beta) {
                Some(i) => self.rows[i] = r,
                None => self.rows.push(r),
            }
        }
        self.rows.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("beta");
        for c in SweepColumn::ALL {
            s.push(',');
            s.push_str(c.name());
        }
        s.push_str(",error\n");
        for r in &self.rows {
            let _ = write!(s, "{:?}", r.beta);
            for c in SweepColumn::ALL {
                match r.get(c) {
                    Some(v) => {
                        let _ = write!(s, ",{v:?}");
                    }
                    None => s.push(','),
                }
            }
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n', '"'], " ");
            let _ = writeln!(s, ",{err}");
        }
        s
    }

    pub fn from_csv(text: &str, phase: Phase, resolution: Resolution) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let cols: Vec<Option<SweepColumn>> = header.iter().map(|h| SweepColumn::from_name(h)).collect();
        if header.first() != Some(&"beta") {
            return Err(Error::DegenerateInput("sweep CSV must start with a beta column".into()));
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::DegenerateInput(format!("bad number `{s}` in sweep CSV")))
            };
            let mut row = SweepRow {
                beta: parse(fields[0])?,
                ..SweepRow::default()
            };
            for (k, f) in fields.iter().enumerate().skip(1) {
                match (cols.get(k).copied().flatten(), header.get(k)) {
                    (Some(c), _) if !f.is_empty() => row.set(c, Some(parse(f)?)),
                    (None, Some(&"error")) if !f.is_empty() => row.error = Some(f.to_string()),
                    _ => {}
                }
            }
            rows.push(row);
        }
        Ok(SweepTable {
            rows,
            phase,
            resolution,
        })
    }

    pub fn metadata(&self) -> SweepMetadata {
        let code_version = env!("CARGO_PKG_VERSION").to_string();
        let config = serde_json::json!({
            "betas": self.betas(),
            "phase": self.phase,
            "resolution": self.resolution,
            "code_version": code_version,
        });
        let digest = Sha256::digest(config.to_string().as_bytes());
        let config_hash = digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        SweepMetadata {
            betas: self.betas(),
            phase: self.phase,
            resolution: self.resolution.clone(),
            code_version,
            config_hash,
        }
    }
}

fn sign_char(v: f64) -> char {
    if v > 0.0 {
        '+'
    } else if v < 0.0 {
        '-'
    } else {
        '0'
    }
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant.
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![s[0]; 2];
        } else {
            for i in 1..n - 1 {
                if s[i - 1] * s[i] > 0.0 {
                    let (w1, w2) = (2.0 * h[i] + h[i - 1], h[i] + 2.0 * h[i - 1]);
                    d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
                }
            }
            let end = |h0: f64, h1: f64, s0: f64, s1: f64| {
                let v = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
                if v * s0 <= 0.0 {
                    0.0
                } else if s0 * s1 <= 0.0 && v.abs() > 3.0 * s0.abs() {
                    3.0 * s0
                } else {
                    v
                }
            };
            d[0] = end(h[0], h[1], s[0], s[1]);
            d[n - 1] = end(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
        }
        Pchip { x, y, d }
    }

    fn eval_in(&self, i: usize, t: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let (h00, h10) = ((1.0 + 2.0 * u) * (1.0 - u).powi(2), u * (1.0 - u).powi(2));
        let (h01, h11) = (u * u * (3.0 - 2.0 * u), u * u * (u - 1.0));
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

/// β where column `a` minus column `b` changes sign.
pub fn find_crossing(t: &SweepTable, a: SweepColumn, b: SweepColumn) -> Result<f64> {
    find_crossing_in(t, a, b, (f64::NEG_INFINITY, f64::INFINITY))
}

/// As [`find_crossing`], using only rows with β inside `range`.
pub fn find_crossing_in(t: &SweepTable, a: SweepColumn, b: SweepColumn, range: (f64, f64)) -> Result<f64> {
    let (xs, ds): (Vec<f64>, Vec<f64>) = t
        .rows
        .iter()
        .filter(|r| r.beta >= range.0 && r.beta <= range.1)
        .filter_map(|r| Some((r.beta, r.get(a)? - r.get(b)?)))
        .unzip();
    let pattern: String = ds.iter().map(|&v| sign_char(v)).collect();
    let structure = || Error::CrossingStructure {
        pattern: pattern.clone(),
    };
    if xs.len() < 2 {
        return Err(structure());
    }
    let nonzero: Vec<usize> = (0..ds.len()).filter(|&i| ds[i] != 0.0).collect();
    let changes: Vec<usize> = nonzero
        .windows(2)
        .filter(|w| ds[w[0]].signum() != ds[w[1]].signum())
        .map(|w| w[0])
        .collect();
    if changes.len() != 1 {
        return Err(structure());
    }
    let i0 = changes[0];
    let i1 = nonzero[nonzero.iter().position(|&k| k == i0).unwrap() + 1];
    if i1 > i0 + 1 {
        // an exact zero between the two signs
        return Ok(xs[i0 + 1]);
    }
    let p = Pchip::new(xs.clone(), ds.clone());
    let (mut lo, mut hi) = (xs[i0], xs[i1]);
    let f_lo = ds[i0];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = p.eval_in(i0, mid);
        if fm.abs() < 1e-6 && hi - lo < 1e-9 || fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// β of the column's interior maximum, refined by a parabola through the
/// three samples around the discrete maximum.
pub fn find_extremum(t: &SweepTable, col: SweepColumn) -> Result<f64> {
    let pts = t.column(col);
    if pts.len() < 3 {
        return Err(Error::ExtremumStructure(format!("need at least 3 samples, got {}", pts.len())));
    }
    let k = (0..pts.len()).fold(0, |best, i| if pts[i].1 > pts[best].1 { i } else { best });
    if k == 0 || k == pts.len() - 1 {
        return Err(Error::ExtremumStructure(format!(
            "maximum of {} at the grid end, beta = {}",
            col.name(),
            pts[k].0
        )));
    }
    if let Some(w) = (0..k).find(|&i| !(pts[i + 1].1 > pts[i].1)) {
        return Err(Error::ExtremumStructure(format!(
            "{} does not increase between beta = {} and {}",
            col.name(),
            pts[w].0,
            pts[w + 1].0
        )));
    }
    if let Some(w) = (k..pts.len() - 1).find(|&i| !(pts[i + 1].1 < pts[i].1)) {
        return Err(Error::ExtremumStructure(format!(
            "{} does not decrease between beta = {} and {}",
            col.name(),
            pts[w].0,
            pts[w + 1].0
        )));
    }
    let ((x0, y0), (x1, y1), (x2, y2)) = (pts[k - 1], pts[k], pts[k + 1]);
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    Ok(x1 - 0.5 * num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotonicityVerdict {
    Increasing,
    Decreasing,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub verdict: MonotonicityVerdict,
    /// First pair of β values breaking strict increase, if any.
    pub first_violation: Option<(f64, f64)>,
    /// β pairs with equal values.
    pub ties: Vec<(f64, f64)>,
}

pub fn monotonicity_check(t: &SweepTable, col: SweepColumn) -> Monotonicity {
    let pts = t.column(col);
    let pairs: Vec<((f64, f64), (f64, f64))> = pts.windows(2).map(|w| (w[0], w[1])).collect();
    let ties = pairs.iter().filter(|(a, b)| a.1 == b.1).map(|(a, b)| (a.0, b.0)).collect();
    let first_violation = pairs.iter().find(|(a, b)| !(b.1 > a.1)).map(|(a, b)| (a.0, b.0));
    let verdict = if pairs.is_empty() {
        MonotonicityVerdict::Neither
    } else if first_violation.is_none() {
        MonotonicityVerdict::Increasing
    } else if pairs.iter().all(|(a, b)| b.1 < a.1) {
        MonotonicityVerdict::Decreasing
    } else {
        MonotonicityVerdict::Neither
    };
    Monotonicity {
        verdict,
        first_violation,
        ties,
    }
}
