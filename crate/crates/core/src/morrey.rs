//! Morrey functionals of `max{−V_λ, 0}` over balls centered on the surface.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::PolytopeDomain;
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::surface::region::{self, RegionKind};
use crate::surface::{SmoothedSurface, SurfaceOptions, SurfaceSample};

/// Rows with `λ r` below this are outside the asymptotic regime of the
/// region bounds.
pub const ASYMPTOTIC_LAMBDA_R: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorreyConfig {
    /// Exponent in `[1, 3/2)`.
    pub sigma: f64,
    pub r_min: f64,
    /// Number of geometric radii in `[r_min, 1]`.
    pub radii: usize,
    /// Also scan every radius halved.
    pub half_radii: bool,
    pub lambdas: Vec<f64>,
    pub rays: usize,
}

impl Default for MorreyConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            r_min: 0.02,
            radii: 16,
            half_radii: true,
            lambdas: vec![50.0, 100.0, 200.0, 400.0],
            rays: 1 << 14,
        }
    }
}

impl MorreyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 1.0 && self.sigma < 1.5) {
            return Err(Error::Invalid(format!("sigma must lie in [1, 3/2), got {}", self.sigma)));
        }
        if !(self.r_min > 0.0 && self.r_min <= 1.0) || self.radii == 0 {
            return Err(Error::Invalid("radii must satisfy 0 < r_min <= 1 and count >= 1".into()));
        }
        if self.rays == 0 {
            return Err(Error::Invalid("ray count must be positive".into()));
        }
        Ok(())
    }

    /// Sorted radius grid.
    pub fn radius_grid(&self) -> Vec<f64> {
        let m = self.radii;
        let mut r: Vec<f64> = (0..m)
            .map(|j| {
                if m == 1 {
                    1.0
                } else {
                    self.r_min * (1.0 / self.r_min).powf(j as f64 / (m - 1) as f64)
                }
            })
            .collect();
        if let Some(last) = r.last_mut() {
            *last = 1.0;
        }
        if self.half_radii {
            let halves: Vec<f64> = r.iter().map(|v| 0.5 * v).collect();
            r.extend(halves);
        }
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    }
}

/// `Σ f(s) w(s)` over samples in the closed ball `B_r(p)` (or all samples).
pub fn surface_integral<F>(samples: &[SurfaceSample], f: F, ball: Option<(&[f64], f64)>) -> Result<f64>
where
    F: Fn(&SurfaceSample) -> f64,
{
    if samples.is_empty() {
        return Err(Error::Invalid("empty sample set".into()));
    }
    let terms: Vec<f64> = samples
        .iter()
        .filter(|s| ball.is_none_or(|(p, r)| dist2(&s.x, p) <= r * r))
        .map(|s| f(s) * s.weight)
        .collect();
    Ok(pairwise_sum(&terms))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusRow {
    pub r: f64,
    /// Sup over centers of the full functional at this radius.
    pub total: f64,
    pub face: f64,
    pub edge: f64,
    pub vertex: f64,
}

impl RadiusRow {
    pub fn stratum(&self, kind: RegionKind) -> f64 {
        match kind {
            RegionKind::Face => self.face,
            RegionKind::Edge => self.edge,
            RegionKind::Vertex => self.vertex,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorreyReport {
    pub lambda: f64,
    pub sigma: f64,
    pub samples: usize,
    pub area: f64,
    pub sup_neg_v: f64,
    pub sup_neg_v_over_lambda: f64,
    pub morrey_sup: f64,
    pub argmax_p: Vec<f64>,
    pub argmax_r: f64,
    pub face_sup: f64,
    pub edge_sup: f64,
    pub vertex_sup: f64,
    /// Stratum sample counts at `r = 1`.
    pub stratum_counts: [usize; 3],
    pub per_radius: Vec<RadiusRow>,
}

/// Centers used by the scan: every sample, then centroids of the sample
/// groups sharing a leading face, a leading edge pair, or a leading vertex
/// triple (strata evaluated at `r = 1`).
pub fn centers(samples: &[SurfaceSample]) -> Vec<Vec<f64>> {
    let mut groups: BTreeMap<(u8, Vec<usize>), (Vec<f64>, f64)> = BTreeMap::new();
    for s in samples {
        let tag = s.region(1.0);
        let take = match tag.kind {
            RegionKind::Face => 1,
            RegionKind::Edge => 2,
            RegionKind::Vertex => 3,
        };
        let mut key: Vec<usize> = tag.order.iter().take(take).copied().collect();
        key.sort_unstable();
        let entry = groups
            .entry((tag.kind.index() as u8, key))
            .or_insert_with(|| (vec![0.0; s.x.len()], 0.0));
        for (c, x) in entry.0.iter_mut().zip(&s.x) {
            *c += s.weight * x;
        }
        entry.1 += s.weight;
    }
    let mut out: Vec<Vec<f64>> = samples.iter().map(|s| s.x.clone()).collect();
    for (_, (sum, w)) in groups {
        if w > 0.0 {
            out.push(sum.iter().map(|c| c / w).collect());
        }
    }
    out
}

struct Scan {
    total: Vec<f64>,
    strata: [Vec<f64>; 3],
}

/// Ball sums at every radius of `radii` around `p`. `mass[s]` is
/// `f^σ w` at sample `s`; `switch[s]` are its stratum switch radius indices.
fn scan_center(
    p: &[f64],
    points: &[&[f64]],
    mass: &[f64],
    switch: &[(usize, usize)],
    radii: &[f64],
) -> Scan {
    let m = radii.len();
    let r_max2 = radii[m - 1] * radii[m - 1];
    let mut bins = vec![0.0; m + 1];
    let mut diff = [vec![0.0; m + 1], vec![0.0; m + 1], vec![0.0; m + 1]];
    for ((x, &v), &(jf, jv)) in points.iter().zip(mass).zip(switch) {
        let d2 = dist2(x, p);
        if d2 > r_max2 {
            continue;
        }
        let d = d2.sqrt();
        let j0 = radii.partition_point(|r| *r < d);
        if j0 == m {
            continue;
        }
        bins[j0] += v;
        // face on [j0, jf), edge on [max(j0, jf), max(jv, jf)), vertex after
        if j0 < jf {
            diff[0][j0] += v;
            diff[0][jf] -= v;
        }
        let a = j0.max(jf);
        let b = jv.max(jf).max(a);
        if a < b {
            diff[1][a] += v;
            diff[1][b] -= v;
        }
        diff[2][b.min(m)] += v;
    }
    let mut total = Vec::with_capacity(m);
    let mut acc = 0.0;
    for b in bins.iter().take(m) {
        acc += b;
        total.push(acc);
    }
    let strata = diff.map(|d| {
        let mut acc = 0.0;
        d.iter()
            .take(m)
            .map(|v| {
                acc += v;
                acc.max(0.0)
            })
            .collect()
    });
    Scan { total, strata }
}

/// Morrey functional of `field` (one nonnegative value per sample) over the
/// given centers and radii. Strata are assigned per radius from each sample's
/// face values.
pub fn morrey_scan(
    samples: &[SurfaceSample],
    field: &[f64],
    centers: &[Vec<f64>],
    radii: &[f64],
    sigma: f64,
    lambda: f64,
) -> (f64, usize, usize, Vec<RadiusRow>) {
    let n = samples.first().map_or(0, |s| s.x.len());
    let support: Vec<usize> = (0..samples.len()).filter(|&i| field[i] > 0.0).collect();
    let points: Vec<&[f64]> = support.iter().map(|&i| samples[i].x.as_slice()).collect();
    let mass: Vec<f64> = support
        .iter()
        .map(|&i| field[i].powf(sigma) * samples[i].weight)
        .collect();
    let switch: Vec<(usize, usize)> = support
        .iter()
        .map(|&i| {
            let (rf, rv) = region::switch_radii(&samples[i].top, lambda);
            (radii.partition_point(|r| *r <= rf), radii.partition_point(|r| *r < rv))
        })
        .collect();
    let scale: Vec<f64> = radii.iter().map(|r| r.powf(sigma + 1.0 - n as f64)).collect();
    let value = |sum: f64, j: usize| (scale[j] * sum).powf(1.0 / sigma);

    let mut rows: Vec<RadiusRow> = radii
        .iter()
        .map(|&r| RadiusRow {
            r,
            total: 0.0,
            face: 0.0,
            edge: 0.0,
            vertex: 0.0,
        })
        .collect();
    let mut best = (0.0, 0, radii.len() - 1);
    if support.is_empty() {
        return (0.0, 0, radii.len() - 1, rows);
    }
    let scans: Vec<Scan> = centers
        .par_iter()
        .map(|p| scan_center(p, &points, &mass, &switch, radii))
        .collect();
    for (c, scan) in scans.iter().enumerate() {
        for (j, row) in rows.iter_mut().enumerate() {
            let v = value(scan.total[j], j);
            if v > row.total {
                row.total = v;
            }
            if v > best.0 {
                best = (v, c, j);
            }
            row.face = row.face.max(value(scan.strata[0][j], j));
            row.edge = row.edge.max(value(scan.strata[1][j], j));
            row.vertex = row.vertex.max(value(scan.strata[2][j], j));
        }
    }
    (best.0, best.1, best.2, rows)
}

/// Morrey report of `max{−V_λ, 0}` on a sample set.
pub fn morrey_sup(samples: &[SurfaceSample], cfg: &MorreyConfig) -> Result<MorreyReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Invalid("empty sample set".into()));
    }
    let lambda = samples[0].lambda;
    let field: Vec<f64> = samples.iter().map(SurfaceSample::neg_v).collect();
    let radii = cfg.radius_grid();
    let centers = centers(samples);
    let (sup, c, j, rows) = morrey_scan(samples, &field, &centers, &radii, cfg.sigma, lambda);
    let sup_neg_v = field.iter().copied().fold(0.0, f64::max);
    let mut counts = [0usize; 3];
    for s in samples {
        counts[s.region(1.0).kind.index()] += 1;
    }
    let stratum_sup = |k: RegionKind| rows.iter().map(|r| r.stratum(k)).fold(0.0, f64::max);
    Ok(MorreyReport {
        lambda,
        sigma: cfg.sigma,
        samples: samples.len(),
        area: surface_integral(samples, |_| 1.0, None)?,
        sup_neg_v,
        sup_neg_v_over_lambda: sup_neg_v / lambda,
        morrey_sup: sup,
        argmax_p: centers[c].clone(),
        argmax_r: radii[j],
        face_sup: stratum_sup(RegionKind::Face),
        edge_sup: stratum_sup(RegionKind::Edge),
        vertex_sup: stratum_sup(RegionKind::Vertex),
        stratum_counts: counts,
        per_radius: rows,
    })
}

/// One Morrey report per `λ` of the configuration.
pub fn lambda_sweep(
    domain: &PolytopeDomain,
    cfg: &MorreyConfig,
    opts: &SurfaceOptions,
) -> Result<Vec<MorreyReport>> {
    cfg.validate()?;
    cfg.lambdas
        .iter()
        .map(|&lambda| {
            let surf = SmoothedSurface::new(domain, lambda, *opts)?;
            let samples = surf.sample_rays(cfg.rays)?;
            morrey_sup(&samples, cfg)
        })
        .collect()
}

/// Sweep table as CSV with the fixed column set.
pub fn sweep_csv(reports: &[MorreyReport]) -> String {
    let n = reports.first().map_or(0, |r| r.argmax_p.len());
    let mut head = vec![
        "lambda".to_string(),
        "sigma".into(),
        "sup_neg_v".into(),
        "sup_neg_v_over_lambda".into(),
        "morrey_sup".into(),
    ];
    head.extend((1..=n).map(|k| format!("argmax_px{k}")));
    head.extend(["argmax_r", "face_sup", "edge_sup", "vertex_sup"].map(String::from));
    let mut out = head.join(",");
    out.push('\n');
    for r in reports {
        let mut row = vec![r.lambda, r.sigma, r.sup_neg_v, r.sup_neg_v_over_lambda, r.morrey_sup];
        row.extend(&r.argmax_p);
        row.extend([r.argmax_r, r.face_sup, r.edge_sup, r.vertex_sup]);
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub lambda: f64,
    pub r: f64,
    pub lambda_r: f64,
    pub measured: f64,
    /// Model curve with `C = 1`.
    pub model: f64,
    pub in_regime: bool,
    /// `log(measured) − log(C·model)` for fitted rows.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Fitted,
    IdenticallyZero,
    /// No sample falls in the stratum.
    Empty,
    /// Nonzero values exist but none in the asymptotic regime.
    NoRegimeRows,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumFit {
    pub stratum: RegionKind,
    pub model: String,
    pub status: FitStatus,
    pub c: Option<f64>,
    pub rows: Vec<BoundRow>,
}

/// Model bound for a stratum with `C = 1`.
pub fn stratum_model(kind: RegionKind, lambda_r: f64, sigma: f64) -> f64 {
    match kind {
        RegionKind::Face => lambda_r * (-lambda_r.powf(0.125)).exp(),
        RegionKind::Edge => lambda_r.powf(0.125 - 0.875 / sigma),
        RegionKind::Vertex => lambda_r.powf(1.0 - 1.5 / sigma),
    }
}

fn model_name(kind: RegionKind) -> &'static str {
    match kind {
        RegionKind::Face => "C λr exp(-(λr)^(1/8))",
        RegionKind::Edge => "C (λr)^(1/8 - 7/(8σ))",
        RegionKind::Vertex => "C (λr)^(1 - 3/(2σ))",
    }
}

/// Least-squares fit of `log C` per stratum over rows with `λr` in the
/// asymptotic regime.
pub fn region_bound_report(reports: &[MorreyReport]) -> Vec<StratumFit> {
    RegionKind::ALL
        .iter()
        .map(|&kind| {
            let sigma = reports.first().map_or(1.0, |r| r.sigma);
            let mut rows = Vec::new();
            for rep in reports {
                for rr in &rep.per_radius {
                    let lr = rep.lambda * rr.r;
                    rows.push(BoundRow {
                        lambda: rep.lambda,
                        r: rr.r,
                        lambda_r: lr,
                        measured: rr.stratum(kind),
                        model: stratum_model(kind, lr, sigma),
                        in_regime: lr >= ASYMPTOTIC_LAMBDA_R,
                        residual: None,
                    });
                }
            }
            let populated = reports.iter().any(|r| r.stratum_counts[kind.index()] > 0)
                || rows.iter().any(|r| r.measured > 0.0);
            let fit: Vec<usize> = (0..rows.len())
                .filter(|&i| rows[i].in_regime && rows[i].measured > 0.0 && rows[i].model > 0.0)
                .collect();
            let (status, c) = if !populated {
                (FitStatus::Empty, None)
            } else if rows.iter().all(|r| r.measured == 0.0) {
                (FitStatus::IdenticallyZero, None)
            } else if fit.is_empty() {
                (FitStatus::NoRegimeRows, None)
            } else {
                let logs: Vec<f64> = fit
                    .iter()
                    .map(|&i| rows[i].measured.ln() - rows[i].model.ln())
                    .collect();
                let log_c = pairwise_sum(&logs) / logs.len() as f64;
                for (&i, l) in fit.iter().zip(&logs) {
                    rows[i].residual = Some(l - log_c);
                }
                (FitStatus::Fitted, Some(log_c.exp()))
            };
            StratumFit {
                stratum: kind,
                model: model_name(kind).to_string(),
                status,
                c,
                rows,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{Expression, Params};
    use crate::riemann::MetricField;
    use std::f64::consts::PI;

    fn sphere_samples(rays: usize) -> Vec<SurfaceSample> {
        let d = PolytopeDomain::new(
            vec![Expression::parse("x1^2 + x2^2 + x3^2 - 1", 3).unwrap()],
            MetricField::euclidean(3),
            Params::new(),
            vec![0.0; 3],
        )
        .unwrap();
        let s = SmoothedSurface::new(&d, 50.0, SurfaceOptions::default()).unwrap();
        s.sample_rays(rays).unwrap()
    }

    #[test]
    fn radius_grid_shape() {
        let r = MorreyConfig::default().radius_grid();
        assert_eq!(r.len(), 32);
        assert!((r[0] - 0.01).abs() < 1e-15);
        assert_eq!(*r.last().unwrap(), 1.0);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn config_validation() {
        let mut c = MorreyConfig::default();
        c.sigma = 1.5;
        assert!(c.validate().is_err());
        c.sigma = 1.4;
        assert!(c.validate().is_ok());
        c.r_min = 2.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sphere_area_and_disjoint_ball() {
        let smp = sphere_samples(4096);
        let a = surface_integral(&smp, |_| 1.0, None).unwrap();
        assert!((a / (4.0 * PI) - 1.0).abs() < 5e-3);
        let far = [5.0, 0.0, 0.0];
        assert_eq!(surface_integral(&smp, |_| 1.0, Some((&far, 1.0))).unwrap(), 0.0);
        assert!(surface_integral(&[], |_| 1.0, None).is_err());
    }

    #[test]
    fn zero_field_and_homogeneity() {
        let smp = sphere_samples(2048);
        let radii = MorreyConfig::default().radius_grid();
        let cs = centers(&smp);
        let zero = vec![0.0; smp.len()];
        assert_eq!(morrey_scan(&smp, &zero, &cs, &radii, 1.0, 50.0).0, 0.0);
        let f: Vec<f64> = smp.iter().map(|s| (s.x[2] + 1.0).powi(2)).collect();
        let g: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        let a = morrey_scan(&smp, &f, &cs, &radii, 1.0, 50.0);
        let b = morrey_scan(&smp, &g, &cs, &radii, 1.0, 50.0);
        assert!(a.0 > 0.0);
        assert!((b.0 / a.0 - 3.0).abs() < 1e-12);
        for row in &a.3 {
            assert!(row.total <= a.0);
        }
    }

    #[test]
    fn unit_field_on_sphere() {
        // r^{-1} · area(S² ∩ B_r(p)) = r^{-1} · π r² for p on the sphere
        let smp = sphere_samples(16384);
        let radii = MorreyConfig::default().radius_grid();
        let ones = vec![1.0; smp.len()];
        let on_surface: Vec<Vec<f64>> = smp.iter().map(|s| s.x.clone()).collect();
        let (sup, _, j, rows) = morrey_scan(&smp, &ones, &on_surface, &radii, 1.0, 50.0);
        assert_eq!(radii[j], 1.0);
        assert!((sup / PI - 1.0).abs() < 0.01);
        let mid = rows.iter().find(|r| (r.r - 0.5).abs() < 0.2).unwrap();
        assert!((mid.total / (PI * mid.r) - 1.0).abs() < 0.03);
    }

    #[test]
    fn cap_against_fine_grid() {
        let smp = sphere_samples(8192);
        let cap: Vec<f64> = smp.iter().map(|s| if s.x[2] > 0.8 { 1.0 } else { 0.0 }).collect();
        let cfg = MorreyConfig::default();
        let coarse_r = cfg.radius_grid();
        let cs = centers(&smp);
        let (coarse, ..) = morrey_scan(&smp, &cap, &cs, &coarse_r, 1.0, 50.0);
        // brute force with ten times finer radii and direct ball sums
        let mut fine_r: Vec<f64> = coarse_r
            .windows(2)
            .flat_map(|w| (0..10).map(move |k| w[0] * (w[1] / w[0]).powf(k as f64 / 10.0)))
            .collect();
        fine_r.push(1.0);
        let mut fine = 0.0f64;
        for p in &cs {
            let mut d: Vec<(f64, f64)> = smp
                .iter()
                .zip(&cap)
                .filter(|(_, c)| **c > 0.0)
                .map(|(s, c)| (dist2(&s.x, p).sqrt(), c * s.weight))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut k = 0;
            let mut acc = 0.0;
            for &r in &fine_r {
                while k < d.len() && d[k].0 <= r {
                    acc += d[k].1;
                    k += 1;
                }
                fine = fine.max(acc / r);
            }
        }
        let ratio = coarse_r.windows(2).map(|w| w[1] / w[0]).fold(1.0, f64::max);
        assert!(coarse <= fine * (1.0 + 1e-12));
        assert!(fine <= coarse * ratio);
    }

    #[test]
    fn region_fit_flags() {
        let cube = PolytopeDomain::new(
            ["x1 - 1", "-x1 - 1", "x2 - 1", "-x2 - 1", "x3 - 1", "-x3 - 1"]
                .iter()
                .map(|t| Expression::parse(t, 3).unwrap())
                .collect(),
            MetricField::euclidean(3),
            Params::new(),
            vec![0.0; 3],
        )
        .unwrap();
        let s = SmoothedSurface::new(&cube, 50.0, SurfaceOptions::default()).unwrap();
        let rep = morrey_sup(&s.sample_rays(1024).unwrap(), &MorreyConfig::default()).unwrap();
        assert_eq!(rep.morrey_sup, 0.0);
        let fits = region_bound_report(&[rep]);
        assert!(fits.iter().all(|f| f.status == FitStatus::IdenticallyZero));

        let rep = morrey_sup(&sphere_samples(512), &MorreyConfig::default()).unwrap();
        assert!(rep.morrey_sup < 1e-12);
        let fits = region_bound_report(&[rep]);
        assert_eq!(fits[1].status, FitStatus::Empty);
        assert_eq!(fits[2].status, FitStatus::Empty);
    }

    #[test]
    fn stratum_models() {
        assert!(stratum_model(RegionKind::Edge, 100.0, 1.0) < stratum_model(RegionKind::Edge, 10.0, 1.0));
        assert!(stratum_model(RegionKind::Vertex, 100.0, 1.4) < stratum_model(RegionKind::Vertex, 10.0, 1.4));
        assert!((stratum_model(RegionKind::Vertex, 16.0, 1.0) - 0.25).abs() < 1e-15);
    }
}
