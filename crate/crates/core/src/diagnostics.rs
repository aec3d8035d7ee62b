//! Quantitative checks of the properties expected of a center-outward
//! quantile map: `F` pushes `P` to `U_d`, `Q` is monotone, satisfies the
//! Monge–Ampère identity and is injective away from the origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::entropic::ma_residual_field;
use crate::error::{domain, Result};
use crate::measures::{norm, random_direction, Density};
use crate::quantile::{roundtrip_error, Backend, MapMetadata, QuantileMap};

/// Pass/fail thresholds of the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Kolmogorov–Smirnov bound on `|F(Y)|` against `Uniform[0, 1]`.
    pub ks: f64,
    /// Chi-squared critical value for the sector counts.
    pub chi2: f64,
    pub sectors: usize,
    /// `max |F(Y)| <= 1 + norm_slack * sqrt(eps)`.
    pub norm_slack: f64,
    /// Monotonicity violations down to `-monotonicity_factor * eps` are tolerated.
    pub monotonicity_factor: f64,
    pub ma_median: f64,
    pub ma_p90: f64,
    /// Median `|F(Q(x)) - x|`.
    pub roundtrip_median: f64,
    /// Smallest admissible image separation of separated probes.
    pub min_image_separation: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            ks: 0.05,
            // 0.99 quantile of chi-squared with 15 degrees of freedom.
            chi2: 30.578,
            sectors: 16,
            norm_slack: 2.0,
            monotonicity_factor: 10.0,
            ma_median: 0.05,
            ma_p90: 0.15,
            roundtrip_median: 0.05,
            min_image_separation: 0.0,
        }
    }
}

/// Sample sizes, annuli and thresholds of a suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub pushforward_samples: usize,
    pub monotonicity_pairs: usize,
    pub injectivity_points: usize,
    pub injectivity_min_sep: f64,
    pub roundtrip_probes: usize,
    /// Annulus for pointwise checks.
    pub annulus: (f64, f64),
    pub ma_annulus: (f64, f64),
    pub thresholds: Thresholds,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            pushforward_samples: 10_000,
            monotonicity_pairs: 10_000,
            injectivity_points: 400,
            injectivity_min_sep: 0.01,
            roundtrip_probes: 1000,
            annulus: (0.05, 0.95),
            ma_annulus: (0.2, 0.8),
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
    Error,
}

/// One named statistic against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub statistic: Option<f64>,
    pub threshold: Option<f64>,
    /// `true` when the statistic must not exceed the threshold.
    pub upper_bound: bool,
    pub pass: bool,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    fn at_most(name: &str, statistic: f64, threshold: f64) -> Self {
        Self::compare(name, statistic, threshold, true)
    }

    fn at_least(name: &str, statistic: f64, threshold: f64) -> Self {
        Self::compare(name, statistic, threshold, false)
    }

    fn compare(name: &str, statistic: f64, threshold: f64, upper_bound: bool) -> Self {
        let pass = statistic.is_finite()
            && if upper_bound {
                statistic <= threshold
            } else {
                statistic >= threshold
            };
        Self {
            name: name.into(),
            statistic: Some(statistic),
            threshold: Some(threshold),
            upper_bound,
            pass,
            status: if pass { Status::Pass } else { Status::Fail },
            detail: None,
        }
    }

    fn not_applicable(name: &str, why: &str) -> Self {
        Self {
            name: name.into(),
            statistic: None,
            threshold: None,
            upper_bound: true,
            pass: true,
            status: Status::NotApplicable,
            detail: Some(why.into()),
        }
    }

    fn error(name: &str, err: &crate::Error) -> Self {
        Self {
            name: name.into(),
            statistic: None,
            threshold: None,
            upper_bound: true,
            pass: false,
            status: Status::Error,
            detail: Some(err.to_string()),
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

/// Outcome of [`run_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub version: String,
    pub config_hash: Option<String>,
    pub backend: Backend,
    pub metadata: MapMetadata,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl DiagnosticsReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Kolmogorov–Smirnov distance of sorted data to `Uniform[0, 1]`.
pub fn ks_uniform_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |m, (i, &x)| {
        let x = x.clamp(0.0, 1.0);
        m.max((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
    })
}

/// Kolmogorov–Smirnov distance of a weighted sample to `Uniform[0, 1]`.
/// Weights need not sum to one; missing mass counts against the fit.
pub fn ks_uniform_weighted(values: &[f64], weights: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut cum = 0.0;
    let mut ks = 0.0f64;
    for i in order {
        let x = values[i].clamp(0.0, 1.0);
        ks = ks.max((x - cum).abs());
        cum += weights[i];
        ks = ks.max((cum - x).abs());
    }
    ks.max((1.0 - cum).abs())
}

/// Sector index of a direction: equal angles in the plane, equal azimuth
/// bins times the two hemispheres in space.
fn sector(u: &[f64], sectors: usize) -> usize {
    if u.len() == 2 {
        let t = u[1].atan2(u[0]).rem_euclid(TAU);
        ((t / TAU * sectors as f64) as usize).min(sectors - 1)
    } else {
        let half = sectors / 2;
        let t = u[1].atan2(u[0]).rem_euclid(TAU);
        let a = ((t / TAU * half as f64) as usize).min(half - 1);
        a + if u[2] >= 0.0 { half } else { 0 }
    }
}

/// Pearson statistic of weighted sector masses against equal masses, scaled
/// by the number of points.
fn sector_chi2(points: &[Vec<f64>], weights: &[f64], sectors: usize) -> f64 {
    let mut mass = vec![0.0; sectors];
    for (p, w) in points.iter().zip(weights) {
        if norm(p) > 0.0 {
            mass[sector(p, sectors)] += w;
        }
    }
    let e = 1.0 / sectors as f64;
    points.len() as f64 * mass.iter().map(|m| (m - e) * (m - e) / e).sum::<f64>()
}

fn pushforward_checks(
    images: &[Vec<f64>],
    weights: &[f64],
    blur: f64,
    th: &Thresholds,
) -> Result<Vec<CheckResult>> {
    if th.sectors < 2
        || (images.first().is_some_and(|p| p.len() == 3) && !th.sectors.is_multiple_of(2))
    {
        return domain("sector count must be at least 2 (and even in space)");
    }
    let radii: Vec<f64> = images.iter().map(|p| norm(p)).collect();
    let ks = ks_uniform_weighted(&radii, weights);
    let chi2 = sector_chi2(images, weights, th.sectors);
    let max_norm = radii.iter().copied().fold(0.0, f64::max);
    Ok(vec![
        CheckResult::at_most("pushforward.ks", ks, th.ks),
        CheckResult::at_most("pushforward.sector_chi2", chi2, th.chi2),
        CheckResult::at_most("pushforward.max_norm", max_norm, 1.0 + th.norm_slack * blur),
    ])
}

/// Samples `Y ~ P` and tests `F(Y) ~ U_d`: KS on `|F(Y)|`, chi-squared over
/// direction sectors and the norm bound `|F| <= 1 + slack sqrt(eps)`.
///
/// The semidiscrete backend has no pointwise `F`; its atom-level values
/// (cell barycenters weighted by the atom weights) are tested instead and
/// empty cells count as missing mass.
pub fn check_pushforward(
    map: &QuantileMap,
    density: &Density,
    n: usize,
    seed: u64,
    th: &Thresholds,
) -> Result<Vec<CheckResult>> {
    if map.backend() == Backend::Semidiscrete {
        return semidiscrete_pushforward(map, th);
    }
    if density.dim() != map.dim() {
        return domain("density dimension does not match the map");
    }
    if n == 0 {
        return domain("pushforward needs samples");
    }
    let ys = density.sample(n, seed);
    check_pushforward_sample(map, &ys, &vec![1.0 / n as f64; n], th)
}

/// Pushforward check on a given weighted sample of `P`.
pub fn check_pushforward_sample(
    map: &QuantileMap,
    ys: &[Vec<f64>],
    weights: &[f64],
    th: &Thresholds,
) -> Result<Vec<CheckResult>> {
    if map.backend() == Backend::Semidiscrete {
        return semidiscrete_pushforward(map, th);
    }
    let images = ys
        .par_iter()
        .map(|y| map.inverse(y))
        .collect::<Result<Vec<_>>>()?;
    pushforward_checks(&images, weights, map.blur(), th)
}

fn semidiscrete_pushforward(map: &QuantileMap, th: &Thresholds) -> Result<Vec<CheckResult>> {
    let atoms = map.atom_values().expect("semidiscrete map");
    let empty = atoms.iter().filter(|a| a.f.is_none()).count();
    let (images, weights): (Vec<Vec<f64>>, Vec<f64>) = atoms
        .iter()
        .filter_map(|a| a.f.map(|f| (f.to_vec(), a.weight)))
        .unzip();
    let mut out = pushforward_checks(&images, &weights, 0.0, th)?;
    if empty > 0 {
        out[0].detail = Some(format!("{empty} atoms have empty cells"));
    }
    Ok(out)
}

/// Point of `U_d` conditioned on the annulus `lo <= |x| <= hi`.
fn annulus_point<R: Rng>(rng: &mut R, d: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    let r = lo + (hi - lo) * rng.random::<f64>();
    random_direction(rng, d)
        .into_iter()
        .map(|c| r * c)
        .collect()
}

fn check_annulus((lo, hi): (f64, f64)) -> Result<()> {
    if !(lo > 0.0 && lo < hi && hi < 1.0) {
        return domain(format!("annulus [{lo}, {hi}] must lie inside (0, 1)"));
    }
    Ok(())
}

/// Worst `<Q(x1) - Q(x2), x1 - x2>` over random pairs in the annulus, against
/// `-delta` with `delta = 0` (semidiscrete) or `factor * eps` (entropic).
pub fn check_monotonicity(
    map: &QuantileMap,
    n_pairs: usize,
    annulus: (f64, f64),
    seed: u64,
    th: &Thresholds,
) -> Result<CheckResult> {
    check_annulus(annulus)?;
    if n_pairs == 0 {
        return domain("monotonicity needs pairs");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = map.dim();
    let xs: Vec<Vec<f64>> = (0..2 * n_pairs)
        .map(|_| annulus_point(&mut rng, d, annulus))
        .collect();
    let qs = xs
        .par_iter()
        .map(|x| map.forward(x))
        .collect::<Result<Vec<_>>>()?;
    let delta = map.epsilon().map_or(0.0, |e| th.monotonicity_factor * e);
    let mut worst = f64::INFINITY;
    let mut worst_pair = 0;
    let mut violations = 0;
    for i in 0..n_pairs {
        let (a, b) = (2 * i, 2 * i + 1);
        let ip: f64 = (0..d)
            .map(|c| (qs[a][c] - qs[b][c]) * (xs[a][c] - xs[b][c]))
            .sum();
        if ip < -delta {
            violations += 1;
        }
        if ip < worst {
            worst = ip;
            worst_pair = i;
        }
    }
    Ok(
        CheckResult::at_least("monotonicity", worst, -delta).with_detail(format!(
            "{violations} of {n_pairs} pairs below threshold; worst pair {:?} {:?}",
            xs[2 * worst_pair],
            xs[2 * worst_pair + 1]
        )),
    )
}

/// Finite-difference Monge–Ampère residual statistics on the grid annulus.
pub fn check_ma_identity(
    map: &QuantileMap,
    density: &Density,
    annulus: (f64, f64),
    th: &Thresholds,
) -> Result<Vec<CheckResult>> {
    let Some(sol) = map.entropic() else {
        let why = "piecewise-constant semidiscrete map has no Jacobian";
        return Ok(vec![
            CheckResult::not_applicable("ma.median", why),
            CheckResult::not_applicable("ma.p90", why),
        ]);
    };
    let res = ma_residual_field(sol, density, annulus)?;
    let detail = format!("{} nodes in [{}, {}]", res.count, res.r_lo, res.r_hi);
    Ok(vec![
        CheckResult::at_most("ma.median", res.median, th.ma_median).with_detail(detail.clone()),
        CheckResult::at_most("ma.p90", res.p90, th.ma_p90).with_detail(detail),
    ])
}

/// Draws `n` annulus points at pairwise distance `>= min_sep` and checks that
/// their images stay apart; the smallest image/source separation ratio is
/// reported as a continuity-modulus surrogate.
pub fn check_injectivity(
    map: &QuantileMap,
    n: usize,
    min_sep: f64,
    annulus: (f64, f64),
    seed: u64,
    th: &Thresholds,
) -> Result<CheckResult> {
    if map.backend() == Backend::Semidiscrete {
        return Ok(CheckResult::not_applicable(
            "injectivity",
            "semidiscrete map is piecewise constant; distinct cells map to distinct atoms",
        ));
    }
    check_annulus(annulus)?;
    if !(min_sep > 0.0) || n < 2 {
        return domain("injectivity needs min_sep > 0 and at least 2 points");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = map.dim();
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut attempts = 0;
    while xs.len() < n && attempts < 1000 * n {
        attempts += 1;
        let x = annulus_point(&mut rng, d, annulus);
        if xs.iter().all(|p| dist(p, &x) >= min_sep) {
            xs.push(x);
        }
    }
    let qs = xs
        .par_iter()
        .map(|x| map.forward(x))
        .collect::<Result<Vec<_>>>()?;
    let mut min_image = f64::INFINITY;
    let mut min_ratio = f64::INFINITY;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let s = dist(&qs[i], &qs[j]);
            min_image = min_image.min(s);
            min_ratio = min_ratio.min(s / dist(&xs[i], &xs[j]));
        }
    }
    let mut c = CheckResult::at_least("injectivity", min_image, th.min_image_separation);
    // The separation must be strictly positive.
    c.pass = c.pass && min_image > 0.0;
    c.status = if c.pass { Status::Pass } else { Status::Fail };
    Ok(c.with_detail(format!(
        "{} points, min image/source separation ratio {min_ratio:.6e}",
        xs.len()
    )))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Median `|F(Q(x)) - x|` over annulus probes (entropic only).
pub fn check_roundtrip(
    map: &QuantileMap,
    n: usize,
    annulus: (f64, f64),
    seed: u64,
    th: &Thresholds,
) -> Result<CheckResult> {
    if map.backend() == Backend::Semidiscrete {
        return Ok(CheckResult::not_applicable(
            "roundtrip",
            "semidiscrete backend has no pointwise inverse",
        ));
    }
    check_annulus(annulus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<Vec<f64>> = (0..n.max(1))
        .map(|_| annulus_point(&mut rng, map.dim(), annulus))
        .collect();
    let stats = roundtrip_error(map, &probes)?;
    Ok(
        CheckResult::at_most("roundtrip", stats.median, th.roundtrip_median)
            .with_detail(format!("p90 {:.6e}, max {:.6e}", stats.p90, stats.max)),
    )
}

/// What the pushforward check draws `Y` from.
#[derive(Debug, Clone, Copy)]
pub enum TargetLaw<'a> {
    Density(&'a Density),
    /// A weighted sample (e.g. read from CSV); weights sum to one.
    Sample(&'a [Vec<f64>], &'a [f64]),
}

/// Runs every applicable check. Internal errors of a check are recorded in
/// the report (status `error`) and fail it.
pub fn run_suite(
    map: &QuantileMap,
    law: TargetLaw<'_>,
    cfg: &DiagnosticsConfig,
    seed: u64,
    config_hash: Option<String>,
) -> DiagnosticsReport {
    let th = &cfg.thresholds;
    let mut checks = Vec::new();
    let mut push_all = |name: &str, r: Result<Vec<CheckResult>>| match r {
        Ok(v) => checks.extend(v),
        Err(e) => checks.push(CheckResult::error(name, &e)),
    };
    push_all(
        "pushforward",
        match law {
            TargetLaw::Density(p) => {
                check_pushforward(map, p, cfg.pushforward_samples, seed.wrapping_add(1), th)
            }
            TargetLaw::Sample(ys, w) => check_pushforward_sample(map, ys, w, th),
        },
    );
    push_all(
        "monotonicity",
        check_monotonicity(
            map,
            cfg.monotonicity_pairs,
            cfg.annulus,
            seed.wrapping_add(2),
            th,
        )
        .map(|c| vec![c]),
    );
    push_all(
        "ma",
        match law {
            TargetLaw::Density(p) => check_ma_identity(map, p, cfg.ma_annulus, th),
            TargetLaw::Sample(..) => Ok(vec![
                CheckResult::not_applicable("ma.median", "no density to evaluate"),
                CheckResult::not_applicable("ma.p90", "no density to evaluate"),
            ]),
        },
    );
    push_all(
        "injectivity",
        check_injectivity(
            map,
            cfg.injectivity_points,
            cfg.injectivity_min_sep,
            cfg.annulus,
            seed.wrapping_add(3),
            th,
        )
        .map(|c| vec![c]),
    );
    push_all(
        "roundtrip",
        check_roundtrip(
            map,
            cfg.roundtrip_probes,
            cfg.annulus,
            seed.wrapping_add(4),
            th,
        )
        .map(|c| vec![c]),
    );
    DiagnosticsReport {
        version: crate::VERSION.into(),
        config_hash,
        backend: map.backend(),
        metadata: map.metadata.clone(),
        seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::builtin_density;
    use crate::quantile::{EntropicParams, SemidiscreteParams};
    use approx::assert_abs_diff_eq;
    use serde_json::json;

    fn small_cfg() -> DiagnosticsConfig {
        DiagnosticsConfig {
            pushforward_samples: 2000,
            monotonicity_pairs: 2000,
            injectivity_points: 100,
            roundtrip_probes: 200,
            ..Default::default()
        }
    }

    #[test]
    fn weighted_ks_matches_unweighted() {
        let v: Vec<f64> = (0..50)
            .map(|i| ((i * 37) % 50) as f64 / 50.0 + 0.003)
            .collect();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(
            ks_uniform_weighted(&v, &[0.02; 50]),
            ks_uniform_sorted(&s),
            epsilon = 1e-12
        );
        // Half the mass missing.
        assert!(ks_uniform_weighted(&[0.1], &[0.5]) >= 0.5);
    }

    #[test]
    fn equal_sectors_give_zero_chi2() {
        let pts: Vec<Vec<f64>> = (0..32)
            .map(|i| {
                let t = TAU * (i as f64 + 0.5) / 32.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        assert_abs_diff_eq!(
            sector_chi2(&pts, &[1.0 / 32.0; 32], 16),
            0.0,
            epsilon = 1e-12
        );
        let lopsided = vec![vec![1.0, 0.1]; 32];
        assert_abs_diff_eq!(
            sector_chi2(&lopsided, &[1.0 / 32.0; 32], 16),
            32.0 * 15.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn identity_passes_the_suite() {
        let d = builtin_density("spherical-uniform", &json!({})).unwrap();
        let params = EntropicParams {
            n_r: 24,
            n_ang: 48,
            epsilons: vec![0.1, 0.03, 0.01, 0.003, 0.001],
            tol: 1e-9,
            ..EntropicParams::default()
        };
        let map = QuantileMap::solve_entropic(&d, &params, 0).unwrap();
        let rep = run_suite(&map, TargetLaw::Density(&d), &small_cfg(), 7, None);
        assert!(rep.pass, "{:#?}", rep.checks);
        let inj = rep.check("injectivity").unwrap();
        assert_eq!(inj.status, Status::Pass);
        let again = run_suite(&map, TargetLaw::Density(&d), &small_cfg(), 7, None);
        assert_eq!(
            crate::io::to_json_bytes(&rep).unwrap(),
            crate::io::to_json_bytes(&again).unwrap()
        );
    }

    #[test]
    fn semidiscrete_suite_marks_not_applicable() {
        let d = builtin_density("gaussian", &json!({})).unwrap();
        let params = SemidiscreteParams {
            atoms: 64,
            ..Default::default()
        };
        let map = QuantileMap::solve_semidiscrete(&d, &params, 2).unwrap();
        let rep = run_suite(&map, TargetLaw::Density(&d), &small_cfg(), 1, None);
        assert_eq!(
            rep.check("ma.median").unwrap().status,
            Status::NotApplicable
        );
        assert_eq!(
            rep.check("injectivity").unwrap().status,
            Status::NotApplicable
        );
        let mono = rep.check("monotonicity").unwrap();
        assert!(mono.pass && mono.statistic.unwrap() >= 0.0);
    }

    #[test]
    fn bad_annulus_is_an_error_in_the_report() {
        let d = builtin_density("gaussian", &json!({})).unwrap();
        let map = QuantileMap::solve_semidiscrete(
            &d,
            &SemidiscreteParams {
                atoms: 16,
                ..Default::default()
            },
            2,
        )
        .unwrap();
        let cfg = DiagnosticsConfig {
            annulus: (0.5, 1.2),
            ..small_cfg()
        };
        let rep = run_suite(&map, TargetLaw::Density(&d), &cfg, 1, None);
        assert!(!rep.pass);
        assert_eq!(rep.check("monotonicity").unwrap().status, Status::Error);
    }
}
