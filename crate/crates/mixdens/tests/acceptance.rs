//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 6 7`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use mixdens::adapted::{lemma1_gap, MarginallyAdaptedDensity, RATIO_MAX, RATIO_MIN};
use mixdens::copulas::{
    fit_normal_copula_with_marginals, fit_t_copula, format_nu, CopulaConfig, CopulaFamily,
    CopulaModel,
};
use mixdens::driver::run_replications_par;
use mixdens::evaluation::{kl_hat, log_ratio_table, LossReport};
use mixdens::math::quadrature::QuadratureSettings;
use mixdens::math::stats::median;
use mixdens::math::{normal_logpdf, SpdMatrix};
use mixdens::mixture::{MixtureOfNormals, SaConfig, UnivariateMixture};
use mixdens::simulation::{
    fit_estimators_with, loss_matrix, test_sample, three_component_marginal, training_sample, Dgp,
    DgpKind, EstimatorConfig, EstimatorKind, Experiment, Loss, ReplicationOutcome,
};
use mixdens::{
    DataMatrix, Density, MarginalizableDensity, RngStream, SampleDensity, UnivariateDensity,
};

const REPLICATIONS: usize = 10;
const TABLE_SEED: u64 = 20240101;
/// Set for the nested test run of criterion 11 so this target skips itself.
const NESTED: &str = "MIXDENS_ACCEPTANCE_NESTED";

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- helpers

/// Records warnings so criteria can check that a diagnostic fired.
struct Recorder(Mutex<Vec<String>>);

impl log::Log for Recorder {
    fn enabled(&self, m: &log::Metadata) -> bool {
        m.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            self.0.lock().unwrap().push(record.args().to_string());
        }
    }

    fn flush(&self) {}
}

static RECORDER: Recorder = Recorder(Mutex::new(Vec::new()));

fn take_warnings() -> Vec<String> {
    std::mem::take(&mut *RECORDER.0.lock().unwrap())
}

/// Composite Simpson nodes and weights on `[a, b]` with `panels` (even)
/// intervals.
fn simpson(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    assert!(panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    (0..=panels)
        .map(|i| {
            let w = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + i as f64 * h, w * h / 3.0)
        })
        .collect()
}

fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    simpson(a, b, panels).iter().map(|&(x, w)| w * f(x)).sum()
}

fn integrate_2d(f: impl Fn(f64, f64) -> f64 + Sync, a: f64, b: f64, panels: usize) -> f64 {
    let nodes = simpson(a, b, panels);
    nodes
        .par_iter()
        .map(|&(x, wx)| wx * nodes.iter().map(|&(y, wy)| wy * f(x, y)).sum::<f64>())
        .sum()
}

/// Integral of `g(point)` over R^p for p in {1, 2} on a fixed box.
fn integrate(p: usize, g: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
    match p {
        1 => integrate_1d(|x| g(&[x]), -40.0, 40.0, 16_000),
        2 => integrate_2d(|x, y| g(&[x, y]), -24.0, 24.0, 1600),
        _ => unreachable!(),
    }
}

fn spd(p: usize, entries: &[f64]) -> SpdMatrix {
    SpdMatrix::new(DMatrix::from_row_slice(p, p, entries)).unwrap()
}

fn gaussian(mean: Vec<f64>, cov: &[f64]) -> MixtureOfNormals {
    let p = mean.len();
    MixtureOfNormals::gaussian(mean, spd(p, cov)).unwrap()
}

fn normal(mu: f64, sd: f64) -> UnivariateMixture {
    UnivariateMixture::new(vec![1.0], vec![mu], vec![sd]).unwrap()
}

/// Univariate mixture as a one-dimensional joint mixture.
fn as_joint(m: &UnivariateMixture) -> MixtureOfNormals {
    MixtureOfNormals::new(
        m.weights().to_vec(),
        m.means().iter().map(|&mu| vec![mu]).collect(),
        m.sds().iter().map(|&s| spd(1, &[s * s])).collect(),
        None,
    )
    .unwrap()
}

/// Product of two univariate mixtures as a bivariate mixture.
fn product(a: &UnivariateMixture, b: &UnivariateMixture) -> MixtureOfNormals {
    let (mut w, mut mu, mut cov) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..a.weights().len() {
        for j in 0..b.weights().len() {
            w.push(a.weights()[i] * b.weights()[j]);
            mu.push(vec![a.means()[i], b.means()[j]]);
            let (sa, sb) = (a.sds()[i], b.sds()[j]);
            cov.push(spd(2, &[sa * sa, 0.0, 0.0, sb * sb]));
        }
    }
    MixtureOfNormals::new(w, mu, cov, None).unwrap()
}

fn equicorrelation(p: usize, rho: f64) -> SpdMatrix {
    SpdMatrix::new(DMatrix::from_fn(
        p,
        p,
        |a, b| if a == b { 1.0 } else { rho },
    ))
    .unwrap()
}

fn extended() -> EstimatorConfig {
    let mut cfg = EstimatorConfig::default();
    cfg.copula.sa = SaConfig::extended();
    cfg.adapted.sa = SaConfig::extended();
    cfg
}

/// Running maximum that turns NaN into a failure.
fn worse(w: f64, v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        w.max(v)
    }
}

/// `log((1 - eps) * exp(lf) + eps * exp(lh))` without underflow.
fn log_blend(lf: f64, lh: f64, eps: f64) -> f64 {
    let (a, b) = ((1.0 - eps).ln() + lf, eps.ln() + lh);
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// `x * log(x / y)` from logs, zero where `x` underflows.
fn xlogratio(lx: f64, ly: f64) -> f64 {
    if lx == f64::NEG_INFINITY {
        0.0
    } else {
        lx.exp() * (lx - ly)
    }
}

// ------------------------------------------------------------ criterion 1

/// Both sides of the KL decomposition for the unclamped adapted density,
/// each integrated independently on a Simpson grid.
fn decomposition(h: &MixtureOfNormals, f: &MixtureOfNormals, eps: f64) -> (f64, f64) {
    let p = h.dim();
    let hm: Vec<UnivariateMixture> = (0..p).map(|i| h.marginal(i)).collect();
    let fm: Vec<UnivariateMixture> = (0..p).map(|i| f.marginal(i)).collect();
    let blended = |i: usize, y: f64| log_blend(fm[i].logpdf(y), hm[i].logpdf(y), eps);
    let log_ratio =
        |y: &[f64]| -> f64 { (0..p).map(|i| hm[i].logpdf(y[i]) - blended(i, y[i])).sum() };
    let inv_k = integrate(p, |y| (f.logpdf(y) + log_ratio(y)).exp());
    let log_k = -inv_k.ln();
    let kl_h_f = integrate(p, |y| xlogratio(h.logpdf(y), f.logpdf(y)));
    let kl_h_p = integrate(p, |y| {
        xlogratio(h.logpdf(y), log_k + f.logpdf(y) + log_ratio(y))
    });
    let marginal_kl: f64 = (0..p)
        .map(|i| {
            integrate_1d(
                |y| xlogratio(hm[i].logpdf(y), blended(i, y)),
                -40.0,
                40.0,
                16_000,
            )
        })
        .sum();
    (kl_h_f - kl_h_p, log_k + marginal_kl)
}

fn criterion_1() -> Verdict {
    let m = three_component_marginal();
    let cases: Vec<(&str, MixtureOfNormals, MixtureOfNormals)> = vec![
        (
            "1-D shifted normal",
            gaussian(vec![0.5], &[1.0]),
            gaussian(vec![0.0], &[1.0]),
        ),
        (
            "1-D three-component",
            as_joint(&m),
            gaussian(vec![0.0], &[2.25]),
        ),
        (
            "2-D correlated vs independent",
            gaussian(vec![0.0, 0.0], &[1.0, 0.6, 0.6, 1.0]),
            gaussian(vec![0.2, 0.0], &[1.5, 0.0, 0.0, 0.8]),
        ),
        (
            "2-D product of three-component",
            product(&m, &m),
            gaussian(vec![0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]),
        ),
        (
            "2-D two-scale vs shifted normal",
            MixtureOfNormals::new(
                vec![0.6, 0.4],
                vec![vec![0.0, 0.0]; 2],
                vec![
                    spd(2, &[1.0, 0.0, 0.0, 1.0]),
                    spd(2, &[16.0, 0.0, 0.0, 16.0]),
                ],
                None,
            )
            .unwrap(),
            gaussian(vec![0.3, -0.2], &[2.0, 0.5, 0.5, 1.0]),
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut worst_lib: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, h, f) in &cases {
        let (lhs, rhs) = decomposition(h, f, 0.05);
        let settings = if h.dim() == 1 {
            QuadratureSettings::default()
        } else {
            QuadratureSettings::two_dimensional()
        };
        let lib = lemma1_gap(h, f, 0.05, &settings).unwrap();
        worst = worse(worst, (lhs - rhs).abs());
        worst_lib = worse(
            worse(worst_lib, lib.discrepancy()),
            (lib.kl_gap - lhs).abs(),
        );
        parts.push(format!("{name}: gap {lhs:.5}"));
    }
    verdict(
        worst <= 1e-3 && worst_lib <= 1e-3,
        format!(
            "5 pairs, worst |lhs - rhs| = {worst:.2e} (grid), {worst_lib:.2e} (library vs grid); {}",
            parts.join(", ")
        ),
    )
}

// ------------------------------------------------------------ criterion 2

fn criterion_2() -> Verdict {
    let standard = gaussian(vec![0.0], &[1.0]);
    let shift = 0.5;
    let inflation = 0.5 * (0.5 + 2f64.ln() - 1.0);
    let (mut hits, mut total, mut worst_z): (usize, usize, f64) = (0, 0, 0.0);
    for seed in 0..20 {
        let test = standard.sample(5000, &mut RngStream::new(seed, 0).rng());
        let truth = |y: &[f64]| normal_logpdf(y[0]);
        let cases = [
            (
                kl_hat(truth, |y: &[f64]| normal_logpdf(y[0] - 1.0), &test).unwrap(),
                shift,
            ),
            (
                kl_hat(
                    truth,
                    |y: &[f64]| normal_logpdf(y[0] / 2f64.sqrt()) - 0.5 * 2f64.ln(),
                    &test,
                )
                .unwrap(),
                inflation,
            ),
        ];
        for (est, exact) in cases {
            let z = (est.value - exact).abs() / est.std_error;
            worst_z = worse(worst_z, z);
            hits += usize::from(z <= 3.0);
            total += 1;
        }
    }
    verdict(
        hits == total,
        format!("{hits}/{total} estimates within 3 SE of the closed form (worst {worst_z:.2} SE)"),
    )
}

// ------------------------------------------------------- criteria 3, 6, 7

struct TableRun {
    exp: Experiment,
    outcomes: Vec<ReplicationOutcome>,
    kl: LossReport,
    l2: LossReport,
    stream: RngStream,
}

fn table_run(
    kind: DgpKind,
    estimators: Vec<EstimatorKind>,
    reference: EstimatorKind,
    seed: u64,
) -> TableRun {
    let mut exp = Experiment::new(Dgp::new(kind, 5, None).unwrap(), estimators);
    exp.config = extended();
    let stream = RngStream::new(seed, 0);
    let outcomes = run_replications_par(&exp, REPLICATIONS, &stream).unwrap();
    let names = exp.labels();
    let r = exp.estimators.iter().position(|k| *k == reference).unwrap();
    let kl = log_ratio_table(&loss_matrix(&outcomes, Loss::Kl), &names, r).unwrap();
    let l2 = log_ratio_table(&loss_matrix(&outcomes, Loss::L2), &names, r).unwrap();
    TableRun {
        exp,
        outcomes,
        kl,
        l2,
        stream,
    }
}

fn ratio(report: &LossReport, label: &str) -> f64 {
    report.rows.iter().find(|r| r.name == label).unwrap().median
}

fn index_of(run: &TableRun, kind: EstimatorKind) -> usize {
    run.exp.estimators.iter().position(|k| *k == kind).unwrap()
}

fn table1() -> TableRun {
    use EstimatorKind::*;
    table_run(
        DgpKind::NormalCopula,
        vec![Tc, Nc, Mnc, Clayton, Frank, Gumbel, Mn],
        Tc,
        TABLE_SEED,
    )
}

fn criterion_3(run: &TableRun) -> Verdict {
    let near = ["NC", "MNC"].map(|l| (l, ratio(&run.kl, l)));
    let far = ["Clayton", "Frank", "Gumbel", "MN"].map(|l| (l, ratio(&run.kl, l)));
    let pass = near.iter().all(|(_, v)| v.abs() <= 0.15) && far.iter().all(|(_, v)| *v > 0.5);
    let cells: Vec<String> = near
        .iter()
        .chain(&far)
        .map(|(l, v)| format!("{l} {v:+.3}"))
        .collect();
    verdict(
        pass,
        format!("median log KL ratio vs tC: {}", cells.join(", ")),
    )
}

fn criterion_6(run: &TableRun) -> Verdict {
    let (nc, mnc) = (
        index_of(run, EstimatorKind::Nc),
        index_of(run, EstimatorKind::Mnc),
    );
    let ones = run
        .outcomes
        .iter()
        .filter(|o| o.fits[mnc].components == Some(1))
        .count();
    let cfg = &run.exp.config;
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for o in &run.outcomes {
        if o.fits[mnc].components != Some(1) || o.fits[nc].error.is_some() {
            continue;
        }
        let r = o.index;
        let train = training_sample(&run.exp, r, &run.stream);
        let test = test_sample(&run.exp, r, &run.stream);
        let fits = fit_estimators_with(
            &[EstimatorKind::Nc, EstimatorKind::Mnc],
            &[cfg, cfg],
            &cfg.copula,
            &train,
            &run.stream.child(r as u64).child(2),
        );
        let (Ok(a), Ok(b)) = (&fits[0], &fits[1]) else {
            return verdict(false, format!("refit failed in replication {r}"));
        };
        let (mut diff, mut scale) = (0.0, 0.0);
        for row in test.rows() {
            let (la, lb) = (a.logpdf(row), b.logpdf(row));
            diff += (la - lb).abs();
            scale += la.abs();
        }
        worst = worse(worst, diff / scale);
        compared += 1;
    }
    verdict(
        ones >= 8 && compared > 0 && worst <= 0.01,
        format!(
            "MNC selected m = 1 in {ones}/{REPLICATIONS}; worst mean |log density difference| vs NC {:.3}% of mean |NC log density| over {compared} replications",
            100.0 * worst
        ),
    )
}

fn criterion_7(run: &TableRun) -> Verdict {
    let nc = index_of(run, EstimatorKind::Nc);
    let mut worst_diag: f64 = 0.0;
    let mut missing = 0;
    for o in &run.outcomes {
        match &o.fits[nc].correlation_diagonal {
            Some(d) => worst_diag = d.iter().fold(worst_diag, |w, v| worse(w, (v - 1.0).abs())),
            None => missing += 1,
        }
    }
    // latent normal data with known standard-normal marginals
    let latent = gaussian(vec![0.0; 5], equicorrelation(5, 0.5).matrix().as_slice());
    let x = latent.sample(2000, &mut RngStream::new(TABLE_SEED, 1).rng());
    let model = fit_normal_copula_with_marginals(
        &x,
        vec![normal(0.0, 1.0); 5],
        &CopulaConfig::default(),
        &RngStream::new(TABLE_SEED, 2),
    )
    .unwrap();
    let CopulaFamily::Normal { correlation } = model.family() else {
        unreachable!()
    };
    let v = correlation.matrix();
    let mut worst_off: f64 = 0.0;
    for a in 0..5 {
        for b in 0..a {
            worst_off = worse(worst_off, (v[(a, b)] - 0.5).abs());
        }
    }
    verdict(
        missing == 0 && worst_diag <= 0.01 && worst_off <= 0.06,
        format!(
            "diagonal within {worst_diag:.4} of 1 in {}/{REPLICATIONS} replications; n = 2000 off-diagonals within {worst_off:.4} of 0.5",
            REPLICATIONS - missing
        ),
    )
}

// ---------------------------------------------------------- criteria 4, 5

fn criterion_4() -> Verdict {
    use EstimatorKind::*;
    let run = table_run(DgpKind::ScaleMixture, vec![Mn, Tc, Mamn], Mn, TABLE_SEED);
    let tc = ratio(&run.kl, "tC");
    let mamn = ratio(&run.l2, "MAMN");
    verdict(
        tc > 1.0 && mamn.abs() <= 0.3,
        format!("tC median log KL ratio vs MN {tc:+.3}; MAMN median log L2 ratio vs MN {mamn:+.3}"),
    )
}

fn criterion_5() -> Verdict {
    use EstimatorKind::*;
    let run = table_run(
        DgpKind::MnPlusUniform,
        vec![Mamn, Mn, Tc, Mnc],
        Mamn,
        TABLE_SEED,
    );
    let kl = loss_matrix(&run.outcomes, Loss::Kl);
    let labels = run.exp.labels();
    let medians: Vec<f64> = (0..labels.len())
        .map(|j| {
            let col: Vec<f64> = kl.iter().map(|r| r[j]).filter(|v| v.is_finite()).collect();
            median(&col).unwrap_or(f64::NAN)
        })
        .collect();
    let mamn_lowest = medians[1..].iter().all(|m| *m > medians[0]);
    let mn = ratio(&run.kl, "MN");
    let cells: Vec<String> = labels
        .iter()
        .zip(&medians)
        .map(|(l, m)| format!("{l} {m:.4}"))
        .collect();
    verdict(
        mamn_lowest && mn > 0.15,
        format!(
            "median KL {}; MN median log KL ratio vs MAMN {mn:+.3}",
            cells.join(", ")
        ),
    )
}

// ------------------------------------------------------------ criterion 8

fn criterion_8() -> Verdict {
    let marginals = vec![three_component_marginal(); 5];
    let t = CopulaModel::new(
        marginals,
        CopulaFamily::StudentT {
            scale: equicorrelation(5, 0.5),
            nu: 4.0,
        },
    )
    .unwrap();
    let cfg = extended().copula;
    let fitted_nu =
        |data: &DataMatrix, seed: u64| match fit_t_copula(data, &cfg, &RngStream::new(seed, 1))
            .unwrap()
            .family()
        {
            CopulaFamily::StudentT { nu, .. } => *nu,
            _ => unreachable!(),
        };
    let nu_t = fitted_nu(&t.sample(2000, &mut RngStream::new(TABLE_SEED, 3).rng()), 4);
    let gauss = Dgp::new(DgpKind::NormalCopula, 5, None).unwrap();
    let nu_g = fitted_nu(
        &gauss.sample(2000, &mut RngStream::new(TABLE_SEED, 5).rng()),
        6,
    );
    verdict(
        (3.0..=6.0).contains(&nu_t) && format_nu(nu_g) == "> 30",
        format!(
            "t4 data: nu = {nu_t:.2}; Gaussian data: nu reported as \"{}\"",
            format_nu(nu_g)
        ),
    )
}

// ------------------------------------------------------------ criterion 9

/// `log k` by grid quadrature of `f * prod clamp(h_i / f_{i,eps})`.
fn grid_log_k(base: &MixtureOfNormals, h: &[UnivariateMixture], eps: f64) -> f64 {
    let fm: Vec<UnivariateMixture> = (0..base.dim()).map(|i| base.marginal(i)).collect();
    let weight = |y: &[f64]| -> f64 {
        (0..y.len())
            .map(|i| {
                let lh = h[i].logpdf(y[i]);
                (lh - log_blend(fm[i].logpdf(y[i]), lh, eps)).clamp(RATIO_MIN.ln(), RATIO_MAX.ln())
            })
            .sum()
    };
    -integrate(base.dim(), |y| (base.logpdf(y) + weight(y)).exp()).ln()
}

fn criterion_9() -> Verdict {
    let m = three_component_marginal();
    let two = MixtureOfNormals::new(
        vec![0.5, 0.5],
        vec![vec![-1.0, 0.5], vec![1.5, -0.5]],
        vec![spd(2, &[1.0, 0.3, 0.3, 1.0]), spd(2, &[0.5, 0.0, 0.0, 2.0])],
        None,
    )
    .unwrap();
    let models = [
        (
            gaussian(vec![0.0, 0.0], &[1.0, 0.5, 0.5, 1.0]),
            vec![m.clone(), m.clone()],
        ),
        (
            gaussian(vec![0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]),
            vec![normal(0.5, 1.0), normal(-0.3, 1.5)],
        ),
        (two, vec![m.clone(), normal(0.0, 1.0)]),
    ];
    let mut worst: f64 = 0.0;
    let mut cells = Vec::new();
    for (i, (base, h)) in models.into_iter().enumerate() {
        let exact = grid_log_k(&base, &h, 0.05);
        let mut model = MarginallyAdaptedDensity::new(base, h, 0.05).unwrap();
        let k = model
            .estimate_k(100_000, 10_000, &RngStream::new(TABLE_SEED, 10 + i as u64))
            .unwrap();
        worst = worse(worst, (k.log_k - exact).abs());
        cells.push(format!("{:.4} vs {exact:.4}", k.log_k));
    }
    take_warnings();
    let spiky = UnivariateMixture::new(vec![0.95, 0.05], vec![0.0, 0.0], vec![0.1, 20.0]).unwrap();
    let mut bad = MarginallyAdaptedDensity::new(
        gaussian(vec![0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]),
        vec![spiky; 2],
        0.05,
    )
    .unwrap();
    let k = *bad
        .estimate_k(100_000, 10_000, &RngStream::new(TABLE_SEED, 20))
        .unwrap();
    let warned = take_warnings()
        .iter()
        .any(|w| w.contains("importance ratios were clamped"));
    verdict(
        worst <= 0.02 && k.unreliable && warned,
        format!(
            "log k (IS vs grid): {}; misspecified base clamps {:.1}% of ratios, warning {}",
            cells.join(", "),
            100.0 * k.clamps.fraction(),
            if warned { "fired" } else { "missing" }
        ),
    )
}

// ----------------------------------------------------------- criterion 10

fn criterion_10() -> Verdict {
    let base = gaussian(vec![0.0], &[1.0]);
    let h = normal(0.5, 1.0);
    let eps = 0.05;
    let model = MarginallyAdaptedDensity::new(base, vec![h.clone()], eps).unwrap();
    let target = |y: f64| {
        let (hv, fv) = (h.pdf(y), normal_logpdf(y).exp());
        let r = (hv / ((1.0 - eps) * fv + eps * hv)).clamp(RATIO_MIN, RATIO_MAX);
        fv * r
    };
    // cumulative target on a fine grid, trapezoid rule
    let (lo, hi, steps) = (-12.0, 12.0, 240_000);
    let dx = (hi - lo) / steps as f64;
    let mut cdf = vec![0.0; steps + 1];
    for i in 1..=steps {
        let (a, b) = (lo + (i - 1) as f64 * dx, lo + i as f64 * dx);
        cdf[i] = cdf[i - 1] + 0.5 * dx * (target(a) + target(b));
    }
    let total = cdf[steps];
    let cdf_at = |y: f64| {
        if y <= lo {
            return 0.0;
        }
        if y >= hi {
            return 1.0;
        }
        let t = (y - lo) / dx;
        let i = (t as usize).min(steps - 1);
        let frac = t - i as f64;
        (cdf[i] + frac * (cdf[i + 1] - cdf[i])) / total
    };
    let n = 10_000;
    let out = model.sample_mh(n, 1000, &mut RngStream::new(TABLE_SEED, 30).rng());
    let mut xs = out.draws.column(0);
    xs.sort_by(f64::total_cmp);
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf_at(x);
            worse(
                (f - i as f64 / n as f64).abs(),
                ((i + 1) as f64 / n as f64 - f).abs(),
            )
        })
        .fold(0.0, worse);
    let critical = 1.627_62 / (n as f64).sqrt();
    verdict(
        d < critical,
        format!(
            "KS distance {d:.4} vs 1% critical value {critical:.4}; acceptance rate {:.3}",
            out.acceptance_rate
        ),
    )
}

// ----------------------------------------------------------- criterion 11

fn criterion_11() -> Verdict {
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let target = root.join("target/oracle-suite");
    let output = Command::new(cargo)
        .current_dir(&root)
        .env(NESTED, "1")
        .args(["test", "--workspace", "--tests", "--target-dir"])
        .arg(&target)
        .output();
    let output = match output {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("cannot run cargo: {e}")),
    };
    let text = String::from_utf8_lossy(&output.stdout);
    let (mut passed, mut failed, mut ignored) = (0, 0, 0);
    for line in text.lines().filter(|l| l.starts_with("test result:")) {
        let count = |label: &str| -> usize {
            line.split(';')
                .find(|p| p.trim().ends_with(label))
                .and_then(|p| p.split_whitespace().rev().nth(1)?.parse().ok())
                .unwrap_or(0)
        };
        passed += count("passed");
        failed += count("failed");
        ignored += count("ignored");
    }
    verdict(
        output.status.success() && failed == 0 && passed > 0,
        format!("unit and integration suites: {passed} passed, {failed} failed, {ignored} ignored"),
    )
}

// ----------------------------------------------------------- criterion 12

fn criterion_12() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let config = r#"{"experiment": "evaluate", "seed": 5, "dgp": {"kind": "normal_copula", "p": 3},
        "n": 200, "n_test": 1000, "replications": 10, "reference": "tc",
        "estimators": ["tc", "nc", "mnc", "mn", {"name": "mamn", "draws": 10000}]}"#;
    std::fs::write(dir.path().join("ev.json"), config).unwrap();
    let run = |out: &str, jobs: &str| {
        Command::new(env!("CARGO_BIN_EXE_mixdens"))
            .current_dir(dir.path())
            .args([
                "evaluate", "--config", "ev.json", "--out", out, "--jobs", jobs,
            ])
            .output()
            .unwrap()
    };
    let (a, b) = (run("a", "1"), run("b", "2"));
    if !a.status.success() || !b.status.success() {
        return verdict(
            false,
            format!("evaluate failed: {}", String::from_utf8_lossy(&a.stderr)),
        );
    }
    let files = ["report_kl.csv", "report_l2.csv", "losses.csv", "report.txt"];
    let same: Vec<bool> = files
        .iter()
        .map(|f| {
            std::fs::read(dir.path().join("a").join(f)).unwrap()
                == std::fs::read(dir.path().join("b").join(f)).unwrap()
        })
        .collect();
    verdict(
        same.iter().all(|s| *s),
        format!(
            "{}/{} report files byte-identical across reruns (1 and 2 threads)",
            same.iter().filter(|s| **s).count(),
            files.len()
        ),
    )
}

// ------------------------------------------------------------------ main

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        verdict(false, format!("panicked: {msg}"))
    })
}

fn main() {
    if std::env::var_os(NESTED).is_some() {
        return;
    }
    log::set_logger(&RECORDER).unwrap();
    log::set_max_level(log::LevelFilter::Warn);
    let selected: BTreeSet<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wanted = |c: u32| selected.is_empty() || selected.contains(&c);
    let titles = [
        (1, "KL decomposition identity"),
        (2, "KL estimator calibration"),
        (3, "normal-copula design direction"),
        (4, "scale-mixture design direction"),
        (5, "mixture-plus-uniform design direction"),
        (6, "MNC degeneracy"),
        (7, "normal-copula constraint"),
        (8, "t-copula nu recovery"),
        (9, "importance-sampling k"),
        (10, "MH sampler"),
        (11, "oracle suite"),
        (12, "determinism"),
    ];
    let mut table = None;
    let mut failures = 0;
    for (id, title) in titles {
        if !wanted(id) {
            continue;
        }
        let start = Instant::now();
        let v = guarded(|| match id {
            1 => criterion_1(),
            2 => criterion_2(),
            3 | 6 | 7 => {
                let run = table.get_or_insert_with(table1);
                match id {
                    3 => criterion_3(run),
                    6 => criterion_6(run),
                    _ => criterion_7(run),
                }
            }
            4 => criterion_4(),
            5 => criterion_5(),
            8 => criterion_8(),
            9 => criterion_9(),
            10 => criterion_10(),
            11 => criterion_11(),
            12 => criterion_12(),
            _ => unreachable!(),
        });
        failures += usize::from(!v.pass);
        println!(
            "criterion {id:>2} {}: {title}: {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all selected criteria passed");
}
