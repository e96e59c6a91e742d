use super::*;
use crate::math::quadrature::{integrate_2d_adaptive, QuadratureSettings};
use crate::math::special::{normal_cdf, normal_logpdf};
use crate::math::stats::{
    correlation, covariance, kendall_tau, ks_critical_1pct, ks_statistic, mean, variance,
};
use crate::mixture::{sa_fit, SaConfig};
use crate::{Density, UnivariateDensity};

fn sorted_column(x: &DataMatrix, j: usize) -> Vec<f64> {
    let mut c = x.column(j);
    c.sort_by(f64::total_cmp);
    c
}

#[test]
fn normal_copula_marginal_passes_ks() {
    let dgp = dgp_normal_copula(1).unwrap();
    let y = dgp.sample(10_000, &mut RngStream::new(1, 0).rng());
    let h = three_component_marginal();
    assert!(ks_statistic(&sorted_column(&y, 0), |v| h.cdf(v)) < ks_critical_1pct(10_000));
}

#[test]
fn normal_copula_latent_correlation() {
    let dgp = dgp_normal_copula(3).unwrap();
    let y = dgp.sample(10_000, &mut RngStream::new(2, 0).rng());
    let x = dgp.normal_scores(&y).unwrap();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let r = correlation(&x.column(a), &x.column(b));
        assert!((r - 0.5).abs() <= 0.05, "{r}");
    }
}

fn integral_2d(dgp: &Dgp, half: f64) -> f64 {
    integrate_2d_adaptive(
        |a, b| dgp.logpdf(&[a, b]).exp(),
        (-half, half),
        (-half, half),
        &QuadratureSettings::two_dimensional(),
    )
    .unwrap()
}

#[test]
fn normal_copula_density_integrates_to_one() {
    let total = integral_2d(&dgp_normal_copula(2).unwrap(), 25.0);
    assert!((total - 1.0).abs() <= 2e-3, "{total}");
}

#[test]
fn clayton_kendall_tau_and_marginals() {
    let dgp = dgp_clayton(3, 5.0).unwrap();
    let y = dgp.sample(10_000, &mut RngStream::new(3, 0).rng());
    let sub = y.select_rows(&(0..3000).collect::<Vec<_>>());
    for (a, b) in [(0, 1), (1, 2)] {
        let tau = kendall_tau(&sub.column(a), &sub.column(b));
        assert!((tau - 5.0 / 7.0).abs() <= 0.05, "{tau}");
    }
    let h = three_component_marginal();
    for j in 0..3 {
        assert!(ks_statistic(&sorted_column(&y, j), |v| h.cdf(v)) < ks_critical_1pct(10_000));
    }
}

#[test]
fn weak_clayton_is_near_independence() {
    let dgp = dgp_clayton(2, 1e-4).unwrap();
    let h = three_component_marginal();
    for y in [[0.0, 0.0], [-3.0, 2.5], [1.0, -6.0], [3.1, 3.0]] {
        let ratio = (dgp.logpdf(&y) - h.logpdf(y[0]) - h.logpdf(y[1])).exp();
        assert!((ratio - 1.0).abs() <= 0.01, "{ratio}");
    }
}

#[test]
fn scale_mixture_moments() {
    let p = 5;
    let dgp = dgp_scale_mixture(p).unwrap();
    let y = dgp.sample(100_000, &mut RngStream::new(4, 0).rng());
    let c = covariance(&y);
    for a in 0..p {
        for b in 0..p {
            let expected = if a == b { 0.7 + 0.3 * 9.0 } else { 0.3 * 5.0 };
            assert!(
                (c[(a, b)] / expected - 1.0).abs() <= 0.03,
                "({a},{b}) {}",
                c[(a, b)]
            );
        }
    }
}

#[test]
fn scale_mixture_density_at_origin() {
    let p = 5;
    let dgp = dgp_scale_mixture(p).unwrap();
    let pf = p as f64;
    let norm = (2.0 * core::f64::consts::PI).powf(-pf / 2.0);
    // det(4I + 5ii') = 4^(p-1) (4 + 5p)
    let wide_det = 4f64.powi(p as i32 - 1) * (4.0 + 5.0 * pf);
    let expected = 0.7 * norm + 0.3 * norm / wide_det.sqrt();
    assert!((dgp.logpdf(&[0.0; 5]) - expected.ln()).abs() < 1e-12);
}

#[test]
fn scale_mixture_weight_recovered() {
    let dgp = dgp_scale_mixture(5).unwrap();
    let y = dgp.sample(5000, &mut RngStream::new(5, 0).rng());
    let fit = sa_fit(
        &y,
        None,
        2,
        &SaConfig::default(),
        &mut RngStream::new(6, 0).rng(),
    )
    .unwrap();
    let traces: Vec<f64> = fit
        .covariances()
        .iter()
        .map(|v| v.matrix().trace())
        .collect();
    let wide = if traces[0] > traces[1] { 0 } else { 1 };
    assert!(
        (fit.weights()[wide] - 0.3).abs() <= 0.1,
        "{:?}",
        fit.weights()
    );
}

#[test]
fn mn_plus_uniform_weights_and_support() {
    let m = MnPlusUniform::new(4).unwrap();
    assert_eq!(m.weights().iter().sum::<f64>(), 1.0);
    let mut rng = RngStream::new(7, 0).rng();
    let mut y = [0.0; 4];
    for _ in 0..10_000 {
        m.sample_uniform_into(&mut rng, &mut y);
        assert!(y.iter().all(|v| v.abs() <= 10.0));
    }
}

#[test]
fn mn_plus_uniform_last_marginal() {
    let m = MnPlusUniform::new(3).unwrap();
    let phi = |z: f64| normal_logpdf(z).exp();
    let expected =
        0.66 * (0.6 * phi(-3.0) + 0.2 * phi(0.0) / 2f64.sqrt() + 0.2 * phi(3.0)) + 0.34 / 20.0;
    assert!((m.marginal_pdf(2, -3.0) - expected).abs() < 1e-15);
    let one = MnPlusUniform::new(1).unwrap();
    assert!((one.logpdf(&[-3.0]) - expected.ln()).abs() < 1e-12);
}

#[test]
fn figure1_clusters_and_scores() {
    let (three, two) = dgp_figure1();
    let y = three.sample(3000, &mut RngStream::new(8, 0).rng());
    for centre in [-5.0, 0.0, 5.0] {
        let rows: Vec<usize> = (0..y.nrows())
            .filter(|&i| (y.get(i, 0) - centre).abs() < 2.5)
            .collect();
        let cluster = y.select_rows(&rows);
        for j in 0..2 {
            assert!((mean(&cluster.column(j)) - centre).abs() <= 0.2);
        }
    }
    for dgp in [&three, &two] {
        let y = dgp.sample(5000, &mut RngStream::new(9, 0).rng());
        let x = dgp.normal_scores(&y).unwrap();
        for j in 0..2 {
            assert!(ks_statistic(&sorted_column(&x, j), normal_cdf) < ks_critical_1pct(5000));
        }
    }
    let y = two.sample(20_000, &mut RngStream::new(10, 0).rng());
    for j in 0..2 {
        let c = y.column(j);
        let (m, v) = (mean(&c), variance(&c));
        let kurtosis = c.iter().map(|x| (x - m).powi(4)).sum::<f64>() / c.len() as f64 / (v * v);
        assert!(kurtosis > 3.0);
    }
}

#[test]
fn bivariate_kinds_require_two_dimensions() {
    assert!(Dgp::new(DgpKind::ThreeSeparated, 3, None).is_err());
    assert!(Dgp::new(DgpKind::NormalCopula, 0, None).is_err());
    for kind in DgpKind::ALL {
        assert_eq!(DgpKind::parse(kind.key()), Some(kind));
        assert_eq!(Dgp::new(kind, 2, None).unwrap().kind(), kind);
    }
}

/// Entropy by quadrature against the Monte Carlo mean of the log density.
#[test]
fn log_density_matches_sampler() {
    for (dgp, half) in [
        (dgp_normal_copula(2).unwrap(), 25.0),
        (dgp_scale_mixture(2).unwrap(), 40.0),
        // the box edge is a discontinuity, so integrate exactly over the box
        (dgp_mn_plus_uniform(2).unwrap(), 10.0),
        (dgp_figure1().0, 12.0),
    ] {
        let entropy = -integrate_2d_adaptive(
            |a, b| {
                let l = dgp.logpdf(&[a, b]);
                if l == f64::NEG_INFINITY {
                    0.0
                } else {
                    l.exp() * l
                }
            },
            (-half, half),
            (-half, half),
            &QuadratureSettings::two_dimensional(),
        )
        .unwrap();
        let y = dgp.sample(100_000, &mut RngStream::new(11, 0).rng());
        let mc = -y.rows().map(|r| dgp.logpdf(r)).sum::<f64>() / y.nrows() as f64;
        assert!(
            (mc - entropy).abs() <= 1e-2,
            "{:?}: {mc} vs {entropy}",
            dgp.kind()
        );
    }
}

#[test]
fn importance_reweighting_matches_direct_moments() {
    let (three, wide) = dgp_figure1();
    let proposal = wide.sample(200_000, &mut RngStream::new(12, 0).rng());
    let (mut sw, mut swy) = (0.0, 0.0);
    for r in proposal.rows() {
        let w = (three.logpdf(r) - wide.logpdf(r)).exp();
        sw += w;
        swy += w * r[0] * r[0];
    }
    let reweighted = swy / sw;
    let direct = three
        .sample(50_000, &mut RngStream::new(13, 0).rng())
        .column(0);
    let sq: Vec<f64> = direct.iter().map(|v| v * v).collect();
    let se = (variance(&sq) / sq.len() as f64).sqrt();
    // the exact second moment is 1 + 50/3
    assert!(
        (mean(&sq) - reweighted).abs() < 3.0 * 2f64.sqrt() * se,
        "{} vs {reweighted}",
        mean(&sq)
    );
    assert!((reweighted - (1.0 + 50.0 / 3.0)).abs() < 0.3);
}

fn small_experiment() -> Experiment {
    let mut exp = Experiment::new(
        dgp_normal_copula(2).unwrap(),
        alloc::vec![EstimatorKind::Tc, EstimatorKind::Nc, EstimatorKind::Mn],
    );
    exp.n = 200;
    exp.n_test = 500;
    exp.config.copula.max_components = 3;
    exp.config.adapted.max_components = 3;
    exp
}

#[test]
fn replications_are_deterministic() {
    let exp = small_experiment();
    let stream = RngStream::new(14, 0);
    let a = run_replication(&exp, 3, &stream).unwrap();
    let b = run_replication(&exp, 3, &stream).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        training_sample(&exp, 3, &stream),
        training_sample(&exp, 3, &stream)
    );
    assert_ne!(
        training_sample(&exp, 3, &stream),
        training_sample(&exp, 4, &stream)
    );
    assert!(a.fits.iter().all(|f| f.error.is_none() && f.kl.is_finite()));
    assert!(a.fits[1]
        .correlation_diagonal
        .as_ref()
        .unwrap()
        .iter()
        .all(|d| (d - 1.0).abs() <= 0.01));
    assert!(a.fits[0].nu.is_some() && a.fits[2].components.is_some());
}

#[test]
fn estimator_order_does_not_change_fits() {
    let exp = small_experiment();
    let mut reversed = exp.clone();
    reversed.estimators.reverse();
    let stream = RngStream::new(15, 0);
    let a = run_replication(&exp, 0, &stream).unwrap();
    let b = run_replication(&reversed, 0, &stream).unwrap();
    for (x, y) in a.fits.iter().zip(b.fits.iter().rev()) {
        assert_eq!(x, y);
    }
}

#[test]
fn reference_against_itself_gives_zero_ratios() {
    let mut exp = small_experiment();
    exp.estimators = alloc::vec![EstimatorKind::Nc, EstimatorKind::Nc];
    let outcomes = run_replications(&exp, 10, &RngStream::new(16, 0)).unwrap();
    let kl = loss_matrix(&outcomes, Loss::Kl);
    let report = crate::evaluation::log_ratio_table(&kl, &exp.labels(), 0).unwrap();
    assert_eq!(report.rows[1].median, 0.0);
}

#[test]
fn invalid_experiments_rejected() {
    let mut exp = small_experiment();
    exp.n = 2;
    assert!(run_replication(&exp, 0, &RngStream::new(1, 0)).is_err());
    exp.n = 100;
    exp.estimators.clear();
    assert!(exp.validate().is_err());
    for kind in EstimatorKind::ALL {
        assert_eq!(EstimatorKind::parse(kind.key()), Some(kind));
    }
}

#[test]
fn override_changes_only_its_estimator() {
    let exp = small_experiment();
    let mut tuned = exp.clone();
    let mut cfg = exp.config.clone();
    cfg.adapted.max_components = 1;
    tuned.overrides = alloc::vec![None, None, Some(cfg)];
    let stream = RngStream::new(17, 0);
    let a = run_replication(&exp, 0, &stream).unwrap();
    let b = run_replication(&tuned, 0, &stream).unwrap();
    assert_eq!(a.fits[..2], b.fits[..2]);
    assert_eq!(b.fits[2].components, Some(1));
    tuned.overrides.push(None);
    tuned.overrides.push(None);
    assert!(tuned.validate().is_err());
}
