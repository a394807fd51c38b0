mod common;

use num_complex::Complex64;
use proptest::prelude::*;

use common::{brute_force_min_second_moment, fd_moment, rel_err};
use phasefit::analysis::{self, TransientEvaluator};
use phasefit::fitting::{self, Family};
use phasefit::markov;
use phasefit::model::RoutingFeasibility;
use phasefit::sampling::{self, SamplerState};
use phasefit::{Branch, ClassicalCoxSpec, GeneralizedCoxModel};

fn branch_strategy(allow_instant: bool) -> impl Strategy<Value = (f64, Vec<f64>)> {
    let min_len = usize::from(!allow_instant);
    (
        0.01f64..1.0,
        prop::collection::vec(-1.0f64..1.0, min_len..=4)
            .prop_map(|e| e.into_iter().map(|x| 10f64.powf(x)).collect()),
    )
}

fn model_strategy(allow_instant: bool) -> impl Strategy<Value = GeneralizedCoxModel> {
    prop::collection::vec(branch_strategy(allow_instant), 1..=4).prop_map(|raw| {
        let total: f64 = raw.iter().map(|b| b.0).sum();
        GeneralizedCoxModel::new(
            raw.into_iter()
                .map(|(w, rates)| Branch::new(w / total, rates))
                .collect(),
        )
        .unwrap()
    })
}

/// Rates within a factor of four, so quadrature over `[0, 20·mean]` stays cheap.
fn moderate_model_strategy() -> impl Strategy<Value = GeneralizedCoxModel> {
    let branch = (0.01f64..1.0, prop::collection::vec(0.5f64..2.0, 0..=3));
    prop::collection::vec(branch, 1..=3).prop_map(|raw| {
        let total: f64 = raw.iter().map(|b| b.0).sum();
        GeneralizedCoxModel::new(
            raw.into_iter()
                .map(|(w, rates)| Branch::new(w / total, rates))
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn classical_cox_probabilities_telescope(
        abandon in prop::collection::vec(0.0f64..=1.0, 1..8),
    ) {
        let rates: Vec<f64> = (1..=abandon.len()).map(|i| i as f64).collect();
        let spec = ClassicalCoxSpec::new(abandon.clone(), rates).unwrap();
        let m = GeneralizedCoxModel::from_classical_cox(&spec).unwrap();
        prop_assert_eq!(m.branches().len(), abandon.len() + 1);
        let sum: f64 = m.branches().iter().map(|b| b.prob).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        for (j, b) in m.branches().iter().enumerate() {
            prop_assert_eq!(b.len(), j);
        }
    }

    #[test]
    fn phase_type_preserves_mass(m in model_strategy(true)) {
        let rep = m.to_phase_type();
        let total = rep.atom0() + rep.alpha().iter().sum::<f64>();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert_eq!(rep.dim(), m.n_transient());
        let s = rep.subgen();
        for i in 0..rep.dim() {
            prop_assert!(s[(i, i)] < 0.0);
            prop_assert!(s.row(i).sum() <= 0.0);
        }
    }

    #[test]
    fn feasible_routing_matches_transform(
        p1 in 0.0f64..=1.0, l1 in 0.1f64..10.0, l2 in 0.1f64..10.0,
        s_exps in prop::collection::vec(-2.0f64..2.0, 10),
    ) {
        let m = GeneralizedCoxModel::new(vec![
            Branch::new(p1, vec![l1]),
            Branch::new(1.0 - p1, vec![l2]),
        ]).unwrap();
        if let RoutingFeasibility::Feasible { classical, .. } = m.cox_routing_feasible().unwrap() {
            let cox = GeneralizedCoxModel::from_classical_cox(&classical).unwrap();
            for e in s_exps {
                let s = 10f64.powf(e);
                let fg = analysis::laplace_real(&m, s).unwrap();
                let fc = analysis::laplace_real(&cox, s).unwrap();
                prop_assert!(rel_err(fc, fg) <= 1e-12, "s={} fc={} fg={}", s, fc, fg);
            }
        } else {
            prop_assert!(p1 + (1.0 - p1) * l2 / l1 > 1.0);
        }
    }

    #[test]
    fn equal_rate_single_stages_are_exponential(
        lambda in 0.1f64..10.0,
        weights in prop::collection::vec(0.01f64..1.0, 1..5),
        s in 0.0f64..20.0,
    ) {
        let total: f64 = weights.iter().sum();
        let m = GeneralizedCoxModel::new(
            weights.iter().map(|w| Branch::new(w / total, vec![lambda])).collect(),
        ).unwrap();
        let got = analysis::laplace_real(&m, s).unwrap();
        prop_assert!(rel_err(got, lambda / (s + lambda)) <= 1e-14);
    }

    #[test]
    fn laplace_normalized(m in model_strategy(true)) {
        let v = analysis::laplace(&m, Complex64::new(0.0, 0.0)).unwrap();
        prop_assert!((v.re - 1.0).abs() <= 1e-12 && v.im == 0.0);
    }

    #[test]
    fn moment_k_agrees_with_branch_sums(m in model_strategy(true)) {
        let mean = analysis::mean(&m);
        let m2 = analysis::second_moment(&m);
        prop_assume!(mean > 0.0);
        prop_assert!(rel_err(analysis::moment_k(&m, 1).unwrap(), mean) <= 1e-10);
        prop_assert!(rel_err(analysis::moment_k(&m, 2).unwrap(), m2) <= 1e-10);
        let s = analysis::summary(&m);
        prop_assert!(rel_err(s.second_moment, s.mean * s.mean + s.variance) <= 1e-12);
    }

    #[test]
    fn laplace_derivatives_are_moments(m in model_strategy(true)) {
        prop_assume!(analysis::mean(&m) > 0.0);
        for k in 1..=3 {
            let exact = analysis::moment_k(&m, k).unwrap();
            let fd = fd_moment(&m, k);
            prop_assert!(rel_err(fd, exact) <= 1e-4, "k={} fd={} exact={}", k, fd, exact);
        }
    }

    #[test]
    fn cdf_monotone_and_pdf_integrates(m in moderate_model_strategy()) {
        let mean = analysis::mean(&m);
        prop_assume!(mean > 0.0);
        let ev = TransientEvaluator::new(m.to_phase_type());
        let end = 20.0 * mean;
        let max_rate = m.max_rate().unwrap_or(1.0);
        let steps = 2 * ((end * max_rate * 10.0) as usize).max(1000);
        let h = end / steps as f64;
        let mut prev = ev.cdf(0.0).unwrap().total;
        prop_assert!((prev - m.atom0()).abs() <= 1e-12);
        // composite Simpson
        let mut integral = ev.pdf(0.0).unwrap() + ev.pdf(end).unwrap();
        for i in 1..steps {
            let t = i as f64 * h;
            integral += if i % 2 == 1 { 4.0 } else { 2.0 } * ev.pdf(t).unwrap();
            let c = ev.cdf(t).unwrap().total;
            prop_assert!(c >= prev - 1e-12);
            prev = c;
        }
        integral *= h / 3.0;
        let cdf_end = ev.cdf(end).unwrap().total;
        prop_assert!((integral + m.atom0() - cdf_end).abs() <= 1e-6);
    }

    #[test]
    fn min_second_moment_bound_ordering(
        weights in prop::collection::vec(0.0f64..1.0, 1..6),
        lengths in prop::collection::vec(1usize..8, 6),
    ) {
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 0.0);
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let lengths = &lengths[..probs.len()];
        let r = analysis::min_second_moment(&probs, lengths, 1.0).unwrap();
        prop_assert!(r.ratio_min >= r.lower_bound * (1.0 - 1e-14));
        let lmax = *lengths.iter().max().unwrap();
        let mass_off_longest: f64 = probs.iter().zip(lengths)
            .filter(|(_, &l)| l < lmax).map(|(p, _)| p).sum();
        if mass_off_longest == 0.0 {
            prop_assert!(rel_err(r.ratio_min, r.lower_bound) <= 1e-14);
        } else if mass_off_longest > 1e-6 {
            prop_assert!(r.ratio_min > r.lower_bound);
        }
        for (xs, &l) in r.optimal_x.iter().zip(lengths) {
            prop_assert_eq!(xs.len(), l);
            prop_assert!(xs.iter().all(|x| *x == xs[0]));
        }
    }

    #[test]
    fn fit_is_scale_equivariant(cv2 in 0.02f64..50.0, c_idx in 0usize..3) {
        let c = [0.01, 7.0, 1000.0][c_idx];
        let base = fitting::fit_two_moments(1.0, cv2).unwrap();
        let scaled = fitting::fit_two_moments(c, c * c * cv2).unwrap();
        prop_assert_eq!(base.family, scaled.family);
        prop_assert_eq!(base.n_transient, scaled.n_transient);
        for (b, s) in base.model.branches().iter().zip(scaled.model.branches()) {
            prop_assert!((b.prob - s.prob).abs() <= 1e-12);
            for (xb, xs) in b.stage_means().zip(s.stage_means()) {
                prop_assert!(rel_err(xs, c * xb) <= 1e-12);
            }
        }
    }

    #[test]
    fn fit_respects_second_moment_bound(cv2 in 0.02f64..50.0) {
        let fit = fitting::fit_two_moments(1.0, cv2).unwrap();
        let ratio = fit.achieved.second_moment;
        let bound = 1.0 + 1.0 / fit.n_transient as f64;
        prop_assert!(ratio >= bound * (1.0 - 1e-12));
        if matches!(fit.family, Family::Erlang | Family::Exponential) {
            prop_assert!(rel_err(ratio, bound) <= 1e-12);
        } else {
            prop_assert!(ratio > bound);
        }
    }

    #[test]
    fn hyper_family_matches_targets(cv2 in 1.01f64..100.0, frac in 0.01f64..=1.0) {
        let p = frac * 2.0 / (1.0 + cv2);
        let fit = fitting::hyper_family(1.0, cv2, p).unwrap();
        prop_assert!(rel_err(fit.achieved.mean, 1.0) <= 1e-9);
        prop_assert!(rel_err(fit.achieved.variance, cv2) <= 1e-9);
    }

    #[test]
    fn sampler_is_deterministic(m in model_strategy(true), seed in any::<u64>()) {
        let a = sampling::sample_n(&m, &mut SamplerState::new(seed), 200);
        let b = sampling::sample_n(&m, &mut SamplerState::new(seed), 200);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn draws_are_zero_only_on_instantaneous_branches(m in model_strategy(true), seed in any::<u64>()) {
        let mut s = SamplerState::new(seed);
        for _ in 0..200 {
            let (j, t) = sampling::sample_with_branch(&m, &mut s);
            prop_assert!(t >= 0.0 && t.is_finite());
            prop_assert_eq!(t == 0.0, m.branches()[j].is_instantaneous());
        }
    }

    #[test]
    fn exports_are_valid_generators(m in model_strategy(true)) {
        let exact = markov::exact_absorbing_ctmc(&m);
        exact.validate().unwrap();
        prop_assert_eq!(exact.n_states(), m.n_transient() + 1);
        let approx = markov::approx_ctmc(&m, markov::default_big_lambda(&m)).unwrap();
        approx.validate().unwrap();
        prop_assert_eq!(approx.n_states(), m.n_transient() + 2);
        for c in [&exact, &approx] {
            for row in &c.generator {
                let scale = row.iter().fold(1.0f64, |a, q| a.max(q.abs()));
                prop_assert!(row.iter().sum::<f64>().abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn exact_export_moments_match_analysis(m in model_strategy(true)) {
        prop_assume!(analysis::mean(&m) > 0.0);
        let c = markov::exact_absorbing_ctmc(&m);
        for k in 1..=4 {
            let a = c.absorption_time_moment(k).unwrap();
            let b = analysis::moment_k(&m, k).unwrap();
            prop_assert!(rel_err(a, b) <= 1e-10);
        }
    }
}

#[test]
fn brute_force_never_beats_closed_form() {
    let mut rng = SamplerState::new(2024);
    for _ in 0..30 {
        let (probs, lengths) = common::random_routing(&mut rng);
        let mu = 0.5 + 2.0 * rng.uniform();
        let r = analysis::min_second_moment(&probs, &lengths, mu).unwrap();
        let (found, _) = brute_force_min_second_moment(&probs, &lengths, mu);
        assert!(
            found >= r.ratio_min * mu * mu - 1e-6,
            "{probs:?} {lengths:?}: brute force {found} < closed form {}",
            r.ratio_min * mu * mu
        );
    }
}

#[test]
fn almost_erlang_stage_means_positive() {
    let mut rng = SamplerState::new(77);
    for _ in 0..10_000 {
        let mu = 10f64.powf(4.0 * rng.uniform() - 2.0);
        let cv2 = rng.uniform() * 0.999_999;
        let sigma2 = cv2 * mu * mu;
        let fit = fitting::fit_two_moments(mu, sigma2).unwrap();
        for x in fit.model.branches()[0].stage_means() {
            assert!(x > 0.0 && x.is_finite(), "mu={mu} s2={sigma2} x={x}");
        }
        assert!(rel_err(fit.achieved.mean, mu) <= 1e-9);
        assert!(rel_err(fit.achieved.variance, sigma2) <= 1e-9);
    }
}

#[test]
fn minimality_certificate() {
    for &(mu, s2) in &common::grid() {
        let fit = fitting::fit_two_moments(mu, s2).unwrap();
        let n = fit.n_transient;
        if s2 < mu * mu * (1.0 - 1e-12) {
            // N-1 stages cannot reach the variance: μ²/(N-1) > σ²
            assert!(n >= 2);
            assert!(mu * mu / (n - 1) as f64 > s2);
        } else {
            assert_eq!(n, 1);
        }
    }
}

#[test]
fn cdf_reaches_one_for_low_variability_models() {
    for cv2 in [0.05, 0.1, 0.25, 1.0 / 3.0, 0.5, 0.9, 1.0] {
        let fit = fitting::fit_two_moments(1.0, cv2).unwrap();
        let c = analysis::cdf(&fit.model, 20.0).unwrap();
        assert!((c.total - 1.0).abs() <= 1e-6, "cv2={cv2} cdf={}", c.total);
    }
}

#[test]
fn sample_stats_of_exponential_draws() {
    let exp = GeneralizedCoxModel::exponential(1.0).unwrap();
    let draws = sampling::sample_n(&exp, &mut SamplerState::new(31337), 1_000_000);
    let s = fitting::sample_stats(&draws).unwrap();
    assert!((s.mean - 1.0).abs() <= 0.004, "mean {}", s.mean);
    assert!((s.variance - 1.0).abs() <= 0.015, "variance {}", s.variance);
}

#[test]
fn branch_frequencies_within_binomial_error() {
    let m = GeneralizedCoxModel::new(vec![
        Branch::new(0.1, vec![1.0]),
        Branch::instantaneous(0.25),
        Branch::new(0.3, vec![2.0, 3.0]),
        Branch::new(0.35, vec![0.5]),
    ])
    .unwrap();
    let n = 1_000_000;
    let mut counts = [0usize; 4];
    let mut s = SamplerState::new(5);
    for _ in 0..n {
        counts[sampling::sample_with_branch(&m, &mut s).0] += 1;
    }
    for (c, b) in counts.iter().zip(m.branches()) {
        let freq = *c as f64 / n as f64;
        let se = (b.prob * (1.0 - b.prob) / n as f64).sqrt();
        assert!(
            (freq - b.prob).abs() <= 4.0 * se,
            "freq {freq} vs {}",
            b.prob
        );
    }
}

#[test]
fn sampling_examples() {
    // Erlang-2 with rate 2: mean 1, variance 0.5
    let erl = GeneralizedCoxModel::erlang(2, 2.0).unwrap();
    let r = sampling::empirical_check(&erl, 1_000_000, 8).unwrap();
    assert!(r.passed(), "{r:?}");
    assert!(rel_err(r.target_variance, 0.5) < 1e-15);

    // atom weight of the simplest hyperexponential fit
    let fit = fitting::fit_two_moments(1.0, 4.0).unwrap();
    let r = sampling::empirical_check(&fit.model, 1_000_000, 9).unwrap();
    assert!(
        (r.zero_fraction - 0.6).abs() <= 0.002,
        "{}",
        r.zero_fraction
    );

    // exponential at rate 3
    let exp = GeneralizedCoxModel::exponential(3.0).unwrap();
    let mut s = SamplerState::new(10);
    let mean = (0..1_000_000)
        .map(|_| sampling::sample_exponential(&mut s, 3.0).unwrap())
        .sum::<f64>()
        / 1e6;
    assert!((mean - 1.0 / 3.0).abs() <= 4.0 * (1.0 / 3.0) / 1e3);
    let _ = exp;
}

#[test]
fn empirical_check_positive_and_negative_controls() {
    let fit = fitting::fit_two_moments(1.0, 0.4).unwrap();
    let r = sampling::empirical_check(&fit.model, 1_000_000, 12).unwrap();
    assert!(r.passed(), "{r:?}");
    assert!((0.9975..=1.0025).contains(&r.sample_mean));

    let corrupted = GeneralizedCoxModel::new(
        fit.model
            .branches()
            .iter()
            .map(|b| Branch::new(b.prob, b.rates.iter().map(|r| r / 2.0).collect()))
            .collect(),
    )
    .unwrap();
    let r = sampling::empirical_check_against(&corrupted, &fit.target, 1_000_000, 12).unwrap();
    assert!(!r.passed());
}

#[test]
fn huge_rate_device_converges() {
    let fit = fitting::fit_two_moments(1.0, 0.4).unwrap();
    let max_rate = fit.model.max_rate().unwrap();
    let mut prev = f64::INFINITY;
    for factor in [1e2, 1e3, 1e4] {
        let big = factor * max_rate;
        let mean = markov::approx_ctmc(&fit.model, big)
            .unwrap()
            .absorption_time_moment(1)
            .unwrap();
        let err = (mean - 1.0).abs();
        assert!(err < prev);
        assert!((err - 1.0 / big).abs() <= 1e-12);
        prev = err;
    }
}
