use std::sync::Arc;

use proptest::prelude::*;

use attacklab::attack::{binary_search_to_boundary, generate_pair, run_attack, AttackConfig};
use attacklab::estimator::{estimate, EstimatorConfig};
use attacklab::numerics::{
    cosine, ks_two_sample, max_abs_deviation_from_identity, sample_orthonormal_frame, sample_unit_sphere,
    spectral_extremes, standard_normal_vector, RealVector, RngSeed,
};
use attacklab::projections::{
    constructed_nonlinear_b, identity_projection, orthonormal_projection, upsample_operator, Projection,
    ProjectionError,
};
use attacklab::theory::{
    compute_cn, compute_omega, compute_omega_linear, compute_omega_thm2, pa_cdf, pa_pdf, theorem1_bounds,
    SmoothnessProfile,
};
use attacklab::victims::{random_mlp, DifferenceOracle, GroundTruth, LocalOracle, Victim};

fn mlp(seed: u64, m: usize) -> Victim {
    let layers = random_mlp(&[m, 12, 3], 1.5, None, &mut RngSeed(seed).stream(0)).unwrap();
    Victim::mlp(layers, 0, 1).unwrap()
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..40).prop_flat_map(|m| (Just(m), 1..=m))
}

fn profile() -> impl Strategy<Value = SmoothnessProfile> {
    (
        (0.1f64..4.0, 0.0f64..1.0, 0.01f64..4.0, 0.1f64..4.0, 0.01f64..4.0, 0.001f64..0.5),
        (3usize..128).prop_flat_map(|n| (Just(n), 1..=n)),
        (0.05f64..1.0, 0.1f64..5.0),
    )
        .prop_map(|((lf, lower_frac, bf, ls, bs, delta), (n, b), (align_frac, grad))| SmoothnessProfile {
            lipschitz_f: lf,
            lower_lipschitz_f: lf * lower_frac,
            beta_f: bf,
            lipschitz_s: ls,
            beta_s: bs,
            delta,
            n,
            b,
            proj_align: align_frac * lf * grad,
            grad_norm: grad,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frames_are_orthonormal_and_deterministic(seed in any::<u64>(), (m, k) in dims()) {
        let a = sample_orthonormal_frame(m, k, &mut RngSeed(seed).stream(0)).unwrap();
        let b = sample_orthonormal_frame(m, k, &mut RngSeed(seed).stream(0)).unwrap();
        prop_assert!(max_abs_deviation_from_identity(&a) < 1e-10);
        prop_assert_eq!(&a, &b);
        let (hi, lo) = spectral_extremes(&a).unwrap();
        prop_assert!((hi - 1.0).abs() < 1e-8 && (lo - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cosine_is_bounded(seed in any::<u64>(), m in 1usize..50) {
        let mut rng = RngSeed(seed).stream(0);
        let a = standard_normal_vector(m, &mut rng);
        let b = standard_normal_vector(m, &mut rng);
        let c = cosine(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_matches_difference_and_survives_scaling(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let victim = Arc::new(mlp(seed, 10));
        let scaled = Arc::new(victim.scaled(c));
        let (a, b) = (LocalOracle::new(victim.clone()), LocalOracle::new(scaled));
        let mut rng = RngSeed(seed).stream(1);
        for _ in 0..50 {
            let x = standard_normal_vector(10, &mut rng);
            let s = a.query_sign(&x).unwrap();
            prop_assert_eq!(s, b.query_sign(&x).unwrap());
            prop_assert_eq!(s.is_adversarial(), victim.value(&x) >= 0.0);
            if let Victim::Mlp(net) = victim.as_ref() {
                let logits = net.logits(&x);
                prop_assert_eq!(s.is_adversarial(), logits[1] >= logits[0]);
            }
        }
        prop_assert_eq!(a.query_count(), 50);
    }

    #[test]
    fn estimates_are_scale_invariant_and_exact_in_queries(seed in any::<u64>(), c in 1e-3f64..1e3, b in 1usize..12) {
        let victim = Arc::new(mlp(seed, 12));
        let x_b = standard_normal_vector(12, &mut RngSeed(seed).stream(2));
        let p = identity_projection(x_b).unwrap();
        let cfg = EstimatorConfig::new(b, 0.05);
        let plain = LocalOracle::new(victim.clone());
        let scaled = LocalOracle::new(Arc::new(victim.scaled(c)));
        let e1 = estimate(&p, &plain, &cfg, &mut RngSeed(seed).stream(3)).unwrap();
        let e2 = estimate(&p, &scaled, &cfg, &mut RngSeed(seed).stream(3)).unwrap();
        prop_assert_eq!(&e1.raw_low, &e2.raw_low);
        prop_assert_eq!(&e1.lifted, &e2.lifted);
        prop_assert_eq!(plain.query_count(), b as u64);
        prop_assert_eq!(e1.queries_used, b as u64);
        if !e1.has_ties {
            prop_assert!((e1.raw_low.norm() - 1.0 / (b as f64).sqrt()).abs() < 1e-10);
        }
        let proxy = e1.omega_proxy.unwrap();
        prop_assert!((0.0..=1.0).contains(&proxy));
    }

    #[test]
    fn orthonormal_lift_is_an_isometry(seed in any::<u64>(), (m, n) in dims()) {
        let mut rng = RngSeed(seed).stream(0);
        let w = sample_orthonormal_frame(m, n, &mut rng).unwrap();
        let x_b = standard_normal_vector(m, &mut rng);
        let p = orthonormal_projection(w, x_b.clone()).unwrap();
        prop_assert!((p.apply(&RealVector::zeros(n)) - &x_b).amax() <= 1e-12);
        let victim = Victim::linear(standard_normal_vector(m, &mut rng), x_b).unwrap();
        let oracle = LocalOracle::new(Arc::new(victim));
        let e = estimate(&p, &oracle, &EstimatorConfig::new(n, 0.1), &mut rng).unwrap();
        prop_assert!((e.lifted.unwrap().norm() - e.raw_low.norm()).abs() < 1e-12);
    }

    #[test]
    fn bent_projection_matches_linear_at_base(seed in any::<u64>(), (m, n) in dims(), frac in 0.0f64..1.0) {
        let mut rng = RngSeed(seed).stream(0);
        let j = sample_orthonormal_frame(m, n, &mut rng).unwrap() * 1.3;
        let x_b = standard_normal_vector(m, &mut rng);
        let p = constructed_nonlinear_b(j.clone(), x_b.clone(), frac * 0.8 / 1.3, 1.0).unwrap();
        let linear = orthonormal_projection(j.clone() / 1.3, x_b.clone()).unwrap();
        let zero = RealVector::zeros(n);
        prop_assert_eq!(p.apply(&zero), linear.apply(&zero));
        prop_assert_eq!(p.jacobian_at(&zero), j.clone());
        for _ in 0..10 {
            let u = sample_unit_sphere(n, &mut rng).unwrap() * 0.3;
            let (top, _) = spectral_extremes(&p.jacobian_at(&u)).unwrap();
            prop_assert!(top <= 1.3 * (1.0 + 1e-6));
        }
    }

    #[test]
    fn upsample_columns_are_unit(n_side in 1usize..6, factor in 1usize..5, channels in 1usize..3) {
        let a = upsample_operator(n_side, n_side * factor, channels).unwrap();
        prop_assert_eq!(a.shape(), (n_side * n_side * factor * factor * channels, n_side * n_side * channels));
        for col in a.column_iter() {
            prop_assert!((col.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cn_is_confined_and_pa_cdf_is_monotone(n in 2usize..400, xs in proptest::collection::vec(-1.0f64..1.0, 2..20)) {
        let c = compute_cn(n).unwrap();
        prop_assert!(c > 2.0 / std::f64::consts::PI && c < 1.0);
        prop_assert!(compute_cn(n + 2).unwrap() < c);
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let cdf: Vec<f64> = xs.iter().map(|&x| pa_cdf(n, x).unwrap()).collect();
        prop_assert!(cdf.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        for &x in &xs {
            prop_assert_eq!(pa_pdf(n, x).unwrap(), pa_pdf(n, -x).unwrap());
            prop_assert!((pa_cdf(n, x).unwrap() + pa_cdf(n, -x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_are_ordered_and_monotone(p in profile(), f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
        let (lo_f, hi_f) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let a = p.proj_align;
        let small = theorem1_bounds(&p, lo_f * a).unwrap();
        let large = theorem1_bounds(&p, hi_f * a).unwrap();
        prop_assert!(small.lower <= small.upper + 1e-15);
        prop_assert!(large.lower <= small.lower + 1e-15);
        prop_assert!(small.relaxed_lower <= small.lower + 1e-15);
        // √B scales the lower bound, so it only grows with B while it is non-negative
        if p.b < p.n && small.lower >= 0.0 {
            let more = theorem1_bounds(&SmoothnessProfile { b: p.b + 1, ..p }, lo_f * a).unwrap();
            prop_assert!(more.lower >= small.lower - 1e-15);
        }
        prop_assert!(theorem1_bounds(&p, a * (1.0 + 1e-9) + 1e-12).is_err());
    }

    #[test]
    fn bent_projection_omega_is_smaller(p in profile()) {
        prop_assert!(compute_omega_thm2(&p) < compute_omega_linear(&p));
        let reference = compute_omega(&SmoothnessProfile { beta_f: 0.0, ..p });
        prop_assert!((compute_omega_linear(&p) - reference).abs() <= 1e-15 * reference);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bisection_moves_towards_target_and_stays_adversarial(seed in any::<u64>(), theta in 1e-6f64..0.2) {
        let victim = Arc::new(mlp(seed, 8));
        let truth = GroundTruth::new(victim.clone());
        let pair = generate_pair(&truth, -2.0, 2.0, None, &mut RngSeed(seed).stream(4));
        prop_assume!(pair.is_ok());
        let pair = pair.unwrap();
        let oracle = LocalOracle::new(victim.clone());
        let r = binary_search_to_boundary(&oracle, &pair.x_src, &pair.x_tgt, theta).unwrap();
        prop_assert!((&r.point - &pair.x_tgt).norm() <= (&pair.x_src - &pair.x_tgt).norm());
        prop_assert!(victim.value(&r.point) >= 0.0);
        prop_assert_eq!(r.queries, (1.0 / theta).log2().ceil() as u64);
        prop_assert_eq!(oracle.query_count(), r.queries);
    }

    #[test]
    fn attacks_stay_valid_within_budget(seed in any::<u64>(), budget in 3u64..800) {
        let victim = Arc::new(mlp(seed, 8));
        let truth = GroundTruth::new(victim.clone());
        let pair = generate_pair(&truth, -2.0, 2.0, None, &mut RngSeed(seed).stream(5));
        prop_assume!(pair.is_ok());
        let pair = pair.unwrap();
        let oracle = LocalOracle::new(victim.clone());
        let mut cfg = AttackConfig::new(budget, 1e-3, RngSeed(seed));
        cfg.keep_points = true;
        let at = |x: &RealVector| -> Result<Box<dyn Projection>, ProjectionError> { Ok(Box::new(identity_projection(x.clone())?)) };
        let out = run_attack(&oracle, &at, &pair.x_src, &pair.x_tgt, &cfg).unwrap();
        prop_assert!(out.queries <= budget);
        prop_assert_eq!(oracle.query_count(), out.queries);
        prop_assert!(out.trace.points.iter().all(|x| victim.value(x) >= 0.0));
        prop_assert!(out.trace.rows.windows(2).all(|w| w[0].queries < w[1].queries));
        let again = run_attack(&LocalOracle::new(victim.clone()), &at, &pair.x_src, &pair.x_tgt, &cfg).unwrap();
        prop_assert_eq!(out.trace.to_csv(), again.trace.to_csv());
    }
}

#[test]
fn rotated_inner_products_share_a_law() {
    // ⟨Ru, v⟩ and ⟨u, Rᵀv⟩ for uniform u
    let n = 12;
    let mut rng = RngSeed(91).stream(0);
    let r = sample_orthonormal_frame(n, n, &mut rng).unwrap();
    let v = sample_unit_sphere(n, &mut rng).unwrap();
    let rt_v = r.tr_mul(&v);
    let draws = 100_000;
    let a: Vec<f64> = (0..draws).map(|_| (&r * sample_unit_sphere(n, &mut rng).unwrap()).dot(&v)).collect();
    let b: Vec<f64> = (0..draws).map(|_| sample_unit_sphere(n, &mut rng).unwrap().dot(&rt_v)).collect();
    assert!(ks_two_sample(&a, &b) < 0.01);
}
