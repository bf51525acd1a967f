use busnlos::exclusion::SkySat;
use busnlos::skygeom::wrap_360;
use busnlos::solver::{snr_elevation_weight, WeightParams};
use busnlos::{
    euclidean_cluster, exclude_nlos, is_blocked, project_boundary, AzEl, BusBoundary3D, ExclusionConfig, Method,
    Point3, PointCloud, Reason, Scenario, SkyBoundary, Verdict,
};
use proptest::prelude::*;
use serde_json::json;

fn grid_points(max: usize) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec((0i32..12, 0i32..12, 0i32..4), 0..max)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x as f64 * 0.25, y as f64 * 0.25, z as f64 * 0.25)).collect())
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

/// Brute-force components of the strict `d < r` graph with the same filters and ordering.
fn union_find_clusters(points: &[Point3], r: f64, min: usize, max: usize) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].distance_squared(&points[j]) < r * r {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups = std::collections::BTreeMap::<usize, Vec<usize>>::new();
    for i in 0..points.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().filter(|g| g.len() >= min && g.len() <= max).collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

fn sorted_clusters(points: Vec<Point3>, r: f64, min: usize, max: usize) -> Vec<Vec<usize>> {
    euclidean_cluster(&PointCloud::new(points), r, min, max)
        .unwrap()
        .into_iter()
        .map(|c| {
            let mut ids = c.point_ids;
            ids.sort_unstable();
            ids
        })
        .collect()
}

fn sky(az_e: f64, el_e: f64, az_f: f64, el_f: f64) -> SkyBoundary {
    SkyBoundary::from_az_el(AzEl::new(az_e, el_e), AzEl::new(az_f, el_f)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn clustering_matches_union_find(points in grid_points(120), min in 1usize..6, extra in 0usize..60) {
        let max = min + extra;
        let expected = union_find_clusters(&points, 0.5, min, max);
        prop_assert_eq!(sorted_clusters(points, 0.5, min, max), expected);
    }

    #[test]
    fn clustering_ignores_point_order(points in grid_points(100), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<Point3> = order.iter().map(|&i| points[i]).collect();

        let canon = |clusters: Vec<Vec<usize>>, map: &dyn Fn(usize) -> usize| {
            let mut sets: Vec<Vec<usize>> = clusters
                .into_iter()
                .map(|c| {
                    let mut v: Vec<usize> = c.into_iter().map(map).collect();
                    v.sort_unstable();
                    v
                })
                .collect();
            sets.sort();
            sets
        };
        let a = canon(sorted_clusters(points.clone(), 0.5, 1, 10_000), &|i| i);
        let b = canon(sorted_clusters(shuffled, 0.5, 1, 10_000), &|i| order[i]);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn strong_signals_are_never_excluded(
        az in 0.0..360.0f64, el in 1.0..90.0f64, snr_above in 0.001..20.0f64,
        az_e in 0.0..360.0f64, span in 20.0..160.0f64, el_e in 5.0..60.0f64, el_f in 5.0..60.0f64,
    ) {
        let cfg = ExclusionConfig::default();
        let b = sky(az_e, el_e, az_e + span, el_f);
        let d = is_blocked("G01", &AzEl::new(az, el), cfg.snr_threshold + snr_above, &b, &cfg);
        prop_assert_eq!(d.verdict, Verdict::Kept);
        prop_assert_eq!(d.reason, Reason::HighSnrGuard);
    }

    #[test]
    fn exclusions_pass_every_guard(
        az in 0.0..360.0f64, el in 1.0..90.0f64, snr in 10.0..45.0f64,
        az_e in 0.0..360.0f64, span in 20.0..160.0f64, el_e in 5.0..60.0f64, el_f in 5.0..60.0f64,
    ) {
        let cfg = ExclusionConfig::default();
        let b = sky(az_e, el_e, az_e + span, el_f);
        let d = is_blocked("G01", &AzEl::new(az, el), snr, &b, &cfg);
        if d.verdict == Verdict::Excluded {
            prop_assert!(d.theta1 >= cfg.theta_thres && d.theta2 >= cfg.theta_thres);
            prop_assert!(d.delta_s > cfg.s_threshold);
            prop_assert!(snr <= cfg.snr_threshold);
        }
    }

    #[test]
    fn more_boundaries_never_add_survivors(
        sats in prop::collection::vec((0.0..360.0f64, 1.0..90.0f64, 15.0..50.0f64), 1..15),
        bounds in prop::collection::vec((0.0..360.0f64, 20.0..160.0f64, 5.0..60.0f64, 5.0..60.0f64), 0..4),
    ) {
        let cfg = ExclusionConfig::default();
        let sats: Vec<SkySat> = sats
            .into_iter()
            .enumerate()
            .map(|(i, (az, el, snr))| SkySat { prn: format!("G{i:02}"), az_el: AzEl::new(az, el), snr })
            .collect();
        let bounds: Vec<SkyBoundary> = bounds.into_iter().map(|(a, s, e1, e2)| sky(a, e1, a + s, e2)).collect();
        let mut previous = sats.len();
        for k in 0..=bounds.len() {
            let out = exclude_nlos(&sats, &bounds[..k], &cfg);
            prop_assert_eq!(out.decisions.len(), sats.len());
            for (i, d) in out.decisions.iter().enumerate() {
                prop_assert_eq!(d.verdict == Verdict::Kept, out.survivors.contains(&i));
            }
            prop_assert!(out.survivors.len() <= previous);
            previous = out.survivors.len();
        }
    }

    #[test]
    fn heading_only_rotates_projected_azimuths(
        ex in -15.0..15.0f64, ey in 2.0..15.0f64, len in 3.0..13.0f64, z in 0.5..4.0f64, heading in -360.0..360.0f64,
    ) {
        let b = BusBoundary3D { e: Point3::new(ex, ey, z), f: Point3::new(ex + len, ey, z) };
        let base = project_boundary(&b, &Point3::ORIGIN, 0.0).unwrap();
        let turned = project_boundary(&b, &Point3::ORIGIN, heading).unwrap();
        let close = |a: f64, b: f64| {
            let d = wrap_360(a - b);
            d.min(360.0 - d) < 1e-9
        };
        prop_assert!(close(turned.az_e, base.az_e + heading));
        prop_assert!(close(turned.az_f, base.az_f + heading));
        prop_assert!((turned.el_e - base.el_e).abs() < 1e-12);
        prop_assert!((turned.el_f - base.el_f).abs() < 1e-12);
    }

    #[test]
    fn variance_factor_grows_as_snr_and_elevation_drop(
        el in 1.0..90.0f64, del in 0.0..30.0f64, snr in 10.0..45.0f64, dsnr in 0.0..10.0f64,
    ) {
        let p = WeightParams::default();
        let f = snr_elevation_weight(el, snr, &p).unwrap();
        prop_assert!(f >= 1.0 - 1e-12);
        let weaker = snr_elevation_weight(el, (snr - dsnr).max(p.f), &p).unwrap();
        prop_assert!(weaker >= f * (1.0 - 1e-12));
        let lower = snr_elevation_weight((el - del).max(0.5), snr, &p).unwrap();
        prop_assert!(lower >= f * (1.0 - 1e-12));
    }

    #[test]
    fn noiseless_open_sky_epochs_are_solved_exactly(
        sats in prop::collection::vec((0.0..360.0f64, 21.0..85.0f64, 30.0..50.0f64), 6..12),
        gps_clock in -300.0..300.0f64, bds_clock in -300.0..300.0f64, seed in any::<u64>(),
    ) {
        let mut specs: Vec<serde_json::Value> = sats
            .iter()
            .enumerate()
            .map(|(i, &(az, el, snr))| json!({"prn": format!("G{:02}", i + 1), "system": "GPS",
                "azimuth_deg": az, "elevation_deg": el, "snr_dbhz": snr}))
            .collect();
        specs.push(json!({"prn": "C20", "system": "BDS", "azimuth_deg": 0.0, "elevation_deg": 88.0, "snr_dbhz": 45.0}));
        specs.push(json!({"prn": "C21", "system": "BDS", "azimuth_deg": 200.0, "elevation_deg": 40.0, "snr_dbhz": 45.0}));
        let scenario = Scenario::from_json(&json!({
            "satellites": specs,
            "clock_bias_m": {"GPS": gps_clock, "BDS": bds_clock},
            "noise_sigma_m": 0.0,
            "seed": seed,
        }).to_string()).unwrap();
        let run = busnlos::run_scenario(&scenario, 1, &busnlos::RunConfig::default()).unwrap();
        // Random layouts can be nearly degenerate; only judge well-conditioned ones.
        if let Some(ls) = run.results[0].solution(Method::Ls) {
            prop_assume!(ls.hdop < 20.0);
            for m in [Method::Ls, Method::LsEsf, Method::WlsEsf, Method::WlsEsfNe] {
                let err = run.results[0].error_3d(m).unwrap();
                prop_assert!(err < 1e-4, "{:?} error {}", m, err);
            }
        }
    }
}
