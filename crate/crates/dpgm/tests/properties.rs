//! Cross-module invariant and property tests.

use dpgm::cutting_plane::{analytic_centre, estimate_volume_fraction, CutRegion, Halfspace};
use dpgm::dpgd::{localization, LocalizationConfig};
use dpgm::geometry::{
    gm_objective, gm_subgradient, quantile_radius, weiszfeld_gm, Ball, Dataset,
};
use dpgm::inverse_sensitivity::{len_at, LenMode};
use dpgm::linalg::{dist, norm, sub, zeros};
use dpgm::privacy::{
    above_threshold, approx_dp_from_zcdp, laplace_scalar, zcdp_from_approx_dp, ApproxDpBudget,
    NoiseRng, RngSeed, ZcdpBudget,
};
use dpgm::radius::{neighbor_counts, radius_finder, top_m_average, RadiusFinderConfig};
use proptest::prelude::*;

fn rng(seed: u64) -> NoiseRng {
    NoiseRng::new(RngSeed::new(seed))
}

fn random_dataset(r: &mut NoiseRng, n: usize, d: usize, scale: f64) -> Dataset {
    let pts = (0..n)
        .map(|_| (0..d).map(|_| scale * (2.0 * r.uniform() - 1.0)).collect())
        .collect();
    Dataset::new(pts).unwrap()
}

#[test]
fn subgradient_matches_central_differences() {
    let mut r = rng(101);
    let mut checked = 0;
    while checked < 100 {
        let d = 1 + (r.uniform() * 5.0) as usize;
        let n = 2 + (r.uniform() * 20.0) as usize;
        let data = random_dataset(&mut r, n, d, 5.0);
        let theta: Vec<f64> = (0..d).map(|_| 5.0 * (2.0 * r.uniform() - 1.0)).collect();
        if data.points().iter().any(|x| dist(x, &theta) < 1e-3) {
            continue;
        }
        checked += 1;
        let g = gm_subgradient(&theta, &data).unwrap();
        let h = 1e-6;
        let mut fd = zeros(d);
        for j in 0..d {
            let mut plus = theta.clone();
            plus[j] += h;
            let mut minus = theta.clone();
            minus[j] -= h;
            fd[j] = (gm_objective(&plus, &data).unwrap() - gm_objective(&minus, &data).unwrap())
                / (2.0 * h);
        }
        let rel = dist(&g, &fd) / norm(&g).max(1e-9);
        assert!(rel <= 1e-5, "relative error {rel}");
    }
}

proptest! {
    #[test]
    fn objective_is_convex_along_segments(
        seed in 0u64..500,
        lambda in 0.0f64..=1.0,
    ) {
        let mut r = rng(seed);
        let d = 1 + (r.uniform() * 4.0) as usize;
        let data = random_dataset(&mut r, 8, d, 3.0);
        let a: Vec<f64> = (0..d).map(|_| 6.0 * (r.uniform() - 0.5)).collect();
        let b: Vec<f64> = (0..d).map(|_| 6.0 * (r.uniform() - 0.5)).collect();
        let mid: Vec<f64> = a.iter().zip(&b)
            .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
            .collect();
        let fa = gm_objective(&a, &data).unwrap();
        let fb = gm_objective(&b, &data).unwrap();
        let fm = gm_objective(&mid, &data).unwrap();
        prop_assert!(fm <= lambda * fa + (1.0 - lambda) * fb + 1e-9);
    }

    #[test]
    fn quantile_radius_monotone_in_gamma(seed in 0u64..500, g1 in 0.01f64..1.0, g2 in 0.01f64..1.0) {
        let mut r = rng(seed);
        let data = random_dataset(&mut r, 12, 2, 4.0);
        let theta = vec![r.uniform(), r.uniform()];
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let a = quantile_radius(&data, &theta, lo).unwrap();
        let b = quantile_radius(&data, &theta, hi).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn conversions_are_monotone(e1 in 0.1f64..5.0, e2 in 0.1f64..5.0, d1 in 1e-8f64..0.5, d2 in 1e-8f64..0.5) {
        // rho(eps, delta) increases in eps, decreases in delta.
        let (elo, ehi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let (dlo, dhi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let fixed_delta = 1e-6;
        let a = zcdp_from_approx_dp(ApproxDpBudget::new(elo, fixed_delta).unwrap()).rho();
        let b = zcdp_from_approx_dp(ApproxDpBudget::new(ehi, fixed_delta).unwrap()).rho();
        prop_assert!(a <= b + 1e-15);
        let a = zcdp_from_approx_dp(ApproxDpBudget::new(1.0, dlo).unwrap()).rho();
        let b = zcdp_from_approx_dp(ApproxDpBudget::new(1.0, dhi).unwrap()).rho();
        prop_assert!(a <= b + 1e-15);
        // Reverse direction grows with rho.
        let x = approx_dp_from_zcdp(elo, fixed_delta).unwrap();
        let y = approx_dp_from_zcdp(ehi, fixed_delta).unwrap();
        prop_assert!(x <= y + 1e-15);
    }

    #[test]
    fn above_threshold_noise_off_equals_plain_scan(
        queries in proptest::collection::vec(-10.0f64..10.0, 0..30),
        threshold in -10.0f64..10.0,
        seed in 0u64..100,
    ) {
        let rho = ZcdpBudget::new(1.0).unwrap();
        let mut r = NoiseRng::new_noise_disabled(RngSeed::new(seed));
        let got = above_threshold(&queries, rho, threshold, &mut r).unwrap();
        let expect = queries.iter().position(|&q| q > threshold);
        prop_assert_eq!(got, expect);
    }
}

#[test]
fn weiszfeld_stays_in_convex_hull() {
    // Barycentric containment over all (d+1)-point simplices; some simplex
    // must contain the GM (Caratheodory) when the data is in general position.
    fn in_simplex(theta: &[f64], verts: &[&Vec<f64>], tol: f64) -> bool {
        let d = theta.len();
        // Solve sum lambda_i v_i = theta, sum lambda_i = 1 by Gaussian
        // elimination on the (d+1) x (d+1) system.
        let k = verts.len();
        if k != d + 1 {
            return false;
        }
        let mut a = vec![vec![0.0; k + 1]; d + 1];
        for (j, v) in verts.iter().enumerate() {
            for i in 0..d {
                a[i][j] = v[i];
            }
            a[d][j] = 1.0;
        }
        for i in 0..d {
            a[i][k] = theta[i];
        }
        a[d][k] = 1.0;
        // Elimination with partial pivoting.
        for col in 0..=d {
            let mut piv = col;
            for row in col..=d {
                if a[row][col].abs() > a[piv][col].abs() {
                    piv = row;
                }
            }
            if a[piv][col].abs() < 1e-12 {
                return false;
            }
            a.swap(col, piv);
            for row in 0..=d {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    for c in col..=k {
                        a[row][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..=d).all(|i| a[i][k] / a[i][i] >= -tol)
    }

    let mut r = rng(77);
    for trial in 0..40 {
        let d = 2 + (trial % 2);
        let n = d + 2 + (trial % 3);
        let data = random_dataset(&mut r, n, d, 3.0);
        let theta = weiszfeld_gm(&data, 1e-9, 100_000).unwrap();
        let pts = data.points();
        let diam = {
            let mut best = 0.0f64;
            for i in 0..n {
                for j in i + 1..n {
                    best = best.max(dist(&pts[i], &pts[j]));
                }
            }
            best
        };
        // Enumerate (d+1)-subsets.
        let mut found = false;
        let mut idx: Vec<usize> = (0..=d).collect();
        loop {
            let verts: Vec<&Vec<f64>> = idx.iter().map(|&i| &pts[i]).collect();
            if in_simplex(&theta, &verts, 1e-6 * diam.max(1.0)) {
                found = true;
                break;
            }
            // Next combination.
            let mut i = d as i64;
            while i >= 0 && idx[i as usize] == n - 1 - (d - i as usize) {
                i -= 1;
            }
            if i < 0 {
                break;
            }
            let i = i as usize;
            idx[i] += 1;
            for j in i + 1..=d {
                idx[j] = idx[j - 1] + 1;
            }
        }
        assert!(found, "GM outside every simplex (trial {trial})");
    }
}

#[test]
fn growth_condition_holds() {
    // (2 gamma - 1) ||theta1 - theta0|| - 2 gamma Delta_{gamma n}(theta0)
    // <= (F(theta1) - F(theta0)) / n, theta0 the GM.
    let mut r = rng(303);
    for _ in 0..500 {
        let d = 1 + (r.uniform() * 3.0) as usize;
        let n = 5 + (r.uniform() * 20.0) as usize;
        let data = random_dataset(&mut r, n, d, 5.0);
        let theta0 = weiszfeld_gm(&data, 1e-10, 100_000).unwrap();
        let f0 = gm_objective(&theta0, &data).unwrap();
        let theta1: Vec<f64> = (0..d).map(|_| 20.0 * (r.uniform() - 0.5)).collect();
        let f1 = gm_objective(&theta1, &data).unwrap();
        let zeta = (f1 - f0) / n as f64;
        for gamma in [0.6, 0.75, 0.9] {
            let delta = quantile_radius(&data, &theta0, gamma).unwrap();
            let lhs = (2.0 * gamma - 1.0) * dist(&theta1, &theta0) - 2.0 * gamma * delta;
            assert!(lhs <= zeta + 1e-9, "gamma {gamma}: lhs {lhs} > zeta {zeta}");
        }
    }
}

#[test]
fn laplace_mechanism_empirical_dp() {
    // Counting query with sensitivity 1 at epsilon = 1: neighboring outputs'
    // histogram ratio stays below e * 1.1 on well-populated bins.
    let eps = 1.0;
    let samples = 100_000;
    let bin = |x: f64| (x / 0.25).floor() as i64;
    let mut h0 = std::collections::HashMap::new();
    let mut h1 = std::collections::HashMap::new();
    let mut r0 = rng(404);
    let mut r1 = rng(405);
    for _ in 0..samples {
        *h0.entry(bin(10.0 + laplace_scalar(1.0 / eps, &mut r0).unwrap()))
            .or_insert(0usize) += 1;
        *h1.entry(bin(11.0 + laplace_scalar(1.0 / eps, &mut r1).unwrap()))
            .or_insert(0usize) += 1;
    }
    for (b, &c0) in &h0 {
        if c0 < 500 {
            continue;
        }
        let c1 = *h1.get(b).unwrap_or(&0);
        if c1 < 500 {
            continue;
        }
        let ratio = c0 as f64 / c1 as f64;
        let bound = eps.exp() * 1.1;
        assert!(
            ratio <= bound && 1.0 / ratio <= bound,
            "bin {b}: ratio {ratio}"
        );
    }
}

#[test]
fn averaged_neighbor_count_has_sensitivity_three() {
    let mut r = rng(505);
    for _ in 0..200 {
        let n = 6 + (r.uniform() * 20.0) as usize;
        let data = random_dataset(&mut r, n, 2, 5.0);
        // Neighbor: replace one point.
        let mut pts = data.points().to_vec();
        let idx = (r.uniform() * n as f64) as usize % n;
        pts[idx] = vec![5.0 * (2.0 * r.uniform() - 1.0), 5.0 * (2.0 * r.uniform() - 1.0)];
        let neighbor = Dataset::new(pts).unwrap();
        let m = (0.75 * n as f64).ceil() as usize;
        for _ in 0..20 {
            let nu = 12.0 * r.uniform();
            let a = top_m_average(&neighbor_counts(&data, nu).unwrap(), m).unwrap();
            let b = top_m_average(&neighbor_counts(&neighbor, nu).unwrap(), m).unwrap();
            assert!((a - b).abs() <= 3.0 + 1e-12, "|{a} - {b}| > 3 at nu {nu}");
        }
    }
}

#[test]
fn radius_estimate_quantile_sandwich() {
    // Noise-off estimates nu_hat satisfying the scan conditions obey
    // Delta(2g-1)/(4g-1) <= nu_hat <= 4 Delta at gamma = 3/4 around the GM.
    let gamma = 0.75;
    let mut r = rng(606);
    let mut found_any = false;
    for trial in 0..30 {
        let n = 400;
        // Mixed cluster + spread data.
        let mut pts = Vec::new();
        for _ in 0..(3 * n / 4 + 10) {
            pts.push(vec![
                1.0 + 0.3 * (r.uniform() - 0.5),
                -0.5 + 0.3 * (r.uniform() - 0.5),
            ]);
        }
        while pts.len() < n {
            pts.push(vec![
                40.0 * (2.0 * r.uniform() - 1.0),
                40.0 * (2.0 * r.uniform() - 1.0),
            ]);
        }
        let data = Dataset::new(pts).unwrap();
        let cfg = RadiusFinderConfig::new(
            gamma,
            ZcdpBudget::new(50.0).unwrap(),
            0.1,
            0.05,
            50.0,
        )
        .unwrap();
        let mut nr = NoiseRng::new_noise_disabled(RngSeed::new(trial));
        let est = radius_finder(&data, &cfg, &mut nr).unwrap();
        let Some(nu_hat) = est.value() else { continue };
        let m = (gamma * n as f64).ceil() as usize;
        let count_at = |nu: f64| {
            top_m_average(&neighbor_counts(&data, nu).unwrap(), m).unwrap()
        };
        if count_at(nu_hat) < m as f64 || count_at(nu_hat / 2.0) >= m as f64 {
            continue;
        }
        found_any = true;
        let star = weiszfeld_gm(&data, 1e-9, 100_000).unwrap();
        let delta = quantile_radius(&data, &star, gamma).unwrap();
        let lower = delta * (2.0 * gamma - 1.0) / (4.0 * gamma - 1.0);
        let upper = 4.0 * delta;
        assert!(
            lower <= nu_hat + 1e-12 && nu_hat <= upper + 1e-12,
            "trial {trial}: nu_hat {nu_hat} outside [{lower}, {upper}]"
        );
    }
    assert!(found_any, "no trial produced a checkable estimate");
}

#[test]
fn len_has_replacement_sensitivity_one() {
    let mut r = rng(707);
    for _ in 0..100 {
        let n = 4 + (r.uniform() * 5.0) as usize;
        let data = random_dataset(&mut r, n, 2, 2.0);
        let theta = vec![2.0 * (r.uniform() - 0.5), 2.0 * (r.uniform() - 0.5)];
        let base = len_at(&data, &theta, LenMode::Exact).unwrap();
        for idx in 0..n {
            let mut pts = data.points().to_vec();
            pts[idx] = vec![2.0 * (r.uniform() - 0.5), 2.0 * (r.uniform() - 0.5)];
            let neighbor = Dataset::new(pts).unwrap();
            let other = len_at(&neighbor, &theta, LenMode::Exact).unwrap();
            assert!(
                (base as i64 - other as i64).abs() <= 1,
                "len jump {base} -> {other}"
            );
        }
    }
}

#[test]
fn analytic_centre_cuts_remove_quarter_of_volume() {
    // Through-centre cuts drop at least tau = 0.25 of the region's volume in
    // at least 95% of random cut sequences at d in {2, 3}.
    let mut r = rng(808);
    let mut total = 0;
    let mut good = 0;
    for trial in 0..50 {
        let d = 2 + (trial % 2);
        let mut region = CutRegion::new(Ball::new(zeros(d), 1.0).unwrap());
        for _ in 0..4 {
            let centre = match analytic_centre(&region, 1e-9) {
                Ok(c) => c,
                Err(_) => break,
            };
            let mut normal: Vec<f64> = (0..d).map(|_| r.standard_normal()).collect();
            let nn = norm(&normal);
            for x in normal.iter_mut() {
                *x /= nn;
            }
            let offset = normal.iter().zip(&centre).map(|(a, b)| a * b).sum();
            let cut = Halfspace { normal, offset };
            let frac = match estimate_volume_fraction(&region, &cut, 60_000, &mut r) {
                Ok(f) => f,
                Err(_) => break,
            };
            total += 1;
            // Retained side keeps `frac`; the cut removes 1 - frac.
            if frac <= 0.75 + 0.02 {
                good += 1;
            }
            region.cuts.push(cut);
        }
    }
    assert!(total >= 150, "too few cuts measured: {total}");
    assert!(
        good as f64 >= 0.95 * total as f64,
        "volume reduction held in {good}/{total} cuts"
    );
}

#[test]
fn exp_mech_neighboring_probability_ratio() {
    // Candidates confined to a radius-25*delta ball keep the closed-form
    // selection probabilities within e^eps of each other across neighboring
    // datasets; spot-check one pair empirically.
    let eps = 1.0;
    let delta_hat = 1.0;
    let mut r = rng(909);
    let probs = |data: &Dataset, cands: &[Vec<f64>]| -> Vec<f64> {
        let exps: Vec<f64> = cands
            .iter()
            .map(|c| -eps * gm_objective(c, data).unwrap() / (448.0 * delta_hat))
            .collect();
        let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ws: Vec<f64> = exps.iter().map(|e| (e - max).exp()).collect();
        let z: f64 = ws.iter().sum();
        ws.into_iter().map(|w| w / z).collect()
    };
    for _ in 0..100 {
        let n = 10 + (r.uniform() * 20.0) as usize;
        let data = random_dataset(&mut r, n, 2, 100.0);
        let mut pts = data.points().to_vec();
        let idx = (r.uniform() * n as f64) as usize % n;
        pts[idx] = vec![100.0 * (2.0 * r.uniform() - 1.0), 100.0 * (2.0 * r.uniform() - 1.0)];
        let neighbor = Dataset::new(pts).unwrap();
        let centre = vec![10.0 * (r.uniform() - 0.5), 10.0 * (r.uniform() - 0.5)];
        let cands: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut dir = vec![r.standard_normal(), r.standard_normal()];
                let dn = norm(&dir);
                let rad = 25.0 * delta_hat * r.uniform();
                for x in dir.iter_mut() {
                    *x *= rad / dn;
                }
                vec![centre[0] + dir[0], centre[1] + dir[1]]
            })
            .collect();
        let pa = probs(&data, &cands);
        let pb = probs(&neighbor, &cands);
        for (x, y) in pa.iter().zip(&pb) {
            let log_ratio = (x / y).ln().abs();
            assert!(log_ratio <= eps + 0.1, "log ratio {log_ratio}");
        }
    }

    // Empirical confirmation on one fixed pair.
    let data = Dataset::new(vec![vec![3.0, 0.0]; 12]).unwrap();
    let mut pts = data.points().to_vec();
    pts[0] = vec![-50.0, 2.0];
    let neighbor = Dataset::new(pts).unwrap();
    let cands = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]];
    let draws = 100_000;
    let mut ca = [0usize; 3];
    let mut cb = [0usize; 3];
    let mut ra = rng(910);
    let mut rb = rng(911);
    for _ in 0..draws {
        ca[dpgm::cutting_plane::exp_mech_select(&cands, &data, eps, delta_hat, &mut ra).unwrap()] +=
            1;
        cb[dpgm::cutting_plane::exp_mech_select(&cands, &neighbor, eps, delta_hat, &mut rb)
            .unwrap()] += 1;
    }
    for i in 0..3 {
        let ratio = (ca[i].max(1) as f64) / (cb[i].max(1) as f64);
        assert!(ratio.ln().abs() <= eps + 0.1, "index {i}: ratio {ratio}");
    }
}

#[test]
fn localization_budget_trace_always_sums_to_input() {
    for seed in 0..10u64 {
        let mut r = rng(1000 + seed);
        let mut pts = Vec::new();
        for _ in 0..450 {
            pts.push(vec![
                30.0 + 0.2 * (r.uniform() - 0.5),
                0.2 * (r.uniform() - 0.5),
            ]);
        }
        for _ in 0..50 {
            pts.push(vec![
                100.0 * (2.0 * r.uniform() - 1.0) / 2.0_f64.sqrt(),
                100.0 * (2.0 * r.uniform() - 1.0) / 2.0_f64.sqrt(),
            ]);
        }
        let data = Dataset::new(pts).unwrap();
        let rho = 2.0;
        let cfg = LocalizationConfig::new(ZcdpBudget::new(rho).unwrap(), 0.05, 0.1, 100.0)
            .unwrap()
            .with_t_wu(50);
        let mut nr = NoiseRng::new(RngSeed::new(seed));
        let out = localization(&data, &cfg, &mut nr).unwrap();
        if !out.failed {
            let total: f64 = out.trace.iter().map(|(_, v)| v).sum();
            assert!((total - rho).abs() < 1e-12, "trace total {total}");
        }
    }
}

#[test]
fn dataset_vectors_survive_projection_feasibility() {
    // Projection output is always feasible for both balls within tolerance.
    let mut r = rng(1111);
    for _ in 0..200 {
        let d = 1 + (r.uniform() * 4.0) as usize;
        let c1: Vec<f64> = (0..d).map(|_| 4.0 * (r.uniform() - 0.5)).collect();
        let c2: Vec<f64> = (0..d).map(|_| 4.0 * (r.uniform() - 0.5)).collect();
        let r1 = 1.0 + 3.0 * r.uniform();
        let gap = dist(&c1, &c2);
        let r2 = (gap - r1 + 0.5).max(0.5) + 3.0 * r.uniform();
        let outer = Ball::new(c1, r1).unwrap();
        let inner = Ball::new(c2, r2).unwrap();
        let p: Vec<f64> = (0..d).map(|_| 20.0 * (r.uniform() - 0.5)).collect();
        let tol = 1e-9;
        let proj = dpgm::geometry::project_ball_intersection(&p, &outer, &inner, tol).unwrap();
        assert!(outer.contains(&proj, 1e-6), "outer violated");
        assert!(inner.contains(&proj, 1e-6), "inner violated");
        // Idempotence up to tolerance.
        let again =
            dpgm::geometry::project_ball_intersection(&proj, &outer, &inner, tol).unwrap();
        assert!(dist(&proj, &again) <= 1e-6, "projection not idempotent");
    }
}

#[test]
fn subgradient_norm_is_bounded_by_n() {
    let mut r = rng(1212);
    for _ in 0..100 {
        let d = 1 + (r.uniform() * 5.0) as usize;
        let n = 1 + (r.uniform() * 30.0) as usize;
        let data = random_dataset(&mut r, n, d, 5.0);
        let theta: Vec<f64> = (0..d).map(|_| 10.0 * (r.uniform() - 0.5)).collect();
        let g = gm_subgradient(&theta, &data).unwrap();
        assert!(norm(&g) <= n as f64 + 1e-9);
        let _ = sub(&theta, &theta);
    }
}
