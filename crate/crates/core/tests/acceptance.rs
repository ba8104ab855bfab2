//! Acceptance gate. Runs every criterion, prints one `PASS`/`FAIL` line for
//! each, and exits non-zero if any failed.

use cmdfa_core::dominant::{self, bounds, quadratic_roots, stationarity_residual};
use cmdfa_core::info::{mutual_info, sweep_theta1, RowStatus};
use cmdfa_core::nondominant::{build_certificate, choose_signs};
use cmdfa_core::verify::{
    brute_force_oracle, check_certificate, sym_eigenvalues, verify_solution, CertTolerances,
};
use cmdfa_core::{
    build_covariance, canonicalize, classify, data, default_eps_class, solve, Regime, SolveOptions,
    StarCovariance, StarModel,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::ExitCode;

fn report(id: u32, name: &str, ok: bool, detail: String) -> bool {
    println!(
        "{} [{id}] {name}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn random_alpha(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mag = rng.random_range(lo..hi);
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

fn regime_of(alpha: &[f64]) -> Regime {
    let m = canonicalize(alpha).unwrap();
    classify(&m, default_eps_class(&m)).regime
}

fn criterion_1_nondominant_exactness() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let opts = SolveOptions::default();
    let tols = CertTolerances::default();
    let (mut worst_eig, mut worst_row, mut worst_null) = (0.0f64, 0.0f64, 0.0f64);
    let mut exact = true;
    let mut passed = true;
    let mut count = 0;
    while count < 100 {
        let n = rng.random_range(3..=8);
        let alpha = random_alpha(&mut rng, n, 0.05, 0.95);
        if regime_of(&alpha) != Regime::NonDominant {
            continue;
        }
        count += 1;
        let m = canonicalize(&alpha).unwrap();
        let sol = solve(&m, &opts).unwrap();
        exact &= sol.d.iter().zip(&alpha).all(|(d, a)| *d == 1.0 - a * a);
        let cert = verify_solution(&sol, &tols).unwrap();
        passed &= cert.passed;
        worst_eig = worst_eig.max(cert.lambda_min.abs());
        worst_row = worst_row.max(cert.max_row_residual());
        worst_null = worst_null.max(cert.nullspace_residual);
    }
    let ok = exact && passed && worst_eig <= 1e-10 && worst_row <= 1e-10 && worst_null <= 1e-9;
    report(
        1,
        "non-dominant exactness",
        ok,
        format!("100 instances, D exact={exact}, max|λmin|={worst_eig:.2e}, max row={worst_row:.2e}, max null={worst_null:.2e}"),
    )
}

fn criterion_2_sign_construction_repair() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let tols = CertTolerances::default();
    let mut unbalanced = 0;
    let mut ok = true;
    let mut count = 0;
    while count < 100 {
        let n = rng.random_range(3..=7);
        let mut theta: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.5)).collect();
        theta.sort_by(|a, b| b.total_cmp(a));
        let rest: f64 = theta[1..].iter().sum();
        if theta[0] >= rest {
            continue;
        }
        count += 1;
        let rest_sq: f64 = theta[1..].iter().map(|t| t * t).sum();
        if theta[0] * theta[0] < rest_sq {
            unbalanced += 1;
        }
        let m = StarModel::from_theta(&theta).unwrap();
        let signs = choose_signs(&m.theta).unwrap();
        ok &= (0.0..=1.0).contains(&signs.beta_nn);
        let t = build_certificate(&m, &signs).unwrap();
        let d: Vec<f64> = m.alpha.iter().map(|a| 1.0 - a * a).collect();
        let cov = StarCovariance::from_alpha(&m.alpha);
        ok &= check_certificate(&cov, &d, &t, &tols).unwrap().passed;
    }
    let eq = canonicalize(&[0.5, 0.5, 0.5]).unwrap();
    let eq_signs = choose_signs(&eq.theta).unwrap();
    let eq_ok = (eq_signs.beta_nn - 0.5).abs() <= 1e-12 && eq_signs.theta_signs == vec![1.0, -1.0];
    let eq_cert = build_certificate(&eq, &eq_signs).unwrap();
    let eq_pass = check_certificate(&build_covariance(&eq), &[0.75; 3], &eq_cert, &tols)
        .unwrap()
        .passed;
    report(
        2,
        "sign-construction repair",
        ok && eq_ok && eq_pass && unbalanced > 0,
        format!(
            "100 instances ({unbalanced} with θ1² < Σθi²), all β_nn in [0,1] = {ok}; equal loadings β_nn = {:.6}",
            eq_signs.beta_nn
        ),
    )
}

fn criterion_3_dominant_closed_form_anchor() -> bool {
    let m = canonicalize(&[0.8, 0.3]).unwrap();
    let sol = solve(&m, &SolveOptions::default()).unwrap();
    let aux = sol.dominant.as_ref().unwrap();
    let x1_err = (aux.x1_star - 1.4).abs();
    let d_err = sol.d.iter().map(|d| (d - 0.76).abs()).fold(0.0, f64::max);
    let resid = stationarity_residual(&m.alpha_sq(), &aux.a).abs();
    let i_cmdfa = mutual_info(&build_covariance(&m), &sol.d).unwrap();
    // bivariate Wyner common information at correlation 0.24
    let wyner = 0.5 * (1.24f64 / 0.76).ln();
    let reference = 0.244900;
    let ok = x1_err <= 1e-9 && d_err <= 1e-9 && resid <= 1e-10 && (i_cmdfa - wyner).abs() <= 1e-5;
    report(
        3,
        "dominant closed-form anchor",
        ok,
        format!(
            "|X1*-1.4|={x1_err:.1e}, |D-0.76|={d_err:.1e}, residual={resid:.1e}, I={i_cmdfa:.6} vs ½ln(1.24/0.76)={wyner:.6} (reference value {reference} differs by {:.1e})",
            (i_cmdfa - reference).abs()
        ),
    )
}

fn criterion_4_dominant_generic() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut worst_resid, mut worst_eig, mut min_second, mut worst_quad) =
        (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    let mut bracketed = true;
    let mut count = 0;
    while count < 50 {
        let alpha = random_alpha(&mut rng, 3, 0.05, 0.95);
        if regime_of(&alpha) != Regime::Dominant {
            continue;
        }
        count += 1;
        let m = canonicalize(&alpha).unwrap();
        let sol = solve(&m, &SolveOptions::default()).unwrap();
        assert!(!sol.near_boundary);
        let aux = sol.dominant.as_ref().unwrap();
        worst_resid = worst_resid.max(stationarity_residual(&m.alpha_sq(), &aux.a).abs());
        let ev = sym_eigenvalues(&sol.sigma_t).unwrap();
        worst_eig = worst_eig.max(ev[0].abs());
        min_second = min_second.min(ev[1]);
        let b = bounds(&m.theta).unwrap();
        bracketed &= b.x1_low <= aux.x1_star && aux.x1_star <= b.x1_up;
        for (i, al) in m.alpha_sq().iter().enumerate() {
            let (left, right) = quadratic_roots(*al, aux.mu_sq);
            let root = if i == 0 { left } else { right };
            worst_quad = worst_quad.max((root - aux.a[i]).abs());
        }
    }
    let ok = worst_resid <= 1e-8
        && worst_eig <= 1e-8
        && min_second > 1e-4
        && bracketed
        && worst_quad <= 1e-10;
    report(
        4,
        "dominant generic (n=3)",
        ok,
        format!("50 instances, max residual={worst_resid:.1e}, max|λmin|={worst_eig:.1e}, min λ2={min_second:.2e}, bracketed={bracketed}, max quad diff={worst_quad:.1e}"),
    )
}

fn criterion_5_oracle_equivalence() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut dominant, mut nondominant) = (0, 0);
    let mut worst_d = 0.0f64;
    let mut worst_beat = f64::NEG_INFINITY;
    let mut ok = true;
    while dominant + nondominant < 20 {
        let n = rng.random_range(2..=3);
        let alpha = random_alpha(&mut rng, n, 0.1, 0.95);
        let regime = regime_of(&alpha);
        // balance the two regimes
        match regime {
            Regime::Dominant if dominant < 10 => dominant += 1,
            Regime::NonDominant if nondominant < 10 => nondominant += 1,
            _ => continue,
        }
        let m = canonicalize(&alpha).unwrap();
        let sol = solve(&m, &SolveOptions::default()).unwrap();
        let cov = build_covariance(&m);
        let oracle = brute_force_oracle(&cov, 0.02, 3).unwrap();
        let diff = oracle
            .d
            .iter()
            .zip(&sol.d)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let analytic_obj: f64 = -sol.d.iter().map(|d| d.ln()).sum::<f64>();
        let beat = analytic_obj - oracle.objective;
        worst_d = worst_d.max(diff);
        worst_beat = worst_beat.max(beat);
        ok &= diff <= 1e-3 && beat <= oracle.final_step;
    }
    report(
        5,
        "oracle equivalence",
        ok,
        format!("20 instances ({dominant} dominant), max |D_oracle - D|={worst_d:.1e}, max objective advantage of oracle={worst_beat:.1e}"),
    )
}

fn criterion_6_sweep_trends() -> bool {
    let rest = [0.314485, 0.314485];
    let grid: Vec<f64> = (0..=12).map(|k| 0.8 + 0.1 * k as f64).collect();
    let rows = sweep_theta1(&rest, &grid, &SolveOptions::default());
    let all_ok = rows.len() == 13 && rows.iter().all(|r| r.status == RowStatus::Ok);
    let reports: Vec<_> = rows.iter().filter_map(|r| r.report).collect();
    let up_gap_inc = reports
        .windows(2)
        .all(|w| w[1].gaps.star_minus_up > w[0].gaps.star_minus_up);
    let spread_inc = reports
        .windows(2)
        .all(|w| w[1].i_up - w[1].i_low > w[0].i_up - w[0].i_low);
    let below_star = reports.iter().all(|r| r.i_cmdfa < r.i_star);
    let first = reports.first().unwrap();
    let last = reports.last().unwrap();
    report(
        6,
        "theta1 sweep trends",
        all_ok && up_gap_inc && spread_inc && below_star,
        format!(
            "13 rows; I*-Iup {:.4}->{:.4} increasing={up_gap_inc}; Iup-Ilow {:.4}->{:.4} increasing={spread_inc}; Icmdfa<I* everywhere={below_star}",
            first.gaps.star_minus_up,
            last.gaps.star_minus_up,
            first.i_up - first.i_low,
            last.i_up - last.i_low
        ),
    )
}

fn criterion_7_boundary_continuity() -> bool {
    let mut ok = true;
    let mut details = Vec::new();
    for rest in [vec![0.314485, 0.314485], vec![0.6, 0.3, 0.2]] {
        let sum: f64 = rest.iter().sum();
        let mut prev = f64::INFINITY;
        let mut gaps = Vec::new();
        for delta in [1e-2, 1e-3, 1e-4] {
            let mut theta = vec![(1.0 + delta) * sum];
            theta.extend(&rest);
            let m = StarModel::from_theta(&theta).unwrap();
            let sol = dominant::solve_dominant(&m, 1e-12).unwrap();
            let aux = sol.dominant.unwrap();
            let gap = aux
                .a
                .iter()
                .zip(m.alpha_sq())
                .map(|(a, al)| (a - al).abs())
                .fold(0.0, f64::max);
            ok &= gap < prev;
            prev = gap;
            gaps.push(format!("{gap:.2e}"));
        }
        let mut theta = vec![sum];
        theta.extend(&rest);
        let m = StarModel::from_theta(&theta).unwrap();
        let sol = solve(&m, &SolveOptions::default()).unwrap();
        let cert = verify_solution(&sol, &CertTolerances::default()).unwrap();
        ok &= sol.regime() == Regime::Boundary && sol.certificate.cols() == 1 && cert.passed;
        details.push(format!(
            "n={}: max|a-α²| = [{}], boundary columns={} passed={}",
            theta.len(),
            gaps.join(", "),
            sol.certificate.cols(),
            cert.passed
        ));
    }
    report(7, "boundary continuity", ok, details.join("; "))
}

fn criterion_8_invariance() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let opts = SolveOptions::default();
    let mut worst = 0.0f64;
    let mut regimes = [0usize; 2];
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let alpha = random_alpha(&mut rng, n, 0.05, 0.95);
        let base = solve(&canonicalize(&alpha).unwrap(), &opts).unwrap();
        regimes[usize::from(base.regime() == Regime::Dominant)] += 1;

        let flipped: Vec<f64> = alpha
            .iter()
            .map(|a| if rng.random_bool(0.5) { -a } else { *a })
            .collect();
        let s = solve(&canonicalize(&flipped).unwrap(), &opts).unwrap();
        for (x, y) in s.d.iter().zip(&base.d) {
            worst = worst.max((x - y).abs());
        }
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((s.sigma_t[(i, j)].abs() - base.sigma_t[(i, j)].abs()).abs());
            }
        }

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<f64> = perm.iter().map(|&k| alpha[k]).collect();
        let p = solve(&canonicalize(&permuted).unwrap(), &opts).unwrap();
        for (slot, &k) in perm.iter().enumerate() {
            worst = worst.max((p.d[slot] - base.d[k]).abs());
        }
    }
    report(
        8,
        "sign-flip and permutation invariance",
        worst <= 1e-12,
        format!(
            "50 instances ({} non-dominant, {} dominant), max deviation={worst:.1e}",
            regimes[0], regimes[1]
        ),
    )
}

fn criterion_9_monte_carlo_round_trip() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut seed = 1000u64;
    while count < 10 {
        let n = rng.random_range(3..=5);
        let alpha = random_alpha(&mut rng, n, 0.3, 0.85);
        let m = canonicalize(&alpha).unwrap();
        if (m.margin().abs() / m.theta[0]) <= 0.1 {
            continue;
        }
        count += 1;
        seed += 1;
        let truth = classify(&m, default_eps_class(&m)).regime;
        let batch = data::sample(&m, 100_000, seed).unwrap();
        let est = data::estimate_alpha(&data::empirical_covariance(&batch.samples)).unwrap();
        let got = classify(&est.model, default_eps_class(&est.model)).regime;
        // the estimator fixes the first loading positive
        let flip = alpha[0].signum();
        let err = est
            .alpha
            .iter()
            .zip(&alpha)
            .map(|(e, a)| (e - flip * a).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        ok &= got == truth && err <= 0.03;
    }
    report(
        9,
        "Monte-Carlo round trip",
        ok,
        format!("10 instances at m=1e5, classes agree={ok}, max |α̂-α|={worst:.4}"),
    )
}

fn main() -> ExitCode {
    let criteria: [fn() -> bool; 9] = [
        criterion_1_nondominant_exactness,
        criterion_2_sign_construction_repair,
        criterion_3_dominant_closed_form_anchor,
        criterion_4_dominant_generic,
        criterion_5_oracle_equivalence,
        criterion_6_sweep_trends,
        criterion_7_boundary_continuity,
        criterion_8_invariance,
        criterion_9_monte_carlo_round_trip,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
