//! Acceptance criteria. Each criterion prints one `PASS`/`FAIL` line with
//! its measured statistic and runtime; the process fails if any criterion
//! does.

use std::time::{Duration, Instant};

use dp_residual::cli::config::FigureConfig;
use dp_residual::cli::figures::{fig3, fig5, fig6};
use dp_residual::detection::{monte_carlo_rates, monte_carlo_validate, TestSpec};
use dp_residual::estimation::{
    chi_mixture, cumulants, gaussian_law, normalized_wssr, residual_law, wssr, ResidualLaw,
};
use dp_residual::mechanism::{chi_square_release, delta_for_epsilon, leakage, PrivacyParams};
use dp_residual::model::{
    gsp_reduce, neighbor_projection_update, projection_matrix, simulate_measurements,
    stealth_attack, AttackVector, MeasurementModel, NeighborPerturbation,
};
use dp_residual::special::{
    gaussian_cdf, ln_bessel_i, noncentral_chisq_cdf, noncentral_chisq_sample,
};
use dp_residual::stats::{binomial_se, ks_critical_value, ks_statistic, mean_variance};
use dp_residual::SeedStream;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn report(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration, limit: Duration) {
    let ok = pass && elapsed <= limit;
    println!(
        "{} criterion {id} ({name}): {detail}; runtime {:.2}s (limit {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(elapsed <= limit, "criterion {id} exceeded its runtime limit");
}

fn random_state(n: usize, rng: &mut SeedStream) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0))
}

fn random_sparse_attack(m: usize, k: usize, scale: f64, rng: &mut SeedStream) -> AttackVector {
    let mut support: Vec<usize> = Vec::new();
    while support.len() < k {
        let i = rng.random_range(0..m);
        if !support.contains(&i) {
            support.push(i);
        }
    }
    support.sort_unstable();
    let values = (0..k).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    AttackVector::new(m, support, values).unwrap()
}

fn criterion_1_projection_algebra() {
    let t = Instant::now();
    let mut rng = SeedStream::new(101, 0);
    let (mut idem, mut annihilate, mut trace) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let m = rng.random_range(3..=50);
        let n = rng.random_range(1..m);
        let model = MeasurementModel::random(m, n, 1.0, 0.0, &mut rng).unwrap();
        let p = projection_matrix(&model).unwrap().matrix;
        idem = idem.max((&p * &p - &p).amax());
        annihilate = annihilate.max((&p * model.h()).amax());
        trace = trace.max((p.trace() - (m - n) as f64).abs());
    }
    let pass = idem <= 1e-10 && annihilate <= 1e-10 && trace <= 1e-8;
    let detail = format!(
        "max |P²-P| {idem:.2e} (<=1e-10), max |PH| {annihilate:.2e} (<=1e-10), max |tr P-(m-n)| {trace:.2e} (<=1e-8)"
    );
    report(1, "projection algebra", pass, &detail, t.elapsed(), Duration::from_secs(10));
}

fn criterion_2_wssr_distribution() {
    let t = Instant::now();
    let trials = 100_000;
    let mut rng = SeedStream::new(202, 0);
    let model = MeasurementModel::random(20, 5, 1.0, 0.0, &mut rng).unwrap();
    let x = random_state(5, &mut rng);
    let crit = ks_critical_value(trials, 0.01);
    let mut details = Vec::new();
    let mut pass = true;
    for (name, attack) in [
        ("a=0", AttackVector::zero(20)),
        ("sparse a", random_sparse_attack(20, 3, 3.0, &mut rng)),
    ] {
        let law = residual_law(&model, &x, &attack).unwrap();
        let ResidualLaw::ChiSquare { dof, noncentrality } = law else {
            unreachable!()
        };
        let mut sim = SeedStream::new(202, 1);
        let qs: Vec<f64> = (0..trials)
            .map(|_| wssr(&model, &simulate_measurements(&model, &x, &attack, &mut sim).unwrap()).unwrap())
            .collect();
        let d = ks_statistic(qs, |q| noncentral_chisq_cdf(q, dof, noncentrality).unwrap());
        pass &= dof == 15.0 && d < crit;
        details.push(format!("{name}: dof {dof}, θ² {noncentrality:.3}, KS {d:.5}"));
    }
    let detail = format!("{} (critical {crit:.5} at 1%)", details.join("; "));
    report(2, "WSSR law", pass, &detail, t.elapsed(), Duration::from_secs(30));
}

fn criterion_3_chi_square_mechanism() {
    let t = Instant::now();
    let mut rng = SeedStream::new(303, 0);

    let model = MeasurementModel::random(20, 5, 1.0, 0.0, &mut rng).unwrap();
    let x = random_state(5, &mut rng);
    let attack = AttackVector::new(20, vec![7], vec![3.0]).unwrap();
    let law = residual_law(&model, &x, &attack).unwrap();
    let ResidualLaw::ChiSquare { dof, noncentrality } = law else {
        unreachable!()
    };
    let params = PrivacyParams::chi_square(1.0, 0.1, 2).unwrap();
    let releases = 100_000;
    let mut rel = SeedStream::new(303, 1);
    let samples: Vec<f64> = (0..releases)
        .map(|_| {
            let q = wssr(&model, &simulate_measurements(&model, &x, &attack, &mut rel).unwrap()).unwrap();
            chi_square_release(&law, q, &params, &mut rel).unwrap().value
        })
        .collect();
    let ks = ks_statistic(samples, |v| noncentral_chisq_cdf(v, dof + 2.0, noncentrality).unwrap());
    let crit = ks_critical_value(releases, 0.01);
    let mut pass = ks < crit;

    let draws = 1_000_000;
    let mut worst = f64::INFINITY;
    let mut informative = 0;
    for i in 0..20 {
        let r_tilde = rng.random_range(2..=30) as f64;
        let theta = rng.random_range(0.2..4.0);
        let theta_prime = theta + rng.random_range(0.05..0.6);
        let spread = (r_tilde + theta * theta).sqrt();
        let eps = (theta_prime - theta)
            * ((theta_prime + theta) / 2.0 + rng.random_range(0.0..3.0) * spread);
        let delta = delta_for_epsilon(eps, r_tilde, theta, theta_prime).unwrap();
        let mut s = SeedStream::new(303, 10 + i);
        let inside = (0..draws)
            .filter(|_| {
                let q = noncentral_chisq_sample(r_tilde, theta * theta, &mut s).unwrap();
                leakage(q, r_tilde, theta, theta_prime).unwrap().abs() <= eps
            })
            .count();
        let p = inside as f64 / draws as f64;
        let se = binomial_se(delta.min(1.0), draws);
        let margin = p - (1.0 - delta - 3.0 * se);
        worst = worst.min(margin);
        informative += usize::from(delta < 0.5);
        pass &= margin >= 0.0;
    }
    let detail = format!(
        "release KS {ks:.5} vs {crit:.5}; min over 20 tuples of Pr(|L|<=ε) - (1-δ-3SE) = {worst:.3e} (>=0), {informative} tuples with δ<0.5"
    );
    report(3, "chi-square mechanism", pass, &detail, t.elapsed(), Duration::from_secs(300));
}

fn criterion_4_sherman_morrison_update() {
    let t = Instant::now();
    let mut rng = SeedStream::new(404, 0);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=10);
        let m = rng.random_range(n + 2..=50);
        let model = MeasurementModel::random(m, n, 1.0, 0.0, &mut rng).unwrap();
        let scale: f64 = 10f64.powf(rng.random_range(-3.0..0.0));
        let pert = NeighborPerturbation {
            row_index: rng.random_range(0..m),
            delta_h: DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal)),
        };
        let fast = neighbor_projection_update(&model, &pert).unwrap();
        let direct = projection_matrix(&model.apply_neighbor(&pert).unwrap()).unwrap().matrix;
        worst = worst.max((fast - direct).amax());
    }
    let detail = format!("max entry deviation {worst:.2e} (<=1e-8)");
    report(4, "Sherman-Morrison", worst <= 1e-8, &detail, t.elapsed(), Duration::from_secs(10));
}

fn criterion_5_gaussian_approximation() {
    let t = Instant::now();
    let mut rng = SeedStream::new(505, 0);

    let model = MeasurementModel::random(30, 6, 1.0, 0.5, &mut rng).unwrap();
    let x = random_state(6, &mut rng);
    let zero = AttackVector::zero(30);
    let c = cumulants(&chi_mixture(&model, &x, &zero).unwrap());
    let n = 1_000_000;
    let mut sim = SeedStream::new(505, 1);
    let qs: Vec<f64> = (0..n)
        .map(|_| wssr(&model, &simulate_measurements(&model, &x, &zero, &mut sim).unwrap()).unwrap())
        .collect();
    let (mean, var) = mean_variance(&qs);
    let mean_se = (c.k[1] / n as f64).sqrt();
    let var_se = ((c.k[3] + 2.0 * c.k[1] * c.k[1]) / n as f64).sqrt();
    let mean_z = (mean - c.k[0]) / mean_se;
    let var_z = (var - c.k[1]) / var_se;
    let mut pass = mean_z.abs() <= 3.0 && var_z.abs() <= 3.0;

    let big = MeasurementModel::random(200, 20, 1.0, 0.0, &mut rng).unwrap();
    let bx = random_state(20, &mut rng);
    let bzero = AttackVector::zero(200);
    let bc = cumulants(&chi_mixture(&big, &bx, &bzero).unwrap());
    let draws = 200_000;
    let mut bs = SeedStream::new(505, 2);
    let zs: Vec<f64> = (0..draws)
        .map(|_| {
            let q = wssr(&big, &simulate_measurements(&big, &bx, &bzero, &mut bs).unwrap()).unwrap();
            normalized_wssr(q, &bc)
        })
        .collect();
    let ks = ks_statistic(zs, gaussian_cdf);
    pass &= ks < 0.02;

    let mut checked = 0;
    let mut bound_ok = true;
    for i in 0..40 {
        let m = rng.random_range(10..=120);
        let n = rng.random_range(1..m / 2);
        let lambda = if i % 2 == 0 { 0.0 } else { rng.random_range(0.01..2.0) };
        let model = MeasurementModel::random(m, n, 1.0, lambda, &mut rng).unwrap();
        let x = random_state(n, &mut rng);
        let attack = random_sparse_attack(m, 2, 2.0, &mut rng);
        let g = gaussian_law(&chi_mixture(&model, &x, &attack).unwrap()).unwrap();
        if g.rho < 0.125 {
            checked += 1;
            bound_ok &= g.density_bound.is_some_and(|b| b >= 0.0 && b.is_finite());
        }
    }
    pass &= bound_ok && checked > 0;
    let detail = format!(
        "K1 z-score {mean_z:.2}, K2 z-score {var_z:.2} (|z|<=3, 1e6 draws); 200x20 normalized KS {ks:.5} (<0.02); density bound nonnegative on {checked}/{checked} models with ρ<1/8: {bound_ok}"
    );
    report(5, "Gaussian approximation", pass, &detail, t.elapsed(), Duration::from_secs(120));
}

fn criterion_6_test_analytics() {
    let t = Instant::now();
    let mut rng = SeedStream::new(606, 0);
    let model = MeasurementModel::random(20, 5, 1.0, 0.0, &mut rng).unwrap();
    let x = random_state(5, &mut rng);
    let attack = AttackVector::new(20, vec![4, 13], vec![2.5, -2.0]).unwrap();
    let base = TestSpec::new(
        0.05,
        residual_law(&model, &x, &AttackVector::zero(20)).unwrap(),
        residual_law(&model, &x, &attack).unwrap(),
    )
    .unwrap();
    let dp = PrivacyParams::chi_square(1.0, 0.1, 1).unwrap();
    let mut worst = 0.0_f64;
    let mut pass = true;
    let mut seed = 0;
    for alpha in [0.01, 0.05, 0.1] {
        let clean = base.with_alpha(alpha).unwrap();
        for spec in [clean, clean.with_dp(dp)] {
            seed += 1;
            match monte_carlo_validate(&model, &x, &attack, &spec, 100_000, 6060 + seed, 1) {
                Ok(r) => {
                    worst = worst
                        .max((r.pfa_hat - r.pfa).abs() / r.pfa_se)
                        .max((r.pd_hat - r.pd).abs() / r.pd_se);
                }
                Err(e) => {
                    println!("{e}");
                    pass = false;
                }
            }
        }
    }
    let detail = format!("worst deviation {worst:.2} SE over 6 configurations (<=3)");
    report(6, "test analytics", pass, &detail, t.elapsed(), Duration::from_secs(60));
}

fn criterion_7_figure_trends() {
    let t = Instant::now();
    let f = FigureConfig::default();
    let params_ok = f.theta_z0 == 10.0
        && f.theta_ratio * f.theta_z0 == 13.0
        && f.sigma_z0 == 1.0
        && f.sigma_z1 == 4.0;

    let f5 = fig5(&f).unwrap();
    let fig5_ok = f5.windows(2).all(|w| w[1].auroc < w[0].auroc);

    let f6 = fig6(&f, 100_000, 707).unwrap();
    let fig6_pd = f6.windows(2).all(|w| w[1].pd < w[0].pd);
    let fig6_pfa = f6.windows(2).all(|w| w[1].pfa > w[0].pfa);
    let at_zero = f6.iter().find(|r| r.sigma_nu == 0.0).unwrap();
    let pfa0_ok = (at_zero.pfa - 0.05).abs() <= 0.005 && (at_zero.pfa_mc - 0.05).abs() <= 0.005;

    let (points, summary) = fig3(&f).unwrap();
    let mut deltas = f.fig3_delta_thetas.clone();
    deltas.sort_by(f64::total_cmp);
    let curve = |dt: f64| points.iter().filter(|p| p.delta_theta == dt).map(|p| p.pd).collect::<Vec<_>>();
    let fig3_points = deltas.windows(2).all(|w| {
        curve(w[0]).iter().zip(curve(w[1])).all(|(lo, hi)| *lo <= hi + 1e-15)
    });
    let auroc = |dt: f64| summary.iter().find(|s| s.delta_theta == dt).unwrap().auroc;
    let fig3_auroc = deltas.windows(2).all(|w| auroc(w[0]) < auroc(w[1]));

    let pass = params_ok && fig5_ok && fig6_pd && fig6_pfa && pfa0_ok && fig3_points && fig3_auroc;
    let detail = format!(
        "fig5 AUROC strictly decreasing {fig5_ok} ({:.4} -> {:.4}); fig6 Pd decreasing {fig6_pd}, Pfa increasing {fig6_pfa}, Pfa(0) {:.4} / MC {:.4}; fig3 ROC pointwise ordered {fig3_points}, AUROC ordered {fig3_auroc}",
        f5[0].auroc,
        f5[f5.len() - 1].auroc,
        at_zero.pfa,
        at_zero.pfa_mc
    );
    report(7, "figure trends", pass, &detail, t.elapsed(), Duration::from_secs(60));
}

fn criterion_8_stealth_attacks() {
    let t = Instant::now();
    let mut rng = SeedStream::new(808, 0);
    let model = MeasurementModel::random(20, 5, 1.0, 0.0, &mut rng).unwrap();
    let x = random_state(5, &mut rng);
    let c = DVector::from_fn(5, |_, _| rng.random_range(-3.0..3.0));
    let a = stealth_attack(&model, &c).unwrap();
    let law = residual_law(&model, &x, &a).unwrap();
    let ResidualLaw::ChiSquare { noncentrality, .. } = law else {
        unreachable!()
    };
    let spec = TestSpec::new(0.05, residual_law(&model, &x, &AttackVector::zero(20)).unwrap(), law).unwrap();
    let r = monte_carlo_rates(&model, &x, &a, &spec, 100_000, 8080, 1).unwrap();
    let diff_se = (r.pfa_se * r.pfa_se + r.pd_se * r.pd_se).sqrt();
    let gap_z = (r.pd_hat - r.pfa_hat).abs() / diff_se;
    let pd_z = (r.pd_hat - r.pfa).abs() / r.pd_se;
    let mut pass = noncentrality.abs() <= 1e-20 && gap_z <= 3.0 && pd_z <= 3.0;

    let mut exposed = 0;
    for _ in 0..5 {
        let kappa = rng.random_range(1..5);
        let g = DMatrix::from_fn(5, kappa, |_, _| rng.sample::<f64, _>(StandardNormal));
        let u = g.qr().q();
        let reduced = gsp_reduce(&model, &u).unwrap();
        let xr = u.transpose() * &x;
        let lr = residual_law(&reduced, &xr, &a).unwrap();
        if let ResidualLaw::ChiSquare { noncentrality, .. } = lr {
            exposed += usize::from(noncentrality > 1e-6);
        }
    }
    pass &= exposed >= 1;
    let detail = format!(
        "θ² {noncentrality:.2e} (<=1e-20); pd_hat {:.4} vs pfa_hat {:.4} ({gap_z:.2} SE), vs α ({pd_z:.2} SE); reduced model exposes the attack on {exposed}/5 instances",
        r.pd_hat, r.pfa_hat
    );
    report(8, "stealth attacks", pass, &detail, t.elapsed(), Duration::from_secs(30));
}

fn criterion_9_bessel_ratio_bounds() {
    let t = Instant::now();
    let mut rng = SeedStream::new(909, 0);
    let mut violations = 0;
    let mut tested = 0;
    while tested < 1000 {
        let a: f64 = 20.0 * (1.0 - rng.random::<f64>());
        let y: f64 = 50.0 * (1.0 - rng.random::<f64>());
        let x: f64 = y * rng.random::<f64>();
        if !(x > 0.0 && x < y) {
            continue;
        }
        tested += 1;
        let ln_ratio = ln_bessel_i(a, x).unwrap() - ln_bessel_i(a, y).unwrap();
        let base = a * (x / y).ln();
        if !(x - y + base < ln_ratio && ln_ratio < y - x + base) {
            violations += 1;
        }
    }
    let detail = format!("{violations} violations in {tested} triples, a in (0,20], 0<x<y<=50");
    report(9, "Bessel ratio bounds", violations == 0, &detail, t.elapsed(), Duration::from_secs(5));
}

fn main() {
    let criteria: [(&str, fn()); 9] = [
        ("1", criterion_1_projection_algebra),
        ("2", criterion_2_wssr_distribution),
        ("3", criterion_3_chi_square_mechanism),
        ("4", criterion_4_sherman_morrison_update),
        ("5", criterion_5_gaussian_approximation),
        ("6", criterion_6_test_analytics),
        ("7", criterion_7_figure_trends),
        ("8", criterion_8_stealth_attacks),
        ("9", criterion_9_bessel_ratio_bounds),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (id, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| x == id) {
            continue;
        }
        if std::panic::catch_unwind(f).is_err() {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
