//! Acceptance suite. Runs every criterion, prints one `[PASS]`/`[FAIL]` line
//! for each and exits nonzero if any failed.
//!
//! Experiment-level criteria use the desk preset
//! ([`ExperimentConfig::desk`]); its offline models are trained once and
//! shared.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use skyplace::evt::{
    fit_gev, gev_cdf, gev_logpdf, gev_loglik_grad, gev_quantile, gev_tail_exponent, zeta_inverse, FitOptions,
    GevParams,
};
use skyplace::gpr::{log_marginal_likelihood, GprHyper, GprModel, ZoneModel};
use skyplace::harness::{
    collect_all, collect_block_maxima, evaluate_scheme, ks_distance, place_scheme, run_offline_pipeline,
    simulate_maxima, train_models, vue_snapshot, write_json_atomic, write_report, EvaluationReport,
    OfflineOutput, PipelineOptions, Scheme, SchemePlacement, empirical_quantile,
};
use skyplace::placement::{effective_params, objective_and_grad, solve_placement, vue_contexts, VueContext};
use skyplace::rng::{derive_seed, stream, Purpose};
use skyplace::scenario::{Distribution, ExperimentConfig, ZoneId};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn desk() -> ExperimentConfig {
    ExperimentConfig::desk()
}

fn desk_offline() -> &'static OfflineOutput {
    static OUT: OnceLock<OfflineOutput> = OnceLock::new();
    OUT.get_or_init(|| run_offline_pipeline(&desk(), &PipelineOptions::default()).expect("desk pipeline"))
}

fn biased(cfg: &ExperimentConfig) -> Distribution {
    Distribution::Biased(cfg.biased_zone_weights.clone())
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("runtime {s:.1} s (limit {limit_s} s)"))
}

// 1. Analytic GEV log-density gradient against central differences.
fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut rng = stream(101, Purpose::Synthetic, &[]);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let xi = if k % 10 == 0 {
            // Exercise the Gumbel limit and its neighbourhood.
            rng.random_range(-1e-4..1e-4)
        } else {
            rng.random_range(-0.5..0.5)
        };
        let p = GevParams::new(rng.random_range(-2.0..2.0), rng.random_range(0.1..3.0), xi).unwrap();
        let t = gev_quantile(rng.random_range(0.001..0.999), &p).unwrap();
        let g = gev_loglik_grad(t, &p).unwrap();
        let base = [p.mu, p.sigma, p.xi];
        let mut fd = [0.0; 3];
        for j in 0..3 {
            let h = 1e-6 * base[j].abs().max(1.0);
            let mut a = base;
            let mut b = base;
            a[j] += h;
            b[j] -= h;
            let f = |x: [f64; 3]| gev_logpdf(t, &GevParams { mu: x[0], sigma: x[1], xi: x[2] }).unwrap();
            fd[j] = (f(a) - f(b)) / (2.0 * h);
        }
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let err = (0..3).map(|j| (g[j] - fd[j]).abs()).fold(0.0, f64::max) / scale;
        worst = worst.max(err);
    }
    let (fast, rt) = within(t0.elapsed(), 5.0);
    outcome(worst < 1e-5 && fast, format!("max relative error {worst:.2e} over 1000 points (< 1e-5); {rt}"))
}

// 2. Fit recovery on synthetic GEV data and on exponential block maxima.
fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let truth = GevParams::new(1.0, 0.5, 0.1).unwrap();
    let mut rng = stream(102, Purpose::Synthetic, &[]);
    let x: Vec<f64> = (0..30_000)
        .map(|_| gev_quantile(rng.random_range(1e-12..1.0), &truth).unwrap())
        .collect();
    let p = fit_gev(&x, &FitOptions::default()).unwrap().params;
    let ok_gev = (p.mu - 1.0).abs() <= 0.01 && (p.sigma - 0.5).abs() <= 0.01 && (p.xi - 0.1).abs() <= 0.03;

    let mut rng = stream(103, Purpose::Synthetic, &[]);
    let m: Vec<f64> = (0..30_000)
        .map(|_| (0..150).map(|_| -(1.0 - rng.random::<f64>()).ln()).fold(0.0, f64::max))
        .collect();
    let q = fit_gev(&m, &FitOptions::default()).unwrap().params;
    let ok_exp = q.xi.abs() < 0.1;
    let (fast, rt) = within(t0.elapsed(), 60.0);
    outcome(
        ok_gev && ok_exp && fast,
        format!(
            "GEV(1, 0.5, 0.1) -> ({:.4}, {:.4}, {:.4}); exponential maxima xi = {:.4}; {rt}",
            p.mu, p.sigma, p.xi, q.xi
        ),
    )
}

// 3. Collected block maxima against their fitted GEV (zone 1, UAV at (90, 60)).
fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let cfg = desk();
    let s: Vec<f64> = collect_block_maxima(&cfg, ZoneId(1), [90.0, 60.0], cfg.samples_per_position, cfg.master_seed)
        .unwrap()
        .iter()
        .map(|x| x.value)
        .collect();
    let fit = fit_gev(&s, &FitOptions::with_learning_rate(cfg.gev_learning_rate)).unwrap();
    let ks = ks_distance(&s, |t| gev_cdf(t, &fit.params)).unwrap();
    let (fast, rt) = within(t0.elapsed(), 300.0);

    // Context: the same statistic over every desk training pair.
    let (manifest, samples) = collect_all(&cfg, &PipelineOptions::default()).unwrap();
    let out = desk_offline();
    let mut all: Vec<f64> = manifest
        .entries
        .iter()
        .zip(&samples)
        .map(|(e, v)| {
            let f = out.fits.iter().find(|f| f.zone == e.zone && f.position == e.position).unwrap();
            ks_distance(v, |t| gev_cdf(t, &f.report.params)).unwrap()
        })
        .collect();
    all.sort_by(f64::total_cmp);
    let below = all.iter().filter(|&&k| k < 0.03).count();
    outcome(
        ks < 0.03 && fast,
        format!(
            "KS {ks:.4} (< 0.03) at N = {}; {rt}; all {} training pairs: median {:.4}, max {:.4}, {below} below 0.03",
            s.len(),
            all.len(),
            all[all.len() / 2],
            all[all.len() - 1]
        ),
    )
}

fn random_positions(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = stream(seed, Purpose::Synthetic, &[]);
    (0..n)
        .map(|_| [rng.random_range(-120.0..120.0), rng.random_range(-120.0..120.0)])
        .collect()
}

// 4. GPR interpolation, predictive gradient and marginal-likelihood gradient.
fn criterion_4() -> Outcome {
    let mut rng = stream(104, Purpose::Synthetic, &[]);
    // Exact interpolation as lambda -> 0.
    let x = random_positions(40, 105);
    let y: Vec<f64> = x.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let m = GprModel::train(&x, &y, GprHyper { gamma: 1.0, ell: 200.0, lambda: 1e-13 }).unwrap();
    let interp = x
        .iter()
        .zip(&y)
        .map(|(&p, &t)| (m.predict_mean(p) - t).abs())
        .fold(0.0, f64::max);

    // Predictive gradient over 100 random models.
    let mut grad_err: f64 = 0.0;
    for k in 0..100 {
        let x = random_positions(25, 200 + k);
        let y: Vec<f64> = x.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let hyper = GprHyper {
            gamma: rng.random_range(0.5..2.0),
            ell: rng.random_range(500.0..5000.0),
            lambda: rng.random_range(1e-4..1e-1),
        };
        let m = GprModel::train(&x, &y, hyper).unwrap();
        let e = [rng.random_range(-120.0..120.0), rng.random_range(-120.0..120.0)];
        let g = m.predict_mean_grad(e);
        let h = 1e-4;
        let fd = [
            (m.predict_mean([e[0] + h, e[1]]) - m.predict_mean([e[0] - h, e[1]])) / (2.0 * h),
            (m.predict_mean([e[0], e[1] + h]) - m.predict_mean([e[0], e[1] - h])) / (2.0 * h),
        ];
        let scale = g[0].abs().max(g[1].abs()).max(1e-12);
        grad_err = grad_err.max((g[0] - fd[0]).abs().max((g[1] - fd[1]).abs()) / scale);
    }

    // Marginal-likelihood gradient in log hyperparameters.
    let mut lml_err: f64 = 0.0;
    for k in 0..20 {
        let x = random_positions(30, 400 + k);
        let y: Vec<f64> = x.iter().map(|p| (p[0] / 60.0).sin() + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let th = [rng.random_range(-1.0..1.0f64), rng.random_range(6.0..9.0f64), rng.random_range(-6.0..-2.0f64)];
        let hyp = |t: [f64; 3]| GprHyper { gamma: t[0].exp(), ell: t[1].exp(), lambda: t[2].exp() };
        let (_, g) = log_marginal_likelihood(&x, &y, &hyp(th)).unwrap();
        let mut fd = [0.0; 3];
        for j in 0..3 {
            let h = 1e-5;
            let mut a = th;
            let mut b = th;
            a[j] += h;
            b[j] -= h;
            fd[j] = (log_marginal_likelihood(&x, &y, &hyp(a)).unwrap().0
                - log_marginal_likelihood(&x, &y, &hyp(b)).unwrap().0)
                / (2.0 * h);
        }
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        lml_err = lml_err.max((0..3).map(|j| (g[j] - fd[j]).abs()).fold(0.0, f64::max) / scale);
    }
    outcome(
        interp < 1e-8 && grad_err < 1e-6 && lml_err < 1e-5,
        format!(
            "interpolation error {interp:.2e} (< 1e-8); predictive gradient {grad_err:.2e} (< 1e-6); \
             marginal-likelihood gradient {lml_err:.2e} (< 1e-5)"
        ),
    )
}

fn predicted_gev(m: &ZoneModel, e: [f64; 2], epsilon: f64) -> GevParams {
    GevParams {
        mu: m.model_mu.predict_mean(e),
        sigma: m.model_sigma.predict_mean(e),
        xi: zeta_inverse(m.model_zeta.predict_mean(e), epsilon).unwrap(),
    }
}

// 5. Held-out position: predicted GEV against a fresh simulation (zone 6 at (45, 45)).
fn criterion_5() -> Outcome {
    let cfg = desk();
    let out = desk_offline();
    let e = [45.0, 45.0];
    let seed = derive_seed(cfg.master_seed, Purpose::Holdout, &[]);
    let ks_of = |z: usize| {
        let m = out.models.iter().find(|m| m.zone == ZoneId(z)).unwrap();
        let p = predicted_gev(m, e, cfg.epsilon);
        let s: Vec<f64> = collect_block_maxima(&cfg, ZoneId(z), e, cfg.samples_per_position, seed)
            .unwrap()
            .iter()
            .map(|x| x.value)
            .collect();
        (ks_distance(&s, |t| gev_cdf(t, &p)).unwrap(), p)
    };
    let (ks, p) = ks_of(6);
    let others: Vec<String> = (1..=5).map(|z| format!("z{z} {:.3}", ks_of(z).0)).collect();
    outcome(
        ks < 0.05,
        format!(
            "zone 6 KS {ks:.4} (< 0.05), predicted (mu, sigma, xi) = ({:.4e}, {:.4e}, {:.4}); other zones: {}",
            p.mu,
            p.sigma,
            p.xi,
            others.join(", ")
        ),
    )
}

// 6. B* makes the GEV tail constraint tight for every vehicle.
fn criterion_6() -> Outcome {
    let cfg = desk();
    let out = desk_offline();
    let a1 = cfg.base_image_bits();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (d, seed) in [(Distribution::Even, 1u64), (biased(&cfg), 2), (Distribution::Even, 3)] {
        let vehicles = vue_snapshot(&cfg, &d, seed).unwrap();
        let vues = vue_contexts(&vehicles, &cfg).unwrap();
        for scheme in Scheme::ALL {
            let p = skyplace::harness::place_and_select(&out.models, &vues, &cfg, scheme, seed).unwrap();
            let (params, _) = effective_params(&out.models, p.solution.e_u, &vues).unwrap();
            for (ep, &b) in params.iter().zip(&p.solution.b_star) {
                // Normalized law scaled to the actual delay of a B*-bit image shared by V vehicles.
                let xi = zeta_inverse(ep.zeta, cfg.epsilon).unwrap();
                let normalized = GevParams { mu: ep.mu, sigma: ep.sigma, xi };
                let actual = normalized.scaled(b * cfg.num_vues as f64 / a1);
                let implied = gev_tail_exponent(cfg.delay_threshold, &actual);
                worst = worst.max((implied - cfg.epsilon).abs());
                count += 1;
            }
        }
    }
    outcome(
        worst < 1e-8,
        format!("max |implied violation - epsilon| = {worst:.2e} over {count} vehicle payloads (< 1e-8)"),
    )
}

fn grid(side: usize, half: f64) -> Vec<[f64; 2]> {
    let step = 2.0 * half / (side - 1) as f64;
    (0..side)
        .flat_map(|j| (0..side).map(move |i| [-half + i as f64 * step, -half + j as f64 * step]))
        .collect()
}

fn field(f: impl Fn([f64; 2]) -> f64, ell: f64) -> GprModel {
    let x = grid(9, 120.0);
    let y: Vec<f64> = x.iter().map(|&p| f(p)).collect();
    let gamma = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    GprModel::train(&x, &y, GprHyper { gamma, ell, lambda: 1e-9 * gamma }).unwrap()
}

fn bowl(center: [f64; 2]) -> Vec<ZoneModel> {
    vec![ZoneModel {
        zone: ZoneId(1),
        model_mu: field(move |p| 3e-3 + 1e-7 * ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)), 6400.0),
        model_sigma: field(|_| 5e-4, 6400.0),
        model_zeta: field(|_| 7.0, 6400.0),
    }]
}

fn one_zone_vues(n: usize, a: f64) -> Vec<VueContext> {
    (0..n).map(|vue_id| VueContext { vue_id, zone: ZoneId(1), a }).collect()
}

// 7. Solver on synthetic fields, and the objective gradient.
fn criterion_7() -> Outcome {
    let vues = one_zone_vues(50, 150_000.0);
    let c = [17.0, -23.0];
    let cfg = ExperimentConfig { max_displacement: 120.0, ..ExperimentConfig::default() };
    let s = solve_placement(&bowl(c), &vues, &cfg).unwrap();
    let bowl_err = ((s.e_u[0] - c[0]).powi(2) + (s.e_u[1] - c[1]).powi(2)).sqrt();

    let far = [60.0, 45.0];
    let d_th = 20.0;
    let cfg = ExperimentConfig { max_displacement: d_th, ..ExperimentConfig::default() };
    let s = solve_placement(&bowl(far), &vues, &cfg).unwrap();
    let r = (s.e_u[0].powi(2) + s.e_u[1].powi(2)).sqrt();
    let disk_err = (r - d_th).abs() / d_th;

    // Gradient on a synthetic field and on the learned desk models.
    let mut grad_err: f64 = 0.0;
    let desk_cfg = desk();
    let vehicles = vue_snapshot(&desk_cfg, &biased(&desk_cfg), 7).unwrap();
    let desk_vues = vue_contexts(&vehicles, &desk_cfg).unwrap();
    let cases: [(&[ZoneModel], &[VueContext]); 2] = [(&bowl(far), &vues), (&desk_offline().models, &desk_vues)];
    let mut rng = stream(107, Purpose::Synthetic, &[]);
    for (models, v) in cases {
        for _ in 0..50 {
            let e = [rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)];
            let (_, g) = objective_and_grad(models, e, v).unwrap();
            let h = 1e-3;
            let f = |p: [f64; 2]| objective_and_grad(models, p, v).unwrap().0;
            let fd = [
                (f([e[0] + h, e[1]]) - f([e[0] - h, e[1]])) / (2.0 * h),
                (f([e[0], e[1] + h]) - f([e[0], e[1] - h])) / (2.0 * h),
            ];
            let scale = g[0].abs().max(g[1].abs()).max(1e-300);
            grad_err = grad_err.max((g[0] - fd[0]).abs().max((g[1] - fd[1]).abs()) / scale);
        }
    }
    outcome(
        bowl_err < 0.5 && disk_err <= 1e-6 && grad_err < 1e-5,
        format!(
            "bowl optimum error {bowl_err:.3} m (< 0.5); disk boundary error {disk_err:.2e} d_th (<= 1e-6); \
             gradient relative error {grad_err:.2e} (< 1e-5)"
        ),
    )
}

fn evaluate_all(
    cfg: &ExperimentConfig,
    models: &[ZoneModel],
    d: &Distribution,
    seed: u64,
) -> BTreeMap<&'static str, (SchemePlacement, Vec<f64>)> {
    Scheme::ALL
        .iter()
        .map(|&s| {
            let p = place_scheme(models, cfg, d, s, seed).unwrap();
            let maxima = simulate_maxima(&p.solution, cfg, cfg.evaluation_blocks, seed).unwrap();
            (s.name(), (p, maxima))
        })
        .collect()
}

fn q999(v: &[f64]) -> f64 {
    empirical_quantile(v, 0.999).unwrap()
}

// 8. Even distribution: placement near the vehicle centroid, tail matches the center.
fn criterion_8() -> Outcome {
    let t0 = Instant::now();
    let cfg = desk();
    let out = desk_offline();
    let seed = cfg.master_seed;
    let vehicles = vue_snapshot(&cfg, &Distribution::Even, seed).unwrap();
    let n = vehicles.len() as f64;
    let centroid = [0, 1].map(|k| vehicles.iter().map(|v| v.position[k]).sum::<f64>() / n);
    let r = evaluate_all(&cfg, &out.models, &Distribution::Even, seed);
    let e = r["proposed"].0.solution.e_u;
    let dc = ((e[0] - centroid[0]).powi(2) + (e[1] - centroid[1]).powi(2)).sqrt();
    let ratio = q999(&r["proposed"].1) / q999(&r["fixed"].1);
    let (fast, rt) = within(t0.elapsed(), 900.0);
    outcome(
        dc <= 15.0 && (0.95..=1.05).contains(&ratio) && fast,
        format!(
            "proposed at ({:.1}, {:.1}), centroid ({:.1}, {:.1}), distance {dc:.1} m (<= 15); \
             q0.999 proposed/fixed = {ratio:.4} (in [0.95, 1.05]); {rt}",
            e[0], e[1], centroid[0], centroid[1]
        ),
    )
}

// 9. Biased distribution: q0.999 ordering proposed < fixed < random over five seeds.
fn criterion_9() -> Outcome {
    let t0 = Instant::now();
    let cfg = desk();
    let out = desk_offline();
    let seeds: Vec<u64> = (0..5).map(|k| cfg.master_seed + k).collect();
    let mut pooled: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut wins = 0;
    let mut lines = Vec::new();
    for &seed in &seeds {
        let r = evaluate_all(&cfg, &out.models, &biased(&cfg), seed);
        let [p, f, q] = ["proposed", "fixed", "random"].map(|s| q999(&r[s].1));
        let ordered = p < f && f < q;
        wins += ordered as usize;
        lines.push(format!(
            "seed {seed}: {p:.4}/{f:.4}/{q:.4} ({})",
            if ordered { "ordered" } else { "not ordered" }
        ));
        for (name, (_, v)) in r {
            pooled.entry(name).or_default().extend(v);
        }
    }
    let [p, f, q] = ["proposed", "fixed", "random"].map(|s| q999(&pooled[s]));
    let majority = 2 * wins > seeds.len();
    let aggregate = p < f && f < q;
    let (fast, rt) = within(t0.elapsed(), 1800.0);
    outcome(
        majority && aggregate && fast,
        format!(
            "{wins}/{} seeds ordered; pooled q0.999 proposed/fixed/random = {p:.4}/{f:.4}/{q:.4} s; \
             proposed vs fixed {:+.1}%, vs random {:+.1}%; {}; {rt}",
            seeds.len(),
            100.0 * (p / f - 1.0),
            100.0 * (p / q - 1.0),
            lines.join("; ")
        ),
    )
}

// 10. With epsilon = 1e-2 the realized violation frequency stays within 3 epsilon.
fn criterion_10() -> Outcome {
    let t0 = Instant::now();
    let cfg = ExperimentConfig { epsilon: 1e-2, ..desk() };
    let out = desk_offline();
    // GEV fits do not depend on epsilon; only the zeta targets change.
    let zones: Vec<ZoneId> = cfg.area.zones().collect();
    let models = train_models(&cfg, &out.fits, &zones).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, d) in [("even", Distribution::Even), ("biased", biased(&cfg))] {
        let p = place_scheme(&models, &cfg, &d, Scheme::Proposed, cfg.master_seed).unwrap();
        let r = evaluate_scheme(&p, &cfg, cfg.evaluation_blocks, cfg.master_seed).unwrap();
        let per_vue = r.per_vue_violation.iter().cloned().fold(0.0, f64::max);
        worst = worst.max(r.violation_freq);
        parts.push(format!(
            "{name}: {:.5} (worst vehicle {per_vue:.5}, mean level {:.2})",
            r.violation_freq, r.mean_level
        ));
    }
    let (fast, rt) = within(t0.elapsed(), 900.0);
    outcome(
        worst <= 3.0 * cfg.epsilon && fast,
        format!("violation frequency {} (<= {:.3}); {rt}", parts.join(", "), 3.0 * cfg.epsilon),
    )
}

fn run_full_desk(dir: &Path) -> Vec<EvaluationReport> {
    let cfg = desk();
    let out = run_offline_pipeline(&cfg, &PipelineOptions::in_dir(dir)).unwrap();
    let mut reports = Vec::new();
    for scheme in Scheme::ALL {
        let p = place_scheme(&out.models, &cfg, &biased(&cfg), scheme, cfg.master_seed).unwrap();
        write_json_atomic(&dir.join(format!("placement_{scheme}.json")), &p).unwrap();
        let r = evaluate_scheme(&p, &cfg, cfg.evaluation_blocks, cfg.master_seed).unwrap();
        write_json_atomic(&dir.join(format!("evaluation_{scheme}.json")), &r).unwrap();
        reports.push(r);
    }
    write_report(dir, &reports).unwrap();
    reports
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

// 11. Two full desk runs with the same seed give byte-identical artifacts.
fn criterion_11() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_full_desk(a.path());
    run_full_desk(b.path());
    let fa = files_under(a.path());
    let fb = files_under(b.path());
    let differing: Vec<&String> = fa.keys().filter(|k| fb.get(*k) != fa.get(*k)).collect();
    let same_set = fa.len() == fb.len() && fa.keys().all(|k| fb.contains_key(k));
    outcome(
        same_set && differing.is_empty() && fa.contains_key("models.json") && fa.contains_key("comparison.csv"),
        format!("{} artifacts compared, {} differ", fa.len(), differing.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("GEV gradient", criterion_1),
        ("GEV fit recovery", criterion_2),
        ("block maxima vs fitted GEV", criterion_3),
        ("GPR correctness", criterion_4),
        ("held-out GEV prediction", criterion_5),
        ("constraint tightness", criterion_6),
        ("solver on synthetic fields", criterion_7),
        ("even placement", criterion_8),
        ("biased ordering", criterion_9),
        ("URLLC sanity at epsilon 1e-2", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f));
        let secs = t0.elapsed().as_secs_f64();
        let (pass, detail) = match res {
            Ok(o) => (o.pass, o.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failed += (!pass) as usize;
        println!(
            "[{}] criterion {} ({name}): {detail} [{secs:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
