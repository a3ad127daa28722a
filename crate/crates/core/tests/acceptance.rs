//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary under `cargo test`. Failures are reported, not
//! panicked on; set `PRIVREC_ACCEPTANCE_STRICT=1` to turn any FAIL into a
//! non-zero exit. `PRIVREC_DATA` overrides the ML-100K directory and
//! `PRIVREC_ACCEPTANCE_EPOCHS` the training length of the end-to-end run.
//! `PRIVREC_ACCEPTANCE_ONLY=1,7` runs a subset.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array1;
use privrec::attack::{f1_score, AttackerKind, Attribute, F1Average};
use privrec::data::{Dataset, FeatureKind, FeatureSchema};
use privrec::experiment::{run_experiment, run_point, ExperimentPlan, MetricsReport, Variant};
use privrec::fm::{bpr_term, global_sensitivity, laplace_scale, truncated_bpr_approx};
use privrec::ldp::{
    choose_zeta, empirical_ldp_ratio, perturb_features, piecewise_params, Bins, UnaryEncoding,
};
use privrec::metrics::{hit_at_k, ndcg_at_k, HitMode};
use privrec::model::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{gradcheck, oracles};

const DEFAULT_EPOCHS: usize = 4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("PRIVREC_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k"))
}

fn load_data() -> Result<Dataset, String> {
    let dir = data_dir();
    Dataset::load_dir(&dir).map_err(|e| format!("ML-100K not readable at {}: {e}", dir.display()))
}

fn noise_scales() -> Outcome {
    let scale = |d| laplace_scale(global_sensitivity(d), 0.4, 80_000).unwrap();
    let exact = [(20, 0.00375), (40, 0.01375), (60, 0.03)];
    let rounded = [(80, 0.05), (100, 0.08)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, want) in exact {
        let got = scale(d);
        pass &= got == want;
        parts.push(format!("d={d} {got}"));
    }
    for (d, want) in rounded {
        let got = scale(d);
        pass &= ((got - want) / want).abs() <= 0.05;
        parts.push(format!("d={d} {got} (~{want})"));
    }
    outcome(pass, parts.join(", "))
}

fn ldp_ratios() -> Outcome {
    const N: usize = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [1.0f64, 2.0, 4.0] {
        let bound = eps.exp() * 1.05;
        let pm = piecewise_params(eps).unwrap();
        let bins = Bins {
            lo: -pm.c,
            hi: pm.c,
            count: 20,
        };
        let mut worst_pm: f64 = 1.0;
        for (a, b) in [(-1.0, 1.0), (-1.0, 0.0), (0.0, 1.0)] {
            let r = empirical_ldp_ratio(
                |x: &f64, rng| pm.perturb(*x, rng).unwrap(),
                &a,
                &b,
                bins,
                N,
                &mut rng,
            );
            worst_pm = worst_pm.max(r);
        }
        // Two-bit one-hot inputs; the output vector is encoded as 0..4.
        let oue = UnaryEncoding::new(eps).unwrap();
        let encode = |bits: &[bool; 2], rng: &mut ChaCha8Rng| {
            let hi = oue.perturb_bit(bits[0], rng);
            let lo = oue.perturb_bit(bits[1], rng);
            f64::from(2 * u8::from(hi) + u8::from(lo)) + 0.5
        };
        let rr_bins = Bins {
            lo: 0.0,
            hi: 4.0,
            count: 20,
        };
        let worst_rr =
            empirical_ldp_ratio(encode, &[true, false], &[false, true], rr_bins, N, &mut rng);
        pass &= worst_pm <= bound && worst_rr <= bound;
        parts.push(format!(
            "eps={eps}: pm {worst_pm:.3} rr {worst_rr:.3} <= {bound:.3}"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn piecewise_unbiased() -> Outcome {
    const N: usize = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_z: f64 = 0.0;
    for eps in [1.0, 2.0, 4.0] {
        let pm = piecewise_params(eps).unwrap();
        for x in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..N {
                let y = pm.perturb(x, &mut rng).unwrap();
                sum += y;
                sq += y * y;
            }
            let mean = sum / N as f64;
            let var = (sq / N as f64 - mean * mean) * N as f64 / (N - 1) as f64;
            let se = (var / N as f64).sqrt();
            worst_z = worst_z.max((mean - x).abs() / se);
        }
    }
    outcome(
        worst_z <= 4.0,
        format!("worst |mean - x| = {worst_z:.2} standard errors"),
    )
}

fn taylor_fidelity() -> Outcome {
    let worst = (0..=2000)
        .map(|i| -1.0 + i as f64 * 1e-3)
        .map(|s| (truncated_bpr_approx(s) - bpr_term(s)).abs())
        .fold(0.0f64, f64::max);
    outcome(worst <= 0.005, format!("max error {worst:.6} on [-1, 1]"))
}

fn gradients() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let d = if seed % 2 == 0 { 2 } else { 4 };
        worst = worst.max(gradcheck::check_instance(seed, d));
    }
    outcome(
        worst <= 1e-4,
        format!("10 instances, worst relative error {worst:.2e}"),
    )
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..100 {
        let (recs, tests, k) = oracles::ranking_instance(&mut rng);
        mismatches += usize::from(
            hit_at_k(&recs, &tests, k, HitMode::User).unwrap()
                != oracles::hit_user(&recs, &tests, k),
        );
        mismatches += usize::from(
            hit_at_k(&recs, &tests, k, HitMode::Pair).unwrap()
                != oracles::hit_pair(&recs, &tests, k),
        );
    }
    for _ in 0..100 {
        let (recs, tests, k) = oracles::ranking_instance(&mut rng);
        mismatches +=
            usize::from(ndcg_at_k(&recs, &tests, k).unwrap() != oracles::ndcg(&recs, &tests, k));
    }
    for _ in 0..100 {
        let (preds, labels, classes) = oracles::classification_instance(&mut rng);
        for avg in [F1Average::Weighted, F1Average::Macro, F1Average::Micro] {
            mismatches += usize::from(
                f1_score(&preds, &labels, classes, avg).unwrap()
                    != oracles::f1(&preds, &labels, classes, avg),
            );
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches over 100 instances per metric"),
    )
}

fn end_to_end(data: &Dataset, epochs: usize) -> Outcome {
    let start = Instant::now();
    let plan = ExperimentPlan {
        ks: vec![5, 10],
        attributes: vec![Attribute::Gender],
        attackers: vec![AttackerKind::Nn],
        attack_ks: vec![5],
        ..Default::default()
    };
    let base = TrainConfig {
        epochs,
        ..Default::default()
    };
    let mut hit = Vec::new();
    let mut f1 = Vec::new();
    for variant in Variant::ALL {
        let r = match run_point(data, &plan, variant, &base, None) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{variant} failed: {e}")),
        };
        hit.push(r.ranking_at(10).unwrap().hit.mean);
        f1.push(
            r.f1_at(Attribute::Gender, AttackerKind::Nn, 5)
                .unwrap()
                .mean,
        );
        eprintln!(
            "  {variant}: Hit@10 {:.4}  gender F1@5 {:.4}  ({:.0}s)",
            hit.last().unwrap(),
            f1.last().unwrap(),
            r.wall_clock_seconds
        );
    }
    // Variant::ALL order: GCN, GERAI, GERAI-NL, GERAI-NF.
    let (gcn, gerai, nl, nf) = (0, 1, 2, 3);
    let a = hit[gcn] >= 0.40;
    let b = (hit[gcn] - hit[gerai]).abs() <= 0.12;
    let c = f1[gcn] - f1[gerai] >= 0.02;
    let d = f1[gcn] >= f1[nl] - 0.02 && f1[nl] >= f1[nf] - 0.02 && f1[nf] >= f1[gerai] - 0.02;
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let e = minutes <= 30.0;
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    outcome(
        a && b && c && d && e,
        format!(
            "{epochs} epochs x 5 seeds in {minutes:.1} min {}; (a) GCN Hit@10 {:.4} {}; (b) GERAI Hit@10 {:.4} {}; \
             (c) gender F1@5 GCN {:.4} vs GERAI {:.4} {}; (d) GCN {:.4} NL {:.4} NF {:.4} GERAI {:.4} {}",
            mark(e),
            hit[gcn],
            mark(a),
            hit[gerai],
            mark(b),
            f1[gcn],
            f1[gerai],
            mark(c),
            f1[gcn],
            f1[nl],
            f1[nf],
            f1[gerai],
            mark(d)
        ),
    )
}

fn random_user(schema: &FeatureSchema, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let mut x = Array1::zeros(schema.d0());
    for f in schema.features() {
        match f.kind {
            FeatureKind::Numerical => x[f.offset] = rng.random_range(-1.0..=1.0),
            FeatureKind::Categorical => x[f.offset + rng.random_range(0..f.width)] = 1.0,
        }
    }
    x
}

fn masking(schema: &FeatureSchema) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d_prime = schema.d_prime();
    let mut bad = 0;
    let mut parts = Vec::new();
    for eps in [0.5, 5.0, 10.0, 20.0] {
        let zeta = choose_zeta(eps, d_prime);
        for _ in 0..1000 {
            let x = random_user(schema, &mut rng);
            let v = perturb_features(x.view(), schema, eps, &mut rng).unwrap();
            let masked = schema
                .features()
                .iter()
                .enumerate()
                .filter(|(i, f)| {
                    !v.selected.contains(i)
                        && v.values
                            .slice(ndarray::s![f.offset..f.offset + f.width])
                            .iter()
                            .all(|&y| y == 0.0)
                })
                .count();
            bad += usize::from(v.selected.len() != zeta || masked != d_prime - zeta);
        }
        parts.push(format!("eps={eps}: {} masked", d_prime - zeta));
    }
    outcome(
        bad == 0,
        format!("{}; {bad} of 4000 users off", parts.join(", ")),
    )
}

fn determinism(data: &Dataset) -> Outcome {
    let plan = ExperimentPlan {
        variants: vec![Variant::Gerai],
        ks: vec![5, 10],
        seeds: vec![3],
        attributes: Attribute::ALL.to_vec(),
        attackers: AttackerKind::ALL.to_vec(),
        attack_ks: vec![5],
        ..Default::default()
    };
    let base = TrainConfig {
        epochs: 1,
        ..Default::default()
    };
    let run = || -> Result<String, privrec::Error> {
        let reports: Vec<MetricsReport> = run_experiment(data, &plan, &base)?
            .iter()
            .map(MetricsReport::without_timing)
            .collect();
        Ok(serde_json::to_string(&reports)?)
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => outcome(
            a == b,
            format!(
                "two GERAI runs, {} report bytes, identical: {}",
                a.len(),
                a == b
            ),
        ),
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("pipeline failed: {e}")),
    }
}

fn main() {
    // Plain `cargo test` passes harness flags such as --quiet; a name filter
    // that is not ours means this binary was not selected.
    if let Some(filter) = std::env::args().skip(1).find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(&filter) {
            return;
        }
    }
    let epochs = std::env::var("PRIVREC_ACCEPTANCE_EPOCHS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_EPOCHS);
    let data = load_data();
    let schema = privrec::data::engineer_features(
        &privrec::data::BipartiteGraph::from_edges(1, 1, [(0, 0, 3)]).unwrap(),
        &privrec::data::parse_user_profiles("1|30|M|other|0").unwrap(),
    )
    .unwrap()
    .1;

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("noise scale", Box::new(noise_scales)),
        ("LDP ratio", Box::new(ldp_ratios)),
        ("piecewise unbiasedness", Box::new(piecewise_unbiased)),
        ("Taylor fidelity", Box::new(taylor_fidelity)),
        ("gradient check", Box::new(gradients)),
        ("metric oracles", Box::new(metric_oracles)),
        (
            "end-to-end ML-100K",
            Box::new(|| match &data {
                Ok(d) => end_to_end(d, epochs),
                Err(e) => outcome(false, e.clone()),
            }),
        ),
        ("perturbation masking", Box::new(|| masking(&schema))),
        (
            "determinism",
            Box::new(|| match &data {
                Ok(d) => determinism(d),
                Err(e) => outcome(false, e.clone()),
            }),
        ),
    ];

    let only: Option<Vec<usize>> = std::env::var("PRIVREC_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(n + 1))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {} ({name}): {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            n + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var_os("PRIVREC_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
