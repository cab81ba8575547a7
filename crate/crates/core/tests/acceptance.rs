//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ramcheck::csl::Checker;
use ramcheck::lang::{parse_model, parse_property, Bindings, Value};
use ramcheck::numerics::{cumulative_reward, transient_from, NumericOptions, UniformizedChain};
use ramcheck::ram::{
    build_single_satellite_model, calibrate_d_u, parse_sweep, run_experiment_sweep, Manifest, RamParams,
    CONSTELLATION_CTMC, LIFETIME, MANIFEST_NAMES, SATELLITE_CTMC,
};
use ramcheck::sim::{estimate_property, SimConfig};
use ramcheck::{build_state_space_with, BuildOptions, BuiltModel, Ctmc};

type Outcome = (bool, String);

fn opts() -> NumericOptions {
    NumericOptions::default()
}

fn build(src: &str, consts: &[(&str, f64)]) -> BuiltModel {
    let b: Bindings = consts.iter().map(|(k, v)| (k.to_string(), Value::Real(*v))).collect();
    build_state_space_with(&parse_model(src).unwrap(), &b, BuildOptions::default()).unwrap()
}

fn value(model: &BuiltModel, query: &str) -> f64 {
    Checker::new(model, opts())
        .check(&parse_property(query).unwrap())
        .unwrap()
        .value()
}

/// Within `tol` absolutely; returns a report fragment.
fn near(label: &str, got: f64, want: f64, tol: f64, ok: &mut bool) -> String {
    let pass = (got - want).abs() <= tol;
    *ok &= pass;
    format!("{label}={got:.6} (target {want} ± {tol:.3e}){}", if pass { "" } else { " MISS" })
}

/// Linear interpolation of the first point where `ys` crosses `level`.
fn crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    xs.windows(2).zip(ys.windows(2)).find_map(|(x, y)| {
        let (a, b) = (y[0] - level, y[1] - level);
        (a == 0.0 || a.signum() != b.signum()).then(|| x[0] + (x[1] - x[0]) * a / (a - b))
    })
}

const SINGLE: [(&str, f64, f64); 5] = [
    ("P=?[F<=129600 s=5]", 0.0771, 0.004),
    ("R{\"num_replace\"}=?[C<=129600]", 0.08, 0.004),
    ("R{\"num_unplanned\"}=?[C<=129600]", 29.95, 0.3),
    ("R{\"num_repair\"}=?[C<=129600]", 0.18, 0.01),
    ("R{\"num_repair_fail\"}=?[C<=129600]", 0.036, 0.002),
];

const CONSTELLATION: [(&str, f64, f64); 3] = [
    ("P=?[F<=129600 s=4]", 0.01171, 0.01171 * 0.15),
    ("R{\"num_repair\"}=?[C<=129600]", 5.18, 0.518),
    ("(R{\"availability\"}=?[C<=129600])/129600", 0.99958, 5e-4),
];

fn criterion_1() -> Outcome {
    let m = build(SATELLITE_CTMC, &[]);
    let mut ok = true;
    let parts: Vec<String> = SINGLE
        .iter()
        .map(|(q, want, tol)| near(q, value(&m, q), *want, *tol, &mut ok))
        .collect();
    (ok, parts.join("; "))
}

fn criterion_2() -> Outcome {
    let m = build(CONSTELLATION_CTMC, &[]);
    let mut ok = true;
    let mut parts: Vec<String> = CONSTELLATION
        .iter()
        .map(|(q, want, tol)| near(q, value(&m, q), *want, *tol, &mut ok))
        .collect();

    let ast = parse_model(CONSTELLATION_CTMC).unwrap();
    let q = parse_property("(R{\"availability\"}=?[C<=129600])/129600").unwrap();
    let table = run_experiment_sweep(
        &ast,
        &[],
        std::slice::from_ref(&q),
        &[parse_sweep("MTTR=0.1:3600:72").unwrap()],
        &Bindings::new(),
        &opts(),
        1,
    )
    .unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) = table.column(&q.text).into_iter().map(|(p, v)| (p[0], v)).unzip();
    match crossing(&xs, &ys, 0.9999) {
        Some(x) => parts.push(near("MTTR@0.9999", x, 2520.0, 252.0, &mut ok)),
        None => {
            ok = false;
            parts.push("availability never crosses 0.9999".into());
        }
    }

    let s4 = value(&m, "P=?[F<=129600 s=4]");
    let s6 = value(&m, "P=?[F<=129600 s=6]");
    ok &= s6 <= s4;
    parts.push(format!("P[F<=T s=6]={s6:.6} <= P[F<=T s=4] (published 0.0796 not matched)"));
    (ok, parts.join("; "))
}

fn criterion_3() -> Outcome {
    let base = RamParams::single_satellite();
    let d_u = calibrate_d_u(&base, 16.0, 0.995, &opts()).unwrap();
    let ast = build_single_satellite_model(&base).unwrap();
    let q = parse_property("(R{\"availability\"}=?[C<=129600])/129600").unwrap();
    let mut b = Bindings::new();
    b.insert("d_u".into(), Value::Real(d_u));
    let table = run_experiment_sweep(
        &ast,
        &[],
        std::slice::from_ref(&q),
        &[parse_sweep("o=1:48:3").unwrap()],
        &b,
        &opts(),
        1,
    )
    .unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) = table.column(&q.text).into_iter().map(|(p, v)| (p[0], v)).unzip();
    let mut ok = true;
    let mut parts = vec![format!("calibrated d_u={d_u:.4}")];
    match crossing(&xs, &ys, 0.995) {
        Some(o) => parts.push(near("o@0.995", o, 16.0, 2.0, &mut ok)),
        None => {
            ok = false;
            parts.push("availability never crosses 0.995".into());
        }
    }
    let m = build(SATELLITE_CTMC, &[("d_u", d_u)]);
    let avail = value(&m, "(R{\"availability\"}=?[C<=129600])/129600");
    parts.push(near("availability", avail, 129378.0 / 129600.0, 0.002, &mut ok));
    (ok, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let cfg = SimConfig {
        replications: 1_000_000,
        confidence: 0.99,
        ..SimConfig::default()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    let start = Instant::now();
    for (src, queries) in [
        (SATELLITE_CTMC, SINGLE.iter().map(|q| q.0).collect::<Vec<_>>()),
        (CONSTELLATION_CTMC, CONSTELLATION.iter().map(|q| q.0).collect()),
    ] {
        let m = build(src, &[]);
        let checker = Checker::new(&m, opts());
        for q in queries {
            let prop = parse_property(q).unwrap();
            let exact = checker.check(&prop).unwrap().value();
            let est = estimate_property(&checker, &m, &prop, &cfg).unwrap();
            let inside = est.contains(exact);
            ok &= inside;
            parts.push(format!(
                "{q}: {exact:.6} in [{:.6}, {:.6}]{}",
                est.ci_low(),
                est.ci_high(),
                if inside { "" } else { " MISS" }
            ));
        }
    }
    parts.push(format!("seed {}, {:.1}s", cfg.seed, start.elapsed().as_secs_f64()));
    (ok, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let src = "ctmc\nconst double l; const double m;\nmodule u up : [0..1] init 1;\n \
               [] up=1 -> l : (up'=0);\n [] up=0 -> m : (up'=1);\nendmodule\n\
               rewards \"up\" up=1 : 1; endrewards\n";
    let mut ok = true;
    let same = build(src, &[("l", 1.0), ("m", 1.0)]);
    let skew = build(src, &[("l", 1.0), ("m", 3.0)]);
    let fast = build(src, &[("l", 2.0), ("m", 1.0)]);
    let parts = [
        near("transient", value(&same, "P=?[F[1,1] up=0]"), 0.5 * (1.0 - (-2.0f64).exp()), 1e-8, &mut ok),
        near("steady up", value(&skew, "S=?[up=1]"), 0.75, 1e-8, &mut ok),
        near("steady down", value(&skew, "S=?[up=0]"), 0.25, 1e-8, &mut ok),
        near("uptime", value(&same, "R{\"up\"}=?[C<=1]"), 0.5 + 0.25 * (1.0 - (-2.0f64).exp()), 1e-8, &mut ok),
        near("reach", value(&fast, "P=?[F<=1 up=0]"), 1.0 - (-2.0f64).exp(), 1e-8, &mut ok),
    ];
    (ok, parts.join("; "))
}

fn random_chain(rng: &mut ChaCha8Rng) -> Ctmc {
    let mut entries = Vec::new();
    for s in 0..5 {
        for t in 0..5 {
            if rng.random_bool(0.5) {
                entries.push((s, t, rng.random_range(0.01..5.0), None));
            }
        }
    }
    Ctmc::from_rates(5, 0, &entries)
}

fn criterion_6() -> Outcome {
    let o = opts();
    let mut parts = Vec::new();

    let mut chains: Vec<Ctmc> = (0..100u64)
        .map(|seed| random_chain(&mut ChaCha8Rng::seed_from_u64(seed)))
        .collect();
    chains.push(build(SATELLITE_CTMC, &[]).ctmc);
    chains.push(build(CONSTELLATION_CTMC, &[]).ctmc);
    let stoch = chains
        .iter()
        .flat_map(|c| {
            (0..c.num_states())
                .filter(|&s| !c.is_absorbing(s))
                .map(move |s| ((0..c.num_states()).map(|t| c.jump_probability(s, t)).sum::<f64>() - 1.0).abs())
        })
        .fold(0.0, f64::max);
    parts.push(format!("stochasticity {stoch:.1e}"));

    let (mut norm, mut ck) = (0.0f64, 0.0f64);
    for c in &chains[..100] {
        let u = UniformizedChain::new(c);
        let p0 = [1.0, 0.0, 0.0, 0.0, 0.0];
        let direct = transient_from(&u, &p0, 2.5, &o).unwrap();
        let staged = transient_from(&u, &transient_from(&u, &p0, 1.0, &o).unwrap(), 1.5, &o).unwrap();
        norm = norm.max((direct.iter().sum::<f64>() - 1.0).abs());
        ck = direct.iter().zip(&staged).map(|(a, b)| (a - b).abs()).fold(ck, f64::max);
    }
    parts.push(format!("normalization {norm:.1e}; Chapman-Kolmogorov {ck:.1e}"));

    let merged = "ctmc\nmodule m x : [0..2] init 0;\n [] x=0 -> 0.5 : (x'=0) + 0.8 : (x'=1);\n [] x=1 -> 1 : (x'=2);\nendmodule\n";
    let split = "ctmc\nmodule m x : [0..2] init 0;\n [] x=0 -> 0.5 : (x'=0);\n [] x=0 -> 0.8 : (x'=1);\n [] x=1 -> 1 : (x'=2);\nendmodule\n";
    let merge_eq = build(merged, &[]).ctmc.rate_matrix() == build(split, &[]).ctmc.rate_matrix();
    parts.push(format!("merge equivalence {merge_eq}"));

    let base = value(&build(CONSTELLATION_CTMC, &[]), "P=?[F<=129600 s=4]");
    let rescale = [0.1, 10.0]
        .iter()
        .map(|&k| {
            let m = build(CONSTELLATION_CTMC, &[("MTBF", 129600.0 / k), ("MTTR", 3600.0 / k)]);
            (value(&m, &format!("P=?[F<={:?} s=4]", 129600.0 / k)) - base).abs()
        })
        .fold(0.0, f64::max);
    parts.push(format!("time rescaling {rescale:.1e}"));

    let ones_src = format!("{SATELLITE_CTMC}\nrewards \"one\"\n  true : 1;\nendrewards\n");
    let ones = build(&ones_src, &[]);
    let ones_err = [1.0, 1000.0, LIFETIME]
        .iter()
        .map(|&t| (cumulative_reward(&ones.ctmc, ones.reward("one").unwrap(), t, &o).unwrap() - t).abs() / (o.eps * t))
        .fold(0.0, f64::max);
    parts.push(format!("all-ones reward error {ones_err:.2} eps*t"));

    let ok = stoch <= 1e-12 && norm <= 1e-10 && ck <= 1e-9 && merge_eq && rescale <= 1e-9 && ones_err <= 1.0;
    (ok, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut files = 0;
    for name in MANIFEST_NAMES {
        let m = Manifest::bundled(name).unwrap();
        let first = m.run(None, &opts(), 1, false).unwrap();
        let second = m.run(None, &opts(), 3, false).unwrap();
        let full_a = m.run(None, &opts(), 1, true).unwrap();
        let full_b = m.run(None, &opts(), 2, true).unwrap();
        ok &= first == second && full_a == full_b;
        files += first.len();
    }
    (ok, format!("{files} CSV files byte-identical across repeated and multi-threaded runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 single-satellite anchors", criterion_1),
        ("2 constellation anchors", criterion_2),
        ("3 availability calibration", criterion_3),
        ("4 simulation oracle at 99%", criterion_4),
        ("5 closed forms", criterion_5),
        ("6 structural properties", criterion_6),
        ("7 determinism", criterion_7),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let (ok, detail) = run();
        println!("{} criterion {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
