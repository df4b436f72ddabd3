//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line; the process fails if any does.

mod common;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use safeprune::environments::{mini_taxi, MiniTaxiConfig};
use safeprune::induced::{build_induced_dtmc, BuildLimits};
use safeprune::model::{Dtmc, EnvironmentModel};
use safeprune::pctl::{check, parse_property, until_probability, PathFormula};
use safeprune::policy::{Layer, Matrix, NeuralPolicy};
use safeprune::pruning::{feature_prune, l1_prune, random_prune};
use safeprune::workflow::{Experiment, SweepConfig, SweepMethod, Verdict, CSV_HEADER};

type Outcome = Result<String, String>;
type PathSet = Box<dyn Fn(&[usize]) -> bool>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))
}

fn masks(dtmc: &Dtmc, f: &safeprune::pctl::StateFormula) -> Vec<bool> {
    (0..dtmc.num_states()).map(|s| eval_state(f, dtmc.labels(s))).collect()
}

fn c1_bounded_vs_paths() -> Outcome {
    let start = Instant::now();
    let mut r = rng(0xC1);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let dtmc = random_dtmc(&mut r, 8);
        let k: u64 = r.gen_range(0..=12);
        let a = random_state_formula(&mut r, 2);
        let b = random_state_formula(&mut r, 2);
        let text = match r.gen_range(0..4) {
            0 => format!("P=? [ {a} U<={k} {b} ]"),
            1 => format!("P=? [ F<={k} {b} ]"),
            2 => format!("P=? [ G<={k} {a} ]"),
            _ => format!("P=? [ X {b} ]"),
        };
        let prop = parse_property(&text).map_err(|e| format!("{text}: {e}"))?;
        let got = check(&dtmc, &prop).map_err(|e| e.to_string())?;
        let truth = |f: &safeprune::pctl::StateFormula| masks(&dtmc, f);
        // Path sets as predicates over complete state sequences.
        let (steps, accept): (u64, PathSet) = match &prop.path {
            PathFormula::Until { left, right, bound } => {
                let (am, bm) = (truth(left), truth(right));
                (
                    bound.unwrap(),
                    Box::new(move |p: &[usize]| {
                        p.iter()
                            .position(|&s| bm[s])
                            .is_some_and(|i| p[..i].iter().all(|&s| am[s]))
                    }),
                )
            }
            PathFormula::Eventually { target, bound } => {
                let bm = truth(target);
                (bound.unwrap(), Box::new(move |p: &[usize]| p.iter().any(|&s| bm[s])))
            }
            PathFormula::Globally { invariant, bound } => {
                let im = truth(invariant);
                (bound.unwrap(), Box::new(move |p: &[usize]| p.iter().all(|&s| im[s])))
            }
            PathFormula::Next(f) => {
                let bm = truth(f);
                (1, Box::new(move |p: &[usize]| bm[p[1]]))
            }
            PathFormula::Seq(..) => unreachable!(),
        };
        let expected = enumerate_paths(&dtmc, 0, steps, accept.as_ref());
        let err = (got.probability - expected).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || {
            format!("case {case}: {text} gave {} but paths give {expected}", got.probability)
        })?;
        // Every other state against the early-stopping enumeration.
        if let PathFormula::Until { left, right, bound: Some(k) } = &prop.path {
            let (am, bm) = (truth(left), truth(right));
            for s in 0..dtmc.num_states() {
                let e = until_by_paths(&dtmc, s, &am, &bm, *k);
                ensure((got.state_values[s] - e).abs() <= 1e-9, || {
                    format!("case {case}: state {s} of {text}")
                })?;
            }
        }
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("200 chains, max error {worst:.1e}, {:?}", start.elapsed()))
}

fn c2_unbounded_fixtures() -> Outcome {
    let start = Instant::now();
    let cases = [
        ("chain3.json", 0.5),
        ("loop.json", 1.0),
        ("two_coin.json", 0.25),
    ];
    let mut got = Vec::new();
    for (name, expected) in cases {
        let model = fixture_model(name);
        let policy = NeuralPolicy::new(
            vec!["pos".into()],
            vec!["go".into()],
            vec![Layer::new(Matrix::from_rows(&[vec![0.0]]).unwrap(), vec![0.0])],
        )
        .unwrap();
        let built = build_induced_dtmc(&model, &policy, BuildLimits::default()).map_err(|e| e.to_string())?;
        let r = check(&built.dtmc, &parse_property(r#"P=? [ F "goal" ]"#).unwrap()).map_err(|e| e.to_string())?;
        ensure((r.probability - expected).abs() <= 1e-8, || {
            format!("{name}: {} != {expected}", r.probability)
        })?;
        if name == "loop.json" {
            ensure(r.probability == 1.0 && r.iterations == 0, || {
                format!("loop not decided qualitatively: {} after {} sweeps", r.probability, r.iterations)
            })?;
        }
        got.push(r.probability);
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("chain3={} loop={} two-coin={}", got[0], got[1], got[2]))
}

fn c3_qualitative_exactness() -> Outcome {
    let mut r = rng(0xC3);
    let (mut zeros, mut ones) = (0, 0);
    for case in 0..100 {
        let dtmc = random_dtmc(&mut r, 8);
        let a = random_state_formula(&mut r, 1);
        let b = random_state_formula(&mut r, 1);
        let prop = parse_property(&format!("P=? [ {a} U {b} ]")).unwrap();
        let PathFormula::Until { left, right, .. } = &prop.path else { unreachable!() };
        let (am, bm) = (masks(&dtmc, left), masks(&dtmc, right));
        let sol = until_probability(&dtmc, &am, &bm).map_err(|e| e.to_string())?;
        let z = prob0_oracle(&dtmc, &am, &bm);
        let o = prob1_oracle(&dtmc, &am, &bm);
        for s in 0..dtmc.num_states() {
            let v = sol.values[s];
            if z[s] {
                zeros += 1;
                ensure(v == 0.0, || format!("case {case}: state {s} should be exactly 0, got {v}"))?;
            } else if o[s] {
                ones += 1;
                ensure(v == 1.0, || format!("case {case}: state {s} should be exactly 1, got {v}"))?;
            } else {
                ensure(v > 0.0 && v < 1.0, || format!("case {case}: state {s} got {v}"))?;
            }
        }
    }
    Ok(format!("{zeros} Prob0 and {ones} Prob1 states exact"))
}

fn c4_duality_monotonicity() -> Outcome {
    let mut chains: Vec<(String, Dtmc)> = Vec::new();
    let trivial = NeuralPolicy::new(
        vec!["pos".into()],
        vec!["go".into()],
        vec![Layer::new(Matrix::from_rows(&[vec![0.0]]).unwrap(), vec![0.0])],
    )
    .unwrap();
    for name in ["chain3.json", "loop.json", "two_coin.json"] {
        let built = build_induced_dtmc(&fixture_model(name), &trivial, BuildLimits::default()).unwrap();
        chains.push((name.into(), built.dtmc));
    }
    let gamble = fixture_model("gamble.json");
    for p in ["gamble_risky_policy.json", "gamble_safe_policy.json"] {
        let policy = safeprune::policy::load_policy(&fixture_text(p)).unwrap();
        chains.push((p.into(), build_induced_dtmc(&gamble, &policy, BuildLimits::default()).unwrap().dtmc));
    }
    let avoid = safeprune::environments::builtin(AVOID_3X3).unwrap();
    let flee = safeprune::policy::load_policy(&fixture_text("avoidance_flee_policy.json")).unwrap();
    chains.push(("avoidance".into(), build_induced_dtmc(avoid.as_ref(), &flee, BuildLimits::default()).unwrap().dtmc));

    let mut checked = 0;
    for (name, dtmc) in &chains {
        let labels: Vec<String> = dtmc.alphabet().into_iter().map(String::from).collect();
        for label in &labels {
            let mut last = 0.0;
            for k in 0..=30 {
                let g = check(dtmc, &parse_property(&format!("P=? [ G<={k} !\"{label}\" ]")).unwrap()).unwrap();
                let f = check(dtmc, &parse_property(&format!("P=? [ F<={k} \"{label}\" ]")).unwrap()).unwrap();
                for s in 0..dtmc.num_states() {
                    let gap = (g.state_values[s] - (1.0 - f.state_values[s])).abs();
                    ensure(gap <= 1e-12, || format!("{name} {label} k={k} state {s}: gap {gap:e}"))?;
                }
                ensure(f.probability >= last, || format!("{name} {label}: F<={k} decreased"))?;
                last = f.probability;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (fixture, label, k) triples"))
}

fn random_matrix(r: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let tied = r.gen_bool(0.5);
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if r.gen_bool(0.15) {
                        0.0
                    } else if tied {
                        // few distinct magnitudes force tie-breaking
                        r.gen_range(1..=3) as f64 * if r.gen_bool(0.5) { 1.0 } else { -1.0 }
                    } else {
                        r.gen_range(-2.0..2.0)
                    }
                })
                .collect()
        })
        .collect()
}

fn one_layer(w: Vec<Vec<f64>>) -> NeuralPolicy {
    let cols = w[0].len();
    let rows = w.len();
    NeuralPolicy::new(
        (0..cols).map(|i| format!("f{i}")).collect(),
        (0..rows).map(|i| format!("a{i}")).collect(),
        vec![Layer::new(Matrix::from_rows(&w).unwrap(), vec![0.0; rows])],
    )
    .unwrap()
}

fn round_half_up(p: f64, n: usize) -> usize {
    let x = p * n as f64;
    let whole = x.floor();
    (if x - whole >= 0.5 { whole + 1.0 } else { whole }) as usize
}

fn c5_pruning_properties() -> Outcome {
    let mut r = rng(0xC5);
    for case in 0..1000 {
        let (rows, cols) = (r.gen_range(1..=6), r.gen_range(1..=6));
        let w = random_matrix(&mut r, rows, cols);
        let policy = one_layer(w.clone());
        let p = if r.gen_bool(0.3) {
            r.gen_range(0..=8) as f64 / 8.0
        } else {
            r.gen_range(0.0..=1.0)
        };
        let nonzero: Vec<(usize, usize, f64)> = w
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| (i + 1, j + 1, v)))
            .filter(|e| e.2 != 0.0)
            .collect();
        let want = round_half_up(p, nonzero.len());

        let (pruned, mask) = l1_prune(&policy, 1, p).map_err(|e| e.to_string())?;
        ensure(mask.len() == want, || format!("case {case}: l1 zeroed {} not {want}", mask.len()))?;
        let (zeroed, kept): (Vec<&(usize, usize, f64)>, Vec<_>) = nonzero.iter().partition(|e| mask.zeroed.contains(&(1, e.0, e.1)));
        for z in &zeroed {
            for k in &kept {
                ensure(z.2.abs() <= k.2.abs(), || format!("case {case}: l1 dominance broken"))?;
                if z.2.abs() == k.2.abs() {
                    ensure((z.0, z.1) < (k.0, k.1), || format!("case {case}: tie broken out of order"))?;
                }
            }
        }
        for (i, row) in w.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let now = pruned.layers()[0].weights.get(i, j);
                let expect = if mask.zeroed.contains(&(1, i + 1, j + 1)) { 0.0 } else { v };
                ensure(now.to_bits() == expect.to_bits(), || format!("case {case}: weight ({i},{j}) changed"))?;
            }
        }
        let (_, again) = l1_prune(&policy, 1, p).unwrap();
        ensure(again == mask, || format!("case {case}: l1 not deterministic"))?;

        let seed = r.gen::<u64>();
        let (_, m1) = random_prune(&policy, 1, p, seed).unwrap();
        let (_, m2) = random_prune(&policy, 1, p, seed).unwrap();
        ensure(m1 == m2, || format!("case {case}: random prune differs for seed {seed}"))?;
        ensure(m1.len() == want, || format!("case {case}: random zeroed {} not {want}", m1.len()))?;
        ensure(
            m1.zeroed.iter().all(|&(_, i, j)| w[i - 1][j - 1] != 0.0),
            || format!("case {case}: random prune picked a zero weight"),
        )?;
    }

    let policy = one_layer(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    let mut worst: f64 = 0.0;
    for p in [0.25, 0.5, 0.75] {
        let mut hits: HashMap<(usize, usize, usize), u32> = HashMap::new();
        for seed in 0..10_000u64 {
            for c in random_prune(&policy, 1, p, seed).unwrap().1.zeroed {
                *hits.entry(c).or_default() += 1;
            }
        }
        for i in 1..=2 {
            for j in 1..=2 {
                let freq = *hits.get(&(1, i, j)).unwrap_or(&0) as f64 / 10_000.0;
                worst = worst.max((freq - p).abs());
                ensure((freq - p).abs() <= 0.02, || format!("p={p}: ({i},{j}) chosen {freq}"))?;
            }
        }
    }
    Ok(format!("1000 cases; uniformity max deviation {worst:.4}"))
}

fn c6_feature_invariance() -> Outcome {
    let mut r = rng(0xC6);
    let mut pairs = 0;
    for case in 0..20 {
        let d = r.gen_range(2..=6);
        let names: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
        let feats: Vec<&str> = names.iter().map(String::as_str).collect();
        let hidden: Vec<usize> = (0..r.gen_range(0..=2)).map(|_| r.gen_range(2..=10)).collect();
        let policy = random_policy(&mut r, &feats, &["a", "b", "c"], &hidden);
        let f = r.gen_range(0..d);
        let (pruned, _) = feature_prune(&policy, feats[f]).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let base: Vec<i64> = (0..d).map(|_| r.gen_range(-50..=50)).collect();
            let mut other = base.clone();
            other[f] = r.gen_range(-1_000_000..=1_000_000);
            let x = pruned.forward(&base.clone().into()).unwrap();
            let y = pruned.forward(&other.into()).unwrap();
            let same = x.iter().zip(&y).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || format!("policy {case}: logits depend on pruned f{f}: {x:?} vs {y:?}"))?;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} state pairs bit-identical"))
}

fn c7_taxi_builder() -> Outcome {
    let env = mini_taxi(MiniTaxiConfig::default()).unwrap();
    let rules = TaxiRules::default();
    let mut r = rng(0xC7);
    let mut sizes = Vec::new();
    for i in 0..5 {
        let policy = random_policy(
            &mut r,
            &["x", "y", "fuel", "on_board", "jobs_done"],
            &["north", "south", "east", "west", "pickup", "dropoff", "refuel"],
            &[16],
        );
        let start = Instant::now();
        let built = build_induced_dtmc(&env, &policy, BuildLimits::default()).map_err(|e| e.to_string())?;
        let oracle = taxi_reachable_under(&rules, &policy);
        let got: HashSet<Vec<i64>> = built.dtmc.states().iter().map(|s| s.features().to_vec()).collect();
        ensure(got == oracle, || format!("policy {i}: {} states vs oracle {}", got.len(), oracle.len()))?;
        ensure(got.len() == built.dtmc.num_states(), || format!("policy {i}: duplicate states"))?;
        for (idx, s) in built.dtmc.states().iter().enumerate() {
            let action = built.choices[idx];
            let dist = env.successors(s, action).map_err(|e| e.to_string())?;
            let expected: BTreeSet<(Vec<i64>, u64)> =
                dist.iter().map(|(t, p)| (t.features().to_vec(), p.to_bits())).collect();
            let row: BTreeSet<(Vec<i64>, u64)> = built
                .dtmc
                .row(idx)
                .iter()
                .map(|&(t, p)| (built.dtmc.state(t).features().to_vec(), p.to_bits()))
                .collect();
            ensure(row == expected, || format!("policy {i}: row of {s} differs from successors"))?;
            let labels_ok = built.dtmc.labels(idx) == &env.labels(s);
            ensure(labels_ok, || format!("policy {i}: labels of {s}"))?;
        }
        within(start, Duration::from_secs(5))?;
        sizes.push(built.dtmc.num_states());
    }
    Ok(format!("induced sizes {sizes:?} match the reachability oracle"))
}

fn c8_avoidance_pattern() -> Outcome {
    let prop = r#"P=? [ G<=6 !"collision" ]"#;
    let exp = Experiment::load(AVOID_3X3, &fixture_path("avoidance_flee_policy.json"), prop)
        .map_err(|e| e.to_string())?;
    let reports = exp.feature_importance().map_err(|e| e.to_string())?;

    // Flee west while possible, otherwise stay; without ax it always stays.
    let flee = |a: (i64, i64), _o: (i64, i64)| if a.0 >= 1 { (a.0 - 1, a.1) } else { a };
    let stay = |a: (i64, i64), _o: (i64, i64)| a;
    let m = avoidance_safe_prob((1, 1), (2, 2), 6, &flee);
    let m_blind = avoidance_safe_prob((1, 1), (2, 2), 6, &stay);
    ensure(m == 22.0 / 64.0 && m_blind == 7.0 / 64.0, || {
        format!("oracle drifted from the frozen values: {m}, {m_blind}")
    })?;

    let names = exp.policy.feature_names().to_vec();
    let mut line = Vec::new();
    for (name, rep) in names.iter().zip(&reports) {
        let delta = rep.delta.unwrap();
        ensure((rep.m - m).abs() <= 1e-12, || format!("m = {} but oracle {m}", rep.m))?;
        let expected = if name == "ax" { m_blind - m } else { 0.0 };
        ensure((delta - expected).abs() <= 1e-12, || format!("{name}: delta {delta}, oracle {expected}"))?;
        line.push(format!("{name}:{delta:+.6}"));
    }
    let zero = reports.iter().any(|r| r.delta == Some(0.0) && r.verdict == Some(Verdict::Unchanged));
    let big = reports.iter().any(|r| r.delta.unwrap().abs() >= 0.05);
    ensure(zero && big, || "pattern not reproduced".into())?;
    Ok(format!("m={m} deltas {}", line.join(" ")))
}

fn c9_improvement() -> Outcome {
    let exp = Experiment::load(
        &fixture_path("gamble.json").display().to_string(),
        &fixture_path("gamble_risky_policy.json"),
        r#"P=? [ F "goal" ]"#,
    )
    .map_err(|e| e.to_string())?;
    let spec = safeprune::pruning::PruneSpec::L1 { layer: 1, fraction: 1.0 };
    let (report, _, _) = exp.prune_and_measure(&spec).map_err(|e| e.to_string())?;
    // risky: goal 1/2 then absorbing; safe: goal 9/10 then absorbing
    let (m, m_hat) = (0.5, 0.9);
    let got = report.m_hat.unwrap();
    ensure((report.m - m).abs() <= 1e-12 && (got - m_hat).abs() <= 1e-12, || {
        format!("m={} m_hat={got}", report.m)
    })?;
    ensure(got > report.m && report.verdict == Some(Verdict::Improved), || "no improvement".into())?;
    Ok(format!("m={} m_hat={got} verdict={}", report.m, report.verdict.unwrap()))
}

fn c10_sweep_determinism() -> Outcome {
    let exp = Experiment::load(
        AVOID_3X3,
        &fixture_path("avoidance_flee_policy.json"),
        r#"P=? [ G<=6 !"collision" ]"#,
    )
    .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = SweepConfig {
        method: SweepMethod::Random,
        layer: 1,
        fractions: safeprune::workflow::parse_grid("0:1:0.25").unwrap(),
        seeds: (0..10).collect(),
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    exp.sweep_to_file(&config, &a).map_err(|e| e.to_string())?;
    exp.sweep_to_file(&config, &b).map_err(|e| e.to_string())?;
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    ensure(a == b, || "sweep outputs differ".into())?;
    let text = String::from_utf8(a).unwrap();
    let header = text.lines().next().unwrap_or_default();
    let expected = "method,layer,fraction,seed,property,m,m_hat,delta,states,transitions,time_ms";
    ensure(header == expected && header == CSV_HEADER.join(","), || format!("header `{header}`"))?;
    let rows = text.lines().count() - 1;
    ensure(rows == 55, || format!("{rows} data rows, expected 50 measurements + 5 means"))?;

    let l1 = SweepConfig {
        method: SweepMethod::L1,
        ..config
    };
    ensure(exp.sweep(&l1).unwrap() == exp.sweep(&l1).unwrap(), || "l1 sweep differs".into())?;
    Ok(format!("{} bytes identical across runs", text.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("checker matches path enumeration on bounded formulas", c1_bounded_vs_paths),
        ("unbounded fixtures", c2_unbounded_fixtures),
        ("Prob0/Prob1 states are exact", c3_qualitative_exactness),
        ("G/F duality and F<=k monotonicity", c4_duality_monotonicity),
        ("pruning properties and random uniformity", c5_pruning_properties),
        ("feature pruning makes logits independent of the feature", c6_feature_invariance),
        ("induced chain on MiniTaxi matches reachability oracle", c7_taxi_builder),
        ("avoidance feature importance: zero and nonzero deltas", c8_avoidance_pattern),
        ("pruning can improve safety", c9_improvement),
        ("sweep output is byte-identical across runs", c10_sweep_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
