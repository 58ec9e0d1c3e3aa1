//! Population-engine checks: the merge/averaging/monotonicity invariants on
//! seeded random discrete distributions (exact rational arithmetic), plus
//! pinned constructions with known values.

use calibkit::binning::uniform_mass;
use calibkit::empirical::{ece_pow, pde_pow};
use calibkit::population::{
    admits_optimal_threshold, auc_v, ce_1, ce_p_pow, classification_loss, is_calibrated, is_strictly_monotonic, kendall_tau,
    mse, pc, pc_from_weights,
};
use calibkit::transforms::{average_label_assignment, construct_calibrated_accurate_alternative, merge_cells, MergeScore};
use calibkit::{cells, effective_range, DiscreteDistribution, Partition, Point, Rational, Result, Scalar, ScoreTable};
use num_traits::{FromPrimitive, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PopcheckConfig;

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, failures: Vec<String>, total: usize) -> Self {
        let passed = failures.is_empty();
        let detail = if passed {
            format!("{total} cases")
        } else {
            format!("{} of {total} cases failed; first: {}", failures.len(), failures[0])
        };
        Self { name: name.into(), passed, detail }
    }

    fn single(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::from_i64(n).unwrap() / Rational::from_i64(d).unwrap()
}

type Exact = (DiscreteDistribution<Rational>, ScoreTable<Rational>);

/// Random instance: integer weights 1..=10, etas in tenths, scores in eighths.
pub fn random_instance(rng: &mut ChaCha8Rng, max_support: usize) -> Exact {
    let n = rng.gen_range(1..=max_support);
    let raw: Vec<(i64, i64, i64)> = (0..n).map(|_| (rng.gen_range(1..=10), rng.gen_range(0..=10), rng.gen_range(0..=8))).collect();
    let total: i64 = raw.iter().map(|r| r.0).sum();
    let d = DiscreteDistribution::new(
        raw.iter()
            .enumerate()
            .map(|(i, &(w, e, _))| Point { id: format!("x{i}"), weight: q(w, total), eta: q(e, 10) })
            .collect(),
    )
    .expect("valid by construction");
    let f = ScoreTable::from_values(&d, &raw.iter().map(|r| q(r.2, 8)).collect::<Vec<_>>()).expect("one score per point");
    (d, f)
}

fn instances(cfg: &PopcheckConfig, seed: u64, salt: u64) -> impl Iterator<Item = (usize, Exact, ChaCha8Rng)> + '_ {
    (0..cfg.instances).map(move |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(calibkit::seed::derive_seed(seed, &[salt, i as u64]));
        let inst = random_instance(&mut rng, cfg.max_support.max(1));
        (i, inst, rng)
    })
}

fn run_suite(name: &str, cfg: &PopcheckConfig, seed: u64, salt: u64, check: impl Fn(&Exact, &mut ChaCha8Rng) -> Result<Option<String>>) -> Check {
    let mut failures = Vec::new();
    for (i, inst, mut rng) in instances(cfg, seed, salt) {
        match check(&inst, &mut rng) {
            Ok(None) => {}
            Ok(Some(msg)) => failures.push(format!("instance {i}: {msg}")),
            Err(e) => failures.push(format!("instance {i}: error {e}")),
        }
    }
    Check::new(name, failures, cfg.instances)
}

fn pick<'a>(rng: &mut ChaCha8Rng, range: &'a [Rational]) -> &'a Rational {
    &range[rng.gen_range(0..range.len())]
}

/// Averaged merges never increase pc or ce_p, p in {1, 2, 4}.
pub fn averaged_merges(cfg: &PopcheckConfig, seed: u64) -> Check {
    run_suite("averaged merges never increase pc or ce_p", cfg, seed, 1, |(d, f), rng| {
        let range = effective_range(d, f)?;
        let (r1, r2) = (pick(rng, &range).clone(), pick(rng, &range).clone());
        let g = merge_cells(d, f, &r1, &r2, &MergeScore::Averaged)?;
        if pc(d, &g)? > pc(d, f)? {
            return Ok(Some("pc increased".into()));
        }
        for p in [1, 2, 4] {
            if ce_p_pow(d, &g, p)? > ce_p_pow(d, f, p)? {
                return Ok(Some(format!("ce_{p} increased")));
            }
        }
        Ok(None)
    })
}

/// Merges to an arbitrary score never increase pc.
pub fn explicit_merges(cfg: &PopcheckConfig, seed: u64) -> Check {
    run_suite("arbitrary-score merges never increase pc", cfg, seed, 2, |(d, f), rng| {
        let range = effective_range(d, f)?;
        let (r1, r2) = (pick(rng, &range).clone(), pick(rng, &range).clone());
        // half the time collide with an existing level
        let r = if rng.gen_bool(0.5) { pick(rng, &range).clone() } else { q(rng.gen_range(-4..=12), 8) };
        let g = merge_cells(d, f, &r1, &r2, &MergeScore::Explicit(r))?;
        Ok((pc(d, &g)? > pc(d, f)?).then(|| "pc increased".into()))
    })
}

/// Average label assignment: ce_p = 0 exactly; mse, loss at 1/2 and pc
/// never increase.
pub fn averaging(cfg: &PopcheckConfig, seed: u64) -> Check {
    run_suite("average label assignment is calibrated and never worse", cfg, seed, 3, |(d, f), _| {
        let g = average_label_assignment(d, f)?;
        for p in [1, 2, 4] {
            if !ce_p_pow(d, &g, p)?.is_zero() {
                return Ok(Some(format!("ce_{p} nonzero")));
            }
        }
        if mse(d, &g)? > mse(d, f)? {
            return Ok(Some("mse increased".into()));
        }
        let half = q(1, 2);
        if classification_loss(d, &g, &half)? > classification_loss(d, f, &half)? {
            return Ok(Some("classification loss increased".into()));
        }
        Ok((pc(d, &g)? > pc(d, f)?).then(|| "pc increased".into()))
    })
}

/// `pc <= |range|`, with equality exactly when all cells weigh the same.
pub fn pc_bound(cfg: &PopcheckConfig, seed: u64) -> Check {
    run_suite("pc <= |range|, equality iff equal cell weights", cfg, seed, 4, |(d, f), _| {
        let c = cells(d, f)?;
        let size = Rational::from_usize(c.len()).unwrap();
        let v = pc(d, f)?;
        let equal = c.partition.weights().windows(2).all(|w| w[0] == w[1]);
        Ok(if v > size || v < Rational::one() {
            Some(format!("pc {v} outside [1, {size}]"))
        } else if (v == size) != equal {
            Some(format!("pc {v}, |range| {size}, equal weights {equal}"))
        } else {
            None
        })
    })
}

/// `auc_v = 1 - ce_1` (exact in rationals, and within 1e-12 in floats).
pub fn auc_v_identity(cfg: &PopcheckConfig, seed: u64) -> Check {
    run_suite("auc_v = 1 - ce_1", cfg, seed, 5, |(d, f), _| {
        let (a, c) = (auc_v(d, f)?, ce_1(d, f)?);
        if a != Rational::one() - c.clone() {
            return Ok(Some(format!("auc_v {a} vs ce_1 {c}")));
        }
        let (df, ff) = to_float(d, f)?;
        let gap = (auc_v(&df, &ff)? - (1.0 - ce_1(&df, &ff)?)).abs();
        Ok((gap > 1e-12).then(|| format!("float gap {gap:e}")))
    })
}

fn to_float(d: &DiscreteDistribution<Rational>, f: &ScoreTable<Rational>) -> Result<(DiscreteDistribution<f64>, ScoreTable<f64>)> {
    let df = DiscreteDistribution::new(
        d.points()
            .iter()
            .map(|p| Point { id: p.id.clone(), weight: p.weight.to_f64_lossy(), eta: p.eta.to_f64_lossy() })
            .collect(),
    )?;
    let ff = ScoreTable::new(f.iter().map(|(id, s)| (id.clone(), s.to_f64_lossy())))?;
    Ok((df, ff))
}

/// A strictly increasing function of eta: random positive gaps between the
/// images of consecutive eta tenths.
fn monotone_scores(d: &DiscreteDistribution<Rational>, rng: &mut ChaCha8Rng) -> Result<ScoreTable<Rational>> {
    let mut acc = 0;
    let map: Vec<i64> = (0..=10)
        .map(|_| {
            acc += rng.gen_range(1..=5);
            acc
        })
        .collect();
    let top = map[10] + rng.gen_range(0..=3);
    Ok(ScoreTable::from_fn(d, |p| {
        let tenth = (p.eta.clone() * q(10, 1)).to_integer();
        let k: usize = tenth.try_into().expect("eta in tenths");
        q(map[k], top)
    }))
}

/// Strictly monotonic predictors admit an optimal threshold.
pub fn monotone_threshold(cfg: &PopcheckConfig, seed: u64) -> Check {
    run_suite("strictly monotonic => optimal threshold", cfg, seed, 6, |(d, f), rng| {
        for g in [monotone_scores(d, rng)?, f.clone()] {
            if is_strictly_monotonic(d, &g)? && !admits_optimal_threshold(d, &g, &Rational::zero())? {
                return Ok(Some("monotonic predictor without optimal threshold".into()));
            }
        }
        Ok(None)
    })
}

/// Strictly monotonic and different from eta implies not calibrated.
pub fn monotone_not_calibrated(cfg: &PopcheckConfig, seed: u64) -> Check {
    run_suite("strictly monotonic and f != eta => not calibrated", cfg, seed, 7, |(d, f), rng| {
        for g in [monotone_scores(d, rng)?, f.clone()] {
            if !is_strictly_monotonic(d, &g)? {
                continue;
            }
            let differs = d.points().iter().any(|p| g.get(&p.id) != Some(&p.eta));
            if differs && is_calibrated(d, &g, &Rational::zero())? {
                return Ok(Some("monotonic, differs from eta, yet calibrated".into()));
            }
        }
        Ok(None)
    })
}

pub fn property_suites(cfg: &PopcheckConfig, seed: u64) -> Vec<Check> {
    vec![
        averaged_merges(cfg, seed),
        explicit_merges(cfg, seed),
        averaging(cfg, seed),
        pc_bound(cfg, seed),
        auc_v_identity(cfg, seed),
        monotone_threshold(cfg, seed),
        monotone_not_calibrated(cfg, seed),
    ]
}

/// PC of the five weight profiles: n equal cells, 3 x 1/4 + 19/80 + 5 x 1/80,
/// (1/4, 1/4, 1/2), 2 x 1/3 + 10 x 1/30, 1/3 + 20 x 1/30.
pub fn pc_profiles() -> Vec<(String, Vec<Rational>, Rational)> {
    let rep = |w: Rational, k: usize| vec![w; k];
    let mut out = Vec::new();
    for n in [1usize, 2, 5, 10] {
        out.push((format!("{n} equal cells"), rep(q(1, n as i64), n), q(n as i64, 1)));
    }
    let nine = [rep(q(1, 4), 3), vec![q(19, 80)], rep(q(1, 80), 5)].concat();
    out.push(("9 cells, 5 small".into(), nine, q(6400, 1566)));
    out.push(("3 unequal cells".into(), vec![q(1, 4), q(1, 4), q(1, 2)], q(8, 3)));
    out.push(("12 cells, 10 on a third".into(), [rep(q(1, 3), 2), rep(q(1, 30), 10)].concat(), q(30, 7)));
    out.push(("21 cells, 20 on two thirds".into(), [vec![q(1, 3)], rep(q(1, 30), 20)].concat(), q(15, 2)));
    out
}

pub fn check_pc_profiles() -> Check {
    let mut failures = Vec::new();
    let profiles = pc_profiles();
    for (name, w, expected) in &profiles {
        let exact = pc_from_weights(w);
        let float = pc_from_weights(&w.iter().map(Scalar::to_f64_lossy).collect::<Vec<_>>());
        if &exact != expected || (float - expected.to_f64_lossy()).abs() > 1e-9 {
            failures.push(format!("{name}: got {exact} ({float}), expected {expected}"));
        }
    }
    Check::new("pc of the weight profiles", failures, profiles.len())
}

/// Half 0.35 and half 0.65 scores, labels averaging 1/2, one bin.
pub fn check_mixed_bin() -> Check {
    let scores = [q(35, 100), q(65, 100), q(35, 100), q(65, 100)];
    let labels = [0, 1, 1, 0];
    let part = Partition::<Rational>::from_bins(vec![vec![0, 1, 2, 3]], 4).unwrap();
    let pce = ece_pow(&scores, &labels, &part, 1);
    let ppd = pde_pow(&scores, &labels, &part, 1);
    let ok = matches!((&pce, &ppd), (Ok(a), Ok(b)) if a.is_zero() && *b == q(3, 20));
    let show = |r: &Result<Rational>| r.as_ref().map_or_else(|e| e.to_string(), |v| v.to_string());
    // the float path with uniform-mass binning
    let fs = [0.35f64, 0.65, 0.35, 0.65];
    let fpart = uniform_mass(&fs, 1).unwrap();
    let fe = calibkit::empirical::ece(&fs, &labels, &fpart, 1).unwrap();
    let fp = calibkit::empirical::pde(&fs, &labels, &fpart, 1).unwrap();
    Check::single(
        "mixed bin: PCE = 0, PPD = 0.15",
        ok && fe.abs() <= 1e-15 && (fp - 0.15).abs() <= 1e-15,
        format!("exact PCE {}, PPD {}; f64 PCE {fe}, PPD {fp}", show(&pce), show(&ppd)),
    )
}

fn eight_points(a_etas: [Rational; 4]) -> Exact {
    let etas: Vec<Rational> = a_etas.into_iter().chain(std::iter::repeat_n(q(1, 5), 4)).collect();
    let d = DiscreteDistribution::uniform(&etas).unwrap();
    let f = ScoreTable::from_values(&d, &[0, 0, 0, 0, 1, 1, 1, 1].map(|v| q(v, 1))).unwrap();
    (d, f)
}

/// KT before and after average label assignment on the two 8-point
/// constructions and on a constant eta.
pub fn kt_constructions() -> Vec<(String, Rational, Rational, Rational, Rational)> {
    let cases = [
        ("a = (0.1, 0.1, 0.1, 1)", [q(1, 10), q(1, 10), q(1, 10), q(1, 1)], q(5, 7), q(1, 7)),
        ("a = (0.1, 0.3, 0.3, 1)", [q(1, 10), q(3, 10), q(3, 10), q(1, 1)], q(1, 7), q(5, 7)),
    ];
    let mut out = Vec::new();
    for (name, a, before, after) in cases {
        let (d, f) = eight_points(a);
        let g = average_label_assignment(&d, &f).unwrap();
        out.push((name.to_string(), kendall_tau(&d, &f).unwrap(), kendall_tau(&d, &g).unwrap(), before, after));
    }
    out
}

pub fn check_kt_constructions() -> Check {
    let mut failures = Vec::new();
    for (name, b, a, eb, ea) in kt_constructions() {
        if b != eb || a != ea {
            failures.push(format!("{name}: {b} -> {a}, expected {eb} -> {ea}"));
        }
    }
    // constant eta: no change
    let d = DiscreteDistribution::uniform(&vec![q(3, 10); 6]).unwrap();
    let f = ScoreTable::from_values(&d, &[0, 1, 2, 0, 1, 2].map(|v| q(v, 4))).unwrap();
    let g = average_label_assignment(&d, &f).unwrap();
    if kendall_tau(&d, &f).unwrap() != kendall_tau(&d, &g).unwrap() {
        failures.push("constant eta changed KT".into());
    }
    Check::new("KT constructions under average label assignment", failures, 3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Increase,
    Decrease,
    Equal,
}

fn direction(before: &Rational, after: &Rational) -> Direction {
    if after > before {
        Direction::Increase
    } else if after < before {
        Direction::Decrease
    } else {
        Direction::Equal
    }
}

/// Cells a (s 0.4), b (s 0.8), c (s 0.45), d (s 0.55), merging a and b.
fn four_cells(weights: [Rational; 4], etas: [Rational; 4]) -> Exact {
    let d = DiscreteDistribution::new(
        ["a", "b", "c", "d"]
            .iter()
            .zip(weights.into_iter().zip(etas))
            .map(|(id, (weight, eta))| Point { id: id.to_string(), weight, eta })
            .collect(),
    )
    .unwrap();
    let f = ScoreTable::from_values(&d, &[q(4, 10), q(8, 10), q(45, 100), q(55, 100)]).unwrap();
    (d, f)
}

/// `(measure, expected, observed)` for the nine merge witnesses.
pub fn merge_witnesses() -> Vec<(String, Direction, Direction)> {
    let mut out = Vec::new();
    let merge = |(d, f): &Exact| merge_cells(d, f, &q(4, 10), &q(8, 10), &MergeScore::Averaged).unwrap();
    let light = [q(1, 10), q(1, 10), q(4, 10), q(4, 10)];
    for (eta_a, expected) in [(q(2, 10), Direction::Increase), (q(8, 10), Direction::Decrease), (q(1, 2), Direction::Equal)] {
        let inst = four_cells(light.clone(), [eta_a.clone(), q(1, 2), q(0, 1), q(1, 1)]);
        let g = merge(&inst);
        let half = q(1, 2);
        let got = direction(&classification_loss(&inst.0, &inst.1, &half).unwrap(), &classification_loss(&inst.0, &g, &half).unwrap());
        out.push((format!("classification loss, eta(a) = {eta_a}"), expected, got));
    }
    let even = [q(1, 4), q(1, 4), q(1, 4), q(1, 4)];
    let kt_cases = [
        ("eta(a) < eta(c) < eta(d) < eta(b)", [q(1, 10), q(9, 10), q(3, 10), q(6, 10)], Direction::Decrease),
        ("eta(c) < eta(b) < eta(a) < eta(d)", [q(6, 10), q(3, 10), q(1, 10), q(9, 10)], Direction::Increase),
        ("constant eta", [q(1, 2), q(1, 2), q(1, 2), q(1, 2)], Direction::Equal),
    ];
    for (name, etas, expected) in kt_cases {
        let inst = four_cells(even.clone(), etas);
        let g = merge(&inst);
        let got = direction(&kendall_tau(&inst.0, &inst.1).unwrap(), &kendall_tau(&inst.0, &g).unwrap());
        out.push((format!("KT, {name}"), expected, got));
    }
    let mse_cases = [
        ((0, 1), Direction::Increase),
        ((1, 0), Direction::Decrease),
        ((25, 75), Direction::Equal),
    ];
    for ((ea, eb), expected) in mse_cases {
        let scale = if ea + eb == 1 { 1 } else { 100 };
        let d = DiscreteDistribution::uniform(&[q(ea, scale), q(eb, scale)]).unwrap();
        let f = ScoreTable::from_values(&d, &[q(0, 1), q(1, 1)]).unwrap();
        let g = merge_cells(&d, &f, &q(0, 1), &q(1, 1), &MergeScore::Averaged).unwrap();
        let got = direction(&mse(&d, &f).unwrap(), &mse(&d, &g).unwrap());
        out.push((format!("MSE, eta = ({}, {})", q(ea, scale), q(eb, scale)), expected, got));
    }
    out
}

pub fn check_merge_witnesses() -> Check {
    let w = merge_witnesses();
    let failures = w
        .iter()
        .filter(|(_, e, g)| e != g)
        .map(|(n, e, g)| format!("{n}: expected {e:?}, got {g:?}"))
        .collect();
    Check::new("merge witnesses for loss, KT and MSE", failures, w.len())
}

/// Random float distributions with etas in tenths; the constructor must
/// succeed exactly when one side of 1/2 has two eta levels.
pub fn check_accurate_alternative(eligible_target: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut eligible, mut total) = (0, 0);
    let mut failures = Vec::new();
    while eligible < eligible_target && total < 100 * eligible_target.max(1) {
        total += 1;
        let n = rng.gen_range(1..=12);
        // narrow eta pools make ineligible draws common too
        let pool: Vec<i64> = match rng.gen_range(0..3) {
            0 => (0..=10).collect(),
            1 => vec![rng.gen_range(0..5), rng.gen_range(5..=10)],
            _ => vec![rng.gen_range(0..=10)],
        };
        let raw: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(1..=10) as f64, pool[rng.gen_range(0..pool.len())] as f64 / 10.0)).collect();
        let total_w: f64 = raw.iter().map(|r| r.0).sum();
        let d = DiscreteDistribution::from_pairs(raw.iter().map(|&(w, e)| (w / total_w, e))).unwrap();
        let mut levels: Vec<f64> = raw.iter().map(|r| r.1).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let low = levels.iter().filter(|&&e| e < 0.5).count();
        let condition = low >= 2 || levels.len() - low >= 2;
        match construct_calibrated_accurate_alternative(&d) {
            None if condition => failures.push(format!("draw {total}: none despite levels {levels:?}")),
            None => {}
            Some(_) if !condition => failures.push(format!("draw {total}: predictor despite levels {levels:?}")),
            Some(f) => {
                eligible += 1;
                let moved: f64 = d.points().iter().filter(|p| f.get(&p.id) != Some(&p.eta)).map(|p| p.weight).sum();
                let ok = is_calibrated(&d, &f, &1e-12).unwrap() && admits_optimal_threshold(&d, &f, &1e-12).unwrap() && moved > 0.0;
                if !ok {
                    failures.push(format!("draw {total}: constructed predictor fails (moved mass {moved})"));
                }
            }
        }
    }
    if eligible < eligible_target {
        failures.push(format!("only {eligible} eligible draws"));
    }
    let mut c = Check::new("calibrated, accurate alternative to eta", failures, total);
    if c.passed {
        c.detail = format!("{eligible} eligible among {total} draws");
    }
    c
}

/// Every check: random suites and pinned constructions.
pub fn run(cfg: &PopcheckConfig, seed: u64) -> Vec<Check> {
    let mut checks = vec![check_pc_profiles(), check_mixed_bin(), check_kt_constructions(), check_merge_witnesses()];
    checks.extend(property_suites(cfg, seed));
    checks.push(check_accurate_alternative(cfg.alternative_instances, seed));
    checks
}
