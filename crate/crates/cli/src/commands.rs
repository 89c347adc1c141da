//! The ten experiments. Each reads its keys from an [`ExperimentConfig`],
//! runs trial-parallel with one random stream per trial, and fills an
//! [`ExperimentReport`] whose verdicts are recomputable from its numbers.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use qsep::attacks::{
    forgery_game, keyed_template, oracle_echo_owsg, owsg_game, subset_pair_money, swap_test_owsg, wiesner_money,
    wiesner_owsg, EchoForger, Forger, MoneyParams, MoneyScheme, OwsgCandidate, OwsgParams, StatisticalForger,
};
use qsep::emulate::{emulation_error, generate_s_minus, project_via_reflection, random_query_circuit, single_query_claim};
use qsep::oracle::{defer_measurements, parse_circuit, sample_subset, OracleAidedCircuit, OracleEnv};
use qsep::qcore::StateVector;
use qsep::qefid::{
    copy_advantage_experiment, distinguisher_catalog, exact_gap, exact_sd, sd_closed_form, statistical_lemma_bound,
    statistical_lemma_experiment, yao_transform, Distinguisher, ExactMembership, LemmaMode, Resources, Sampler,
    SubsetSampler, UniformSampler,
};
use qsep::tomography::{
    exact_accept_prob_pure, exact_table, gentle_batch_size, gentle_search, shadow_batch_size, shadow_tomography,
    Copies, Estimator, FnFamily, Input,
};
use qsep::{Bits, Error, Rng, C64};

use crate::config::{ExperimentConfig, Mode};
use crate::report::{ExperimentReport, Table, Verdict};
use crate::CliError;

type Out = Result<ExperimentReport, CliError>;

fn three_sigma(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n.max(1) as f64).sqrt()
}

/// Independent seed for sub-experiment `k`.
fn sub_seed(seed: u64, k: u64) -> u64 {
    Rng::for_trial(seed, k).fork().seed()
}

fn estimator(cfg: &ExperimentConfig, default: Estimator) -> Result<Estimator, CliError> {
    match cfg.get_str("estimator") {
        None => Ok(match cfg.get::<Mode>("mode")? {
            Some(Mode::Exact) => Estimator::Exact,
            Some(Mode::Sampled) => Estimator::Measured,
            None => default,
        }),
        Some("exact") => Ok(Estimator::Exact),
        Some("measured") => Ok(Estimator::Measured),
        Some(o) => Err(CliError::Config(format!("estimator `{o}` is not exact or measured"))),
    }
}

fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Exact => "exact",
        Estimator::Measured => "measured",
    }
}

fn even_lambda(l: u32) -> Result<u32, CliError> {
    if l == 0 || l % 2 == 1 || l > 20 {
        return Err(CliError::Config(format!("lambda = {l} must be even and in [2, 20]")));
    }
    Ok(l)
}

fn rate(successes: usize, trials: usize) -> f64 {
    if trials == 0 {
        0.0
    } else {
        successes as f64 / trials as f64
    }
}

fn trials_key(cfg: &ExperimentConfig, default: usize) -> Result<usize, CliError> {
    cfg.ranged("trials", default, 1, 10_000_000)
}

pub fn qefid_sd(cfg: &ExperimentConfig, mut r: ExperimentReport) -> Out {
    cfg.check_keys("qefid-sd", &["lambda"])?;
    let lambdas = cfg.list_or("lambda", &[2u32, 4, 6])?;
    r.table = Table::new(&["lambda", "subset_size", "sd", "closed_form", "abs_diff"]);
    for (i, &l) in lambdas.iter().enumerate() {
        let l = even_lambda(l)?;
        let spec = sample_subset(l, &mut Rng::for_trial(r.seed, i as u64))?;
        let sd = exact_sd(&spec);
        let closed = sd_closed_form(l);
        r.table
            .push(vec![json!(l), json!(spec.members().len()), json!(sd), json!(closed), json!((sd - closed).abs())]);
        r.verdict(Verdict::close(
            &format!("sd_lambda_{l}"),
            format!("|{sd} - (1 - 2^(-{l}/2) = {closed})| <= 1e-12"),
            sd,
            closed,
            1e-12,
        ));
    }
    Ok(r)
}

pub fn qefid_yao(cfg: &ExperimentConfig, mut r: ExperimentReport) -> Out {
    cfg.check_keys("qefid-yao", &["lambda", "trials"])?;
    let l = even_lambda(cfg.get_or("lambda", 4u32)?)?;
    let trials: usize = cfg.get_or("trials", 0)?;
    let mut rng = Rng::for_trial(r.seed, 0);
    let spec = sample_subset(l, &mut rng)?;
    let a = ExactMembership { lambda: l };
    let (s0, s1) = (SubsetSampler { lambda: l }, UniformSampler { lambda: l });
    let gap = exact_gap(&a, &s0, &s1, &spec);
    let t = yao_transform(&a, &s0, &s1);
    let gap_t = exact_gap(&t, &s0, &s1, &spec);
    let expected_gap = sd_closed_form(l);
    r.set("gap", gap);
    r.set("transformed_gap", gap_t);
    r.set("gap_squared", gap * gap);
    r.verdict(Verdict::close(
        "membership_gap",
        format!("|{gap}| == 1 - 2^(-{l}/2) = {expected_gap}"),
        gap.abs(),
        expected_gap,
        1e-12,
    ));
    r.verdict(Verdict::close(
        "transformed_gap_is_square",
        format!("{gap_t} == ({gap})^2 = {}", gap * gap),
        gap_t,
        gap * gap,
        1e-9,
    ));
    r.verdict(Verdict::at_least("transformed_gap_positive", format!("{gap_t} >= 0"), gap_t, 0.0, 0.0));
    r.table = Table::new(&["side", "runs", "accepts", "frequency", "exact"]);
    if trials > 0 {
        let env = OracleEnv::from_specs([spec.clone()]);
        let outcomes: Vec<(bool, bool)> = (0..trials)
            .into_par_iter()
            .map(|i| -> Result<(bool, bool), Error> {
                let mut rng = Rng::for_trial(r.seed, i as u64 + 1);
                let side_one = i % 2 == 1;
                let x = if side_one { s1.sample(&env, &mut rng)? } else { s0.sample(&env, &mut rng)? };
                let mut res = Resources {
                    env: Some(&env),
                    copies: Vec::new(),
                };
                Ok((side_one, t.run(x, &mut res, &mut rng)?))
            })
            .collect::<Result<_, _>>()?;
        let mut freq = [0.0; 2];
        for side in [false, true] {
            let runs: Vec<_> = outcomes.iter().filter(|o| o.0 == side).collect();
            let acc = runs.iter().filter(|o| o.1).count();
            let sampler: &dyn Sampler = if side { &s1 } else { &s0 };
            let exact: f64 = Bits::all(l).map(|x| sampler.prob(x, &spec) * t.accept_prob(x, &spec)).sum();
            freq[side as usize] = rate(acc, runs.len());
            r.table
                .push(vec![json!(side as u8), json!(runs.len()), json!(acc), json!(freq[side as usize]), json!(exact)]);
        }
        let empirical = freq[0] - freq[1];
        let half = trials.div_ceil(2);
        // each frequency has variance at most 1/(4 runs)
        let tol = 3.0 * (0.25 / half as f64 + 0.25 / (trials / 2).max(1) as f64).sqrt();
        r.set("empirical_transformed_gap", empirical);
        r.verdict(Verdict::close(
            "sampled_transformed_gap",
            format!("|{empirical} - {gap_t}| <= 3 sigma = {tol}"),
            empirical,
            gap_t,
            tol,
        ));
    }
    Ok(r)
}

pub fn statistical_lemma(cfg: &ExperimentConfig, mut r: ExperimentReport) -> Out {
    cfg.check_keys("statistical-lemma", &["lambda", "t", "td", "count", "trials", "margin"])?;
    let l = even_lambda(cfg.get_or("lambda", 8u32)?)?;
    let ts = cfg.list_or("t", &[1usize, 2])?;
    let count = cfg.get_or("count", 256usize)?;
    let trials = trials_key(cfg, 10_000)?;
    let margin = cfg.get_or("margin", 0.05)?;
    let td_default = match cfg.get::<Mode>("mode")? {
        Some(Mode::Exact) => "exact",
        Some(Mode::Sampled) => "sampled",
        None if l <= 4 && ts.iter().all(|&t| t <= 2) => "exact",
        None => "off",
    };
    let td_mode = cfg.get_str("td").unwrap_or(td_default).to_string();
    r.table = Table::new(&["lambda", "t", "kind", "name", "measured", "exact", "bound", "trials"]);
    let mut stream = 0u64;
    for &t in &ts {
        if t == 0 {
            return Err(CliError::Config("t must be at least 1".into()));
        }
        let bound = statistical_lemma_bound(l, t);
        let cap = bound.min(1.0);
        let formula = format!("2^(-{l}/2+1) + sqrt({t} * 2^(-{l}/2)) = {bound}");
        let mode = match td_mode.as_str() {
            "exact" => Some(LemmaMode::Exact),
            "sampled" => Some(LemmaMode::Sampled { count }),
            "off" => None,
            o => return Err(CliError::Config(format!("td `{o}` is not exact, sampled or off"))),
        };
        if let Some(mode) = mode {
            stream += 1;
            let res = statistical_lemma_experiment(l, t, mode, &mut Rng::for_trial(r.seed, stream))?;
            r.table.push(vec![
                json!(l),
                json!(t),
                json!("trace_distance"),
                json!(td_mode),
                json!(res.td),
                json!(res.td),
                json!(bound),
                json!(null),
            ]);
            r.set(&format!("td_t{t}"), res.td);
            r.verdict(Verdict::at_most(
                &format!("td_t{t}"),
                format!("{} <= min(1, {formula})", res.td),
                res.td,
                cap,
                1e-12,
            ));
        }
        for a in distinguisher_catalog(t) {
            stream += 1;
            let adv = copy_advantage_experiment(a.as_ref(), l, trials, sub_seed(r.seed, stream))?;
            r.table.push(vec![
                json!(l),
                json!(t),
                json!("advantage"),
                json!(adv.distinguisher),
                json!(adv.empirical),
                json!(adv.exact),
                json!(adv.bound),
                json!(adv.trials),
            ]);
            let b = statistical_lemma_bound(l, adv.t.max(1));
            r.verdict(Verdict::at_most(
                &format!("empirical_{}_t{t}", adv.distinguisher),
                format!("{} <= {b} + {margin}", adv.empirical),
                adv.empirical,
                b,
                margin,
            ));
            r.verdict(Verdict::at_most(
                &format!("exact_{}_t{t}", adv.distinguisher),
                format!("{} <= min(1, {b})", adv.exact),
                adv.exact,
                b.min(1.0),
                1e-12,
            ));
        }
    }
    Ok(r)
}

fn load_circuit(path: &str) -> Result<OracleAidedCircuit, CliError> {
    let text = std::fs::read_to_string(Path::new(path)).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
    let c = parse_circuit(&text)?;
    Ok(if c.is_unitary() { c } else { defer_measurements(&c)?.circuit })
}

struct Cell {
    lambda: u32,
    q: usize,
    ell: usize,
    index: usize,
    source: String,
}

pub fn emulate_bound(cfg: &ExperimentConfig, mut r: ExperimentReport) -> Out {
    cfg.check_keys("emulate-bound", &["lambda", "q", "ell", "circuits", "extra", "circuit"])?;
    let lambdas = cfg.list_or("lambda", &[2u32, 4])?;
    let qs = cfg.list_or("q", &[1usize, 2, 3])?;
    let ells = cfg.list_or("ell", &[7usize, 15, 31])?;
    let per_cell = cfg.ranged("circuits", 2usize, 1, 1000)?;
    let extra = cfg.ranged("extra", 1usize, 0, 8)?;
    let file = cfg.get_str("circuit").map(load_circuit).transpose()?;
    for &l in &lambdas {
        even_lambda(l)?;
    }
    if ells.contains(&0) {
        return Err(CliError::Config("ell must be at least 1".into()));
    }
    let mut cells = Vec::new();
    for &lambda in &lambdas {
        for &q in &qs {
            for &ell in &ells {
                for index in 0..per_cell {
                    cells.push(Cell {
                        lambda,
                        q,
                        ell,
                        index,
                        source: "random".into(),
                    });
                }
            }
        }
    }
    if let Some(c) = &file {
        for &ell in &ells {
            let lambda = c.query_counts().keys().next().copied().unwrap_or(0);
            cells.push(Cell {
                lambda,
                q: c.total_queries(),
                ell,
                index: 0,
                source: "file".into(),
            });
        }
    }
    let seed = r.seed;
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| -> Result<Vec<Value>, Error> {
            let mut rng = Rng::for_trial(seed, i as u64);
            let (circuit, env) = match (&file, cell.source.as_str()) {
                (Some(c), "file") => {
                    let lambdas: Vec<u32> = c.query_counts().keys().copied().collect();
                    (c.clone(), OracleEnv::sample(&lambdas, &mut rng)?)
                }
                _ => {
                    let env = OracleEnv::sample(&[cell.lambda], &mut rng)?;
                    (random_query_circuit(&vec![cell.lambda; cell.q], extra, &mut rng)?, env)
                }
            };
            let ell: BTreeMap<u32, usize> = circuit.query_counts().keys().map(|&l| (l, cell.ell)).collect();
            let input = StateVector::zero(circuit.num_qubits())?;
            let rep = emulation_error(&circuit, &env, &ell, &input)?;
            let terms: Vec<String> = circuit
                .query_counts()
                .iter()
                .map(|(l, q)| format!("2*{q}/sqrt({}+1)", ell[l]))
                .collect();
            let formula = format!("{} <= min(1, {}) = {}", rep.exact_td, terms.join(" + "), rep.bound);
            let claim = if circuit.total_queries() == 1 {
                json!(single_query_claim(&circuit, &env, cell.ell, &input)?)
            } else {
                Value::Null
            };
            Ok(vec![
                json!(cell.source),
                json!(cell.lambda),
                json!(circuit.total_queries()),
                json!(cell.ell),
                json!(cell.index),
                json!(circuit.num_qubits()),
                json!(rep.backend),
                json!(rep.exact_td),
                json!(rep.bound),
                json!(rep.exact_td - rep.bound),
                json!(formula),
                json!(rep.inner_re),
                json!(rep.inner_im),
                claim,
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;
    r.table = Table::new(&[
        "source",
        "lambda",
        "q",
        "ell",
        "circuit",
        "qubits",
        "backend",
        "exact_td",
        "bound",
        "excess",
        "bound_formula",
        "inner_re",
        "inner_im",
        "claim",
    ]);
    let mut worst = f64::NEG_INFINITY;
    let mut within = 0;
    let mut claim_err: Option<f64> = None;
    for row in rows {
        let excess = row[9].as_f64().unwrap_or(f64::NAN);
        worst = worst.max(excess);
        within += usize::from(excess <= 1e-12);
        if let Some(c) = row[13].as_f64() {
            let (re, im) = (row[11].as_f64().unwrap_or(f64::NAN), row[12].as_f64().unwrap_or(f64::NAN));
            let e = (re - c).abs().max(im.abs());
            claim_err = Some(claim_err.map_or(e, |m: f64| m.max(e)));
        }
        r.table.push(row);
    }
    let n = r.table.rows.len();
    r.set("circuits", n);
    r.set("within_bound", within);
    r.set("fraction_within_bound", rate(within, n));
    r.verdict(Verdict::at_most(
        "td_within_bound",
        format!("max over {n} circuits of (td - 2q/sqrt(ell+1)) = {worst} <= 0"),
        worst,
        0.0,
        1e-12,
    ));
    if let Some(e) = claim_err {
        r.verdict(Verdict::at_most(
            "single_query_inner_product",
            format!("max |<real|emulated> - ((ell-1)/(ell+1) + 2/(ell+1) w)| = {e} <= 1e-8"),
            e,
            0.0,
            1e-8,
        ));
    }
    Ok(r)
}

/// A state whose squared overlap with `target` is exactly `overlap`.
fn with_overlap(target: &StateVector, overlap: f64, rng: &mut Rng) -> Result<StateVector, Error> {
    let n = target.num_qubits();
    let raw = StateVector::random(n, rng)?;
    let ip = target.inner(&raw)?;
    let orth: Vec<C64> = raw
        .amplitudes()
        .iter()
        .zip(target.amplitudes())
        .map(|(a, t)| a - ip * t)
        .collect();
    let orth = StateVector::normalized(orth)?;
    let (a, b) = (overlap.sqrt(), (1.0 - overlap).sqrt());
    let amps: Vec<C64> = target
        .amplitudes()
        .iter()
        .zip(orth.amplitudes())
        .map(|(t, o)| t * a + o * b)
        .collect();
    StateVector::normalized(amps)
}

pub fn project_reflect(cfg: &ExperimentConfig, mut r: ExperimentReport) -> Out {
    cfg.check_keys("project-reflect", &["trials", "overlap", "n"])?;
    let trials = trials_key(cfg, 10_000)?;
    let overlap = cfg.ranged("overlap", 0.5, 0.0, 1.0)?;
    let n = cfg.ranged("n", 2usize, 1, 12)?;
    let mut rng = Rng::for_trial(r.seed, 0);
    let target = StateVector::random(n, &mut rng)?;
    let input = with_overlap(&target, overlap, &mut rng)?;
    let exact = target.inner(&input)?.norm_sqr();
    let seed = r.seed;
    let runs = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(bool, f64, f64), Error> {
            let p = project_via_reflection(&input, &target, &mut Rng::for_trial(seed, i as u64 + 1))?;
            let fid = if p.success { p.output.fidelity(&target)? } else { f64::NAN };
            Ok((p.success, fid, p.success_probability))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let successes = runs.iter().filter(|x| x.0).count();
    let freq = rate(successes, trials);
    let min_fid = runs.iter().filter(|x| x.0).map(|x| x.1).fold(1.0f64, f64::min);
    let p_exact = runs.first().map_or(exact, |x| x.2);
    let tol = three_sigma(overlap, trials);
    r.set("successes", successes);
    r.set("frequency", freq);
    r.set("exact_overlap", exact);
    r.set("min_success_fidelity", min_fid);
    r.table = Table::new(&["trials", "successes", "frequency", "overlap", "success_probability", "min_fidelity"]);
    r.table
        .push(vec![json!(trials), json!(successes), json!(freq), json!(overlap), json!(p_exact), json!(min_fid)]);
    r.verdict(Verdict::close(
        "success_frequency",
        format!("|{freq} - |<psi|phi>|^2 = {overlap}| <= 3 sigma = {tol}"),
        freq,
        overlap,
        tol,
    ));
    r.verdict(Verdict::close(
        "success_probability",
        format!("|{p_exact} - {overlap}| <= 1e-12"),
        p_exact,
        overlap,
        1e-12,
    ));
    r.verdict(Verdict::at_least(
        "post_success_fidelity",
        format!("{min_fid} >= 1 - 1e-9"),
        min_fid,
        1.0,
        1e-9,
    ));
    Ok(r)
}

pub fn copygen(cfg: &ExperimentConfig, mut r: ExperimentReport) -> Out {
    cfg.check_keys("copygen", &["lambda", "kappa", "trials"])?;
    let l = even_lambda(cfg.get_or("lambda", 2u32)?)?;
    let kappa = cfg.ranged("kappa", 20usize, 1, 64)?;
    let trials = trials_key(cfg, 10_000)?;
    let seed = r.seed;
    // (succeeded, attempts, fidelity, queries charged)
    let runs = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(bool, usize, f64, u64), Error> {
            let mut rng = Rng::for_trial(seed, i as u64);
            let env = OracleEnv::sample(&[l], &mut rng)?;
            match generate_s_minus(&env, l, kappa, &mut rng) {
                Ok(g) => {
                    let fid = g.state.fidelity(&env.spec(l)?.states().s_minus)?;
                    Ok((true, g.attempts, fid, env.total_queries()))
                }
                Err(Error::GenerationFailed { attempts }) => Ok((false, attempts, f64::NAN, env.total_queries())),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let successes = runs.iter().filter(|x| x.0).count();
    let failures = trials - successes;
    let attempts: usize = runs.iter().map(|x| x.1).sum();
    let per_attempt = rate(successes, attempts);
    let min_fid = runs.iter().filter(|x| x.0).map(|x| x.2).fold(1.0f64, f64::min);
    let mismatched = runs.iter().filter(|x| x.3 != x.1 as u64).count();
    let fail_p = (-(kappa as f64)).exp2();
    let fail_rate = rate(failures, trials);
    r.table = Table::new(&["attempts", "trials"]);
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for x in &runs {
        *hist.entry(x.1).or_insert(0) += 1;
    }
    for (a, c) in hist {
        r.table.push(vec![json!(a), json!(c)]);
    }
    r.set("successes", successes);
    r.set("failures", failures);
    r.set("attempts", attempts);
    r.set("per_attempt_success", per_attempt);
    r.set("min_fidelity", min_fid);
    let tol = three_sigma(0.5, attempts);
    r.verdict(Verdict::close(
        "per_attempt_success",
        format!("|{per_attempt} - 1/2| <= 3 sigma = {tol}"),
        per_attempt,
        0.5,
        tol,
    ));
    let ftol = three_sigma(fail_p, trials);
    r.verdict(Verdict::at_most(
        "failure_rate",
        format!("{fail_rate} <= 2^-{kappa} + 3 sigma = {fail_p} + {ftol}"),
        fail_rate,
        fail_p,
        ftol,
    ));
    r.verdict(Verdict::at_least("fidelity", format!("{min_fid} >= 1 - 1e-9"), min_fid, 1.0, 1e-9));
    r.verdict(Verdict::close(
        "queries_equal_attempts",
        format!("{mismatched} trials where charged queries != attempts"),
        mismatched as f64,
        0.0,
        0.0,
    ));
    Ok(r)
}

fn wiesner_family(n: usize) -> Result<(OwsgCandidate, FnFamily), CliError> {
    let cand = wiesner_owsg(n)?;
    let c = cand.clone();
    let env = OracleEnv::new();
    let family = FnFamily::new(cand.keys().to_vec(), cand.state_qubits, move |k, s| c.verify_prob(k, s, &env))?;
    Ok((cand, family))
}

pub fn gentle_search_bench(cfg: &ExperimentConfig, mut r: ExperimentReport) -> Out {
    cfg.check_keys("gentle-search-bench", &["n", "c", "eps", "delta", "trials", "estimator"])?;
    let n = cfg.ranged("n", 2usize, 1, 4)?;
    let c = cfg.ranged("c", 1.0, 0.0, 1.0)?;
    let eps = cfg.ranged("eps", 0.5, 1e-6, 1.0)?;
    let delta = cfg.ranged("delta", 0.5, 1e-9, 0.999_999)?;
    let trials = trials_key(cfg, 1000)?;
    let est = estimator(cfg, Estimator::Measured)?;
    let (cand, family) = wiesner_family(n)?;
    let keys = cand.keys().to_vec();
    let batch = gentle_batch_size(keys.len(), eps, delta);
    let seed = r.seed;
    let runs = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(Bits, Option<Bits>, f64, usize), Error> {
            let mut rng = Rng::for_trial(seed, i as u64);
            let k = keys[rng.below(keys.len())];
            let phi = cand.state(&k, &OracleEnv::new())?;
            let mut copies = Copies::pure(phi.clone(), keys.len() * batch);
            match gentle_search(&family, &mut copies, c, eps, delta, est, &mut rng) {
                Ok(o) => Ok((k, Some(o.key), exact_accept_prob_pure(&family, &o.key, &phi)?, o.copies_used)),
                Err(Error::SearchFailed) => Ok((k, None, 0.0, copies.used())),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ok = runs.iter().filter(|x| x.1.is_some() && x.2 >= c - eps).count();
    let found = runs.iter().filter(|x| x.1.is_some()).count();
    let rt = rate(ok, trials);
    let target = 1.0 - delta;
    let tol = three_sigma(target, trials);
    r.table = Table::new(&["trial", "key_star", "key", "exact_accept", "copies_used"]);
    for (i, x) in runs.iter().enumerate() {
        r.table.push(vec![
            json!(i),
            json!(x.0.to_string()),
            json!(x.1.map(|k| k.to_string())),
            json!(x.2),
            json!(x.3),
        ]);
    }
    r.set("keys", keys.len());
    r.set("batch_per_key", batch);
    r.set("estimator", estimator_name(est));
    r.set("found", found);
    r.set("successes", ok);
    r.set("rate", rt);
    r.set(
        "mean_copies_used",
        runs.iter().map(|x| x.3).sum::<usize>() as f64 / trials as f64,
    );
    r.verdict(Verdict::at_least(
        "search_success_rate",
        format!("{rt} >= (1 - {delta}) - 3 sigma = {target} - {tol}"),
        rt,
        target,
        tol,
    ));
    Ok(r)
}

pub fn shadow_bench(cfg: &ExperimentConfig, mut r: ExperimentReport) -> Out {
    cfg.check_keys("shadow-bench", &["n", "eps", "delta", "trials", "estimator"])?;
    let n = cfg.ranged("n", 2usize, 1, 4)?;
    let eps = cfg.ranged("eps", 0.1, 1e-3, 1.0)?;
    let delta = cfg.ranged("delta", 0.01, 1e-9, 0.999_999)?;
    let trials = trials_key(cfg, 1000)?;
    let est = estimator(cfg, Estimator::Measured)?;
    let (cand, family) = wiesner_family(n)?;
    let keys = cand.keys().to_vec();
    let batch = shadow_batch_size(keys.len(), eps, delta);
    let seed = r.seed;
    let runs = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(Bits, f64), Error> {
            let mut rng = Rng::for_trial(seed, i as u64);
            let k = keys[rng.below(keys.len())];
            let phi = cand.state(&k, &OracleEnv::new())?;
            let mut copies = Copies::pure(phi.clone(), keys.len() * batch);
            let table = shadow_tomography(&family, &mut copies, eps, delta, est, &mut rng)?;
            Ok((k, table.max_error(&exact_table(&family, &Input::Pure(phi))?)?))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ok = runs.iter().filter(|x| x.1 <= eps).count();
    let rt = rate(ok, trials);
    let target = 1.0 - delta;
    let tol = three_sigma(target, trials);
    r.table = Table::new(&["trial", "key_star", "max_error"]);
    for (i, x) in runs.iter().enumerate() {
        r.table.push(vec![json!(i), json!(x.0.to_string()), json!(x.1)]);
    }
    r.set("keys", keys.len());
    r.set("batch_per_key", batch);
    r.set("copies_per_run", batch * keys.len());
    r.set("estimator", estimator_name(est));
    r.set("rate", rt);
    r.set("worst_error", runs.iter().map(|x| x.1).fold(0.0, f64::max));
    r.verdict(Verdict::at_least(
        "shadow_success_rate",
        format!("{rt} >= (1 - {delta}) - 3 sigma = {target} - {tol}"),
        rt,
        target,
        tol,
    ));
    Ok(r)
}

fn owsg_candidate(cfg: &ExperimentConfig) -> Result<OwsgCandidate, CliError> {
    match cfg.get_str("candidate").unwrap_or("wiesner") {
        "wiesner" => Ok(wiesner_owsg(cfg.ranged("n", 2usize, 1, 4)?)?),
        "oracle-echo" => {
            let kappa = cfg.ranged("kappa", 2u32, 1, 4)?;
            let l = even_lambda(cfg.get_or("lambda", 2u32)?)?;
            Ok(oracle_echo_owsg(kappa, l)?)
        }
        "template" => {
            let path = cfg
                .get_str("template")
                .ok_or_else(|| CliError::Config("candidate=template needs a `template` file".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
            let bits = cfg.ranged("key_bits", 2u32, 1, 8)?;
            let width = cfg.ranged("width", 1usize, 1, 8)?;
            let copies = cfg.ranged("copies", 1usize, 1, 4)?;
            Ok(swap_test_owsg("template", Bits::all(bits).collect(), width, copies, keyed_template(&text)?)?)
        }
        o => Err(CliError::Config(format!("candidate `{o}` is not wiesner, oracle-echo or template"))),
    }
}

pub fn owsg_attack(cfg: &ExperimentConfig, mut r: ExperimentReport) -> Out {
    cfg.check_keys(
        "owsg-attack",
        &[
            "candidate",
            "n",
            "kappa",
            "lambda",
            "template",
            "key_bits",
            "width",
            "copies",
            "trials",
            "estimator",
            "slack",
            "eps",
            "delta",
            "copies_per_query",
            "challenge_copies",
            "retry_budget",
            "min_rate",
        ],
    )?;
    let cand = owsg_candidate(cfg)?;
    let est = estimator(cfg, Estimator::Exact)?;
    let d = OwsgParams::default();
    let params = OwsgParams {
        copies_per_query: cfg.get("copies_per_query")?,
        slack: cfg.ranged("slack", d.slack, 1e-6, 0.999)?,
        eps: cfg.ranged("eps", d.eps, 1e-6, 1.0)?,
        delta: cfg.ranged("delta", d.delta, 1e-9, 0.999_999)?,
        estimator: est,
        challenge_copies: cfg.get("challenge_copies")?,
        retry_budget: cfg.ranged("retry_budget", d.retry_budget, 1, 1 << 20)?,
    };
    let trials = trials_key(cfg, 200)?;
    let min_rate = cfg.ranged("min_rate", if est == Estimator::Exact { 0.9 } else { 0.5 }, 0.0, 1.0)?;
    let g = owsg_game(&cand, &params, trials as u64, r.seed)?;
    let q = cand.query_bound();
    let rq = params.copies_for(q);
    r.table = Table::new(&[
        "trial",
        "key_star",
        "key",
        "real_accept",
        "emulated_accept",
        "copies_used",
        "resource_attempts",
        "outcome",
        "success",
    ]);
    for t in &g.records {
        r.table.push(vec![
            json!(t.trial),
            json!(t.key_star.to_string()),
            json!(t.key.map(|k| k.to_string())),
            json!(t.real_accept),
            json!(t.emulated_accept),
            json!(t.copies_used),
            json!(t.resource_attempts),
            json!(t.outcome),
            json!(t.success),
        ]);
    }
    let bound = if q == 0 { 0.0 } else { (2.0 * q as f64 / ((rq + 1) as f64).sqrt()).min(1.0) };
    let worst_gap = g
        .records
        .iter()
        .filter_map(|t| Some((t.real_accept? - t.emulated_accept?).abs()))
        .fold(0.0, f64::max);
    r.set("candidate", &g.candidate);
    r.set("keys", cand.keys().len());
    r.set("query_bound", q);
    r.set("copies_per_query", rq);
    r.set("emulation_bound", bound);
    r.set("estimator", estimator_name(est));
    r.set("successes", g.successes);
    r.set("failures", g.failures);
    r.set("rate", g.rate);
    r.verdict(Verdict::at_least(
        "inversion_rate",
        format!("{} successes / {trials} = {} >= {min_rate} (success: real accept >= 1/3)", g.successes, g.rate),
        g.rate,
        min_rate,
        0.0,
    ));
    if q > 0 {
        r.verdict(Verdict::at_most(
            "emulated_vs_real",
            format!("max |real - emulated| = {worst_gap} <= 2*{q}/sqrt({rq}+1) = {bound}"),
            worst_gap,
            bound,
            1e-9,
        ));
    }
    Ok(r)
}

fn money_scheme(cfg: &ExperimentConfig) -> Result<(MoneyScheme, usize), CliError> {
    match cfg.get_str("scheme").unwrap_or("wiesner") {
        "wiesner" => Ok((wiesner_money(cfg.ranged("n", 3usize, 1, 4)?)?, 2)),
        "subset-pair" => {
            let kappa = cfg.ranged("kappa", 2u32, 1, 4)?;
            let l = even_lambda(cfg.get_or("lambda", 2u32)?)?;
            Ok((subset_pair_money(kappa, l)?, 1))
        }
        o => Err(CliError::Config(format!("scheme `{o}` is not wiesner or subset-pair"))),
    }
}

pub fn money_forge(cfg: &ExperimentConfig, mut r: ExperimentReport) -> Out {
    cfg.check_keys(
        "money-forge",
        &[
            "scheme",
            "n",
            "kappa",
            "lambda",
            "m",
            "trials",
            "forger",
            "pad",
            "eta",
            "eps_st",
            "delta_st",
            "estimator",
            "copies_per_query",
            "repetitions",
            "retry_budget",
            "min_rate",
        ],
    )?;
    let (scheme, default_m) = money_scheme(cfg)?;
    let m = cfg.ranged("m", default_m, 1, 16)?;
    let trials = trials_key(cfg, 200)?;
    let est = estimator(cfg, Estimator::Exact)?;
    let d = MoneyParams::default();
    let params = MoneyParams {
        eta: cfg.get_or("eta", d.eta)?,
        eps_st: cfg.get_or("eps_st", d.eps_st)?,
        delta_st: cfg.get_or("delta_st", d.delta_st)?,
        estimator: est,
        copies_per_query: cfg.get("copies_per_query")?,
        repetitions: cfg.ranged("repetitions", d.repetitions, 1, 64)?,
        retry_budget: cfg.ranged("retry_budget", d.retry_budget, 1, 1 << 20)?,
    };
    params.validate()?;
    let forger_name = cfg.get_str("forger").unwrap_or("statistical").to_string();
    let pad = cfg.ranged("pad", 1usize, 1, 8)?;
    let forger: Box<dyn Forger> = match forger_name.as_str() {
        "statistical" => Box::new(StatisticalForger { params: params.clone() }),
        "echo" => Box::new(EchoForger { pad }),
        o => return Err(CliError::Config(format!("forger `{o}` is not statistical or echo"))),
    };
    let g = forgery_game(&scheme, forger.as_ref(), m, trials as u64, r.seed)?;
    r.table = Table::new(&[
        "trial",
        "key",
        "outputs",
        "accepts",
        "success",
        "outcome",
        "chosen_key",
        "single_accept",
        "verify_oracle_calls",
        "forger_queries",
    ]);
    for t in &g.records {
        r.table.push(vec![
            json!(t.trial),
            json!(t.key.to_string()),
            json!(t.outputs),
            json!(t.accepts),
            json!(t.success),
            json!(t.outcome),
            json!(t.chosen_key.map(|k| k.to_string())),
            json!(t.single_accept),
            json!(t.verify_oracle_calls),
            json!(t.forger_queries),
        ]);
    }
    r.set("scheme", &g.scheme);
    r.set("forger", &g.forger);
    r.set("m", m);
    r.set("estimator", estimator_name(est));
    r.set("successes", g.successes);
    r.set("rate", g.rate);
    r.set("aborts", g.aborts);
    r.set("errors", g.errors);
    r.set("verify_oracle_calls", g.verify_oracle_calls);
    let first_error = g.records.iter().find(|t| t.outcome != "ok").map(|t| t.outcome.clone());
    r.set("first_failure_outcome", first_error);
    match forger_name.as_str() {
        "statistical" => {
            let min_rate = cfg.ranged("min_rate", if est == Estimator::Exact { 0.9 } else { 0.6 }, 0.0, 1.0)?;
            r.verdict(Verdict::at_least(
                "forgery_rate",
                format!("{} runs with >= {} verifying / {trials} = {} >= {min_rate}", g.successes, m + 1, g.rate),
                g.rate,
                min_rate,
                0.0,
            ));
            r.verdict(Verdict::close(
                "verify_oracle_calls",
                format!("{} verification-oracle calls == 0", g.verify_oracle_calls),
                g.verify_oracle_calls as f64,
                0.0,
                0.0,
            ));
            if est == Estimator::Exact {
                r.verdict(Verdict::close(
                    "abort_rate",
                    format!("{} aborts / {trials} == 0", g.aborts),
                    rate(g.aborts as usize, trials),
                    0.0,
                    0.0,
                ));
            }
            let floor = scheme.mu * (1.0 - 10.0 * params.eta) - 2.0 * params.effective_eps();
            let worst = g.records.iter().filter_map(|t| t.single_accept).fold(f64::INFINITY, f64::min);
            if worst.is_finite() {
                r.verdict(Verdict::at_least(
                    "single_accept_floor",
                    format!(
                        "min Pr[Verify(k*, Mint(k'))] = {worst} >= mu(1 - 10 eta) - 2 eps = {}(1 - 10*{}) - 2*{} = {floor}",
                        scheme.mu,
                        params.eta,
                        params.effective_eps()
                    ),
                    worst,
                    floor,
                    1e-9,
                ));
            }
        }
        _ => {
            let mut rng = Rng::for_trial(r.seed, u64::MAX);
            let env = scheme.sample_env(&mut rng)?;
            let key = scheme.keygen(&mut rng);
            let p_g = scheme.verify_prob(&key, &scheme.garbage()?, &env)?;
            let expected = 1.0 - (1.0 - p_g).powi(pad as i32);
            let tol = three_sigma(expected, trials);
            r.set("garbage_accept", p_g);
            r.verdict(Verdict::close(
                "echo_rate",
                format!("|{} - (1 - (1 - {p_g})^{pad}) = {expected}| <= 3 sigma = {tol}", g.rate),
                g.rate,
                expected,
                tol,
            ));
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(f: fn(&ExperimentConfig, ExperimentReport) -> Out, cfg: ExperimentConfig) -> ExperimentReport {
        let seed = cfg.seed().unwrap();
        f(&cfg, ExperimentReport::new("t", seed, cfg.echo())).unwrap()
    }

    #[test]
    fn with_overlap_hits_the_requested_overlap() {
        let mut rng = Rng::from_seed(3);
        let t = StateVector::random(3, &mut rng).unwrap();
        for o in [0.0, 0.25, 0.5, 1.0] {
            let s = with_overlap(&t, o, &mut rng).unwrap();
            assert!((t.inner(&s).unwrap().norm_sqr() - o).abs() < 1e-12);
        }
    }

    #[test]
    fn sd_report_matches_closed_form() {
        let r = run(qefid_sd, ExperimentConfig::default().with("seed", 1).with("lambda", 4));
        assert!(r.pass);
        assert_eq!(r.table.rows[0][2], json!(0.75));
    }

    #[test]
    fn yao_sampled_gap_is_checked() {
        let r = run(qefid_yao, ExperimentConfig::default().with("seed", 2).with("trials", 4000));
        assert!(r.pass, "{:?}", r.verdicts);
        assert_eq!(r.verdicts.len(), 4);
    }

    #[test]
    fn emulate_bound_single_cell_with_claim() {
        let cfg = ExperimentConfig::default()
            .with("seed", 5)
            .with("lambda", 2)
            .with("q", 1)
            .with("ell", 15)
            .with("circuits", 1);
        let r = run(emulate_bound, cfg);
        assert!(r.pass, "{:?}", r.verdicts);
        assert_eq!(r.table.rows[0][8], json!(0.5));
        assert!(r.verdict_named("single_query_inner_product").is_some());
    }

    #[test]
    fn odd_lambda_is_a_config_error() {
        let cfg = ExperimentConfig::default().with("seed", 1).with("lambda", 3);
        assert!(matches!(qefid_sd(&cfg, ExperimentReport::new("t", 1, cfg.echo())), Err(CliError::Config(_))));
    }

    #[test]
    fn echo_forger_verdict_uses_garbage_rate() {
        let cfg = ExperimentConfig::default()
            .with("seed", 4)
            .with("forger", "echo")
            .with("pad", 2)
            .with("trials", 400);
        let r = run(money_forge, cfg);
        assert!(r.pass, "{:?}", r.verdicts);
        let p = r.summary["garbage_accept"].as_f64().unwrap();
        assert!((p - 0.125).abs() < 1e-12);
    }
}
