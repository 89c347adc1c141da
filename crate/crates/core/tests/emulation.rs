use std::collections::BTreeMap;

use qsep::emulate::{aggregate_copy_count, copies_for_accuracy, emulation_error, random_query_circuit};
use qsep::oracle::{OracleAidedCircuit, OracleEnv};
use qsep::qcore::StateVector;
use qsep::Rng;

struct Cell {
    lambda: u32,
    q: usize,
    seed: u64,
}

fn corpus() -> Vec<Cell> {
    let mut out = Vec::new();
    let mut seed = 100;
    for lambda in [2u32, 4] {
        for q in 1..=3 {
            for _ in 0..2 {
                out.push(Cell { lambda, q, seed });
                seed += 1;
            }
        }
    }
    out
}

fn td(cell: &Cell, ell: usize) -> f64 {
    let mut rng = Rng::from_seed(cell.seed);
    let env = OracleEnv::sample(&[cell.lambda], &mut rng).unwrap();
    let c = random_query_circuit(&vec![cell.lambda; cell.q], 1, &mut rng).unwrap();
    let input = StateVector::random(c.num_qubits(), &mut rng).unwrap();
    let ell: BTreeMap<u32, usize> = [(cell.lambda, ell)].into();
    emulation_error(&c, &env, &ell, &input).unwrap().exact_td
}

#[test]
fn distance_is_non_increasing_in_copy_count() {
    for cell in corpus() {
        let tds: Vec<f64> = [3, 7, 15, 31].iter().map(|&l| td(&cell, l)).collect();
        for w in tds.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "lambda={} q={} {tds:?}", cell.lambda, cell.q);
        }
    }
}

#[test]
fn aggregate_copy_count_stays_within_the_theorem_bound() {
    // 2q^2/eps^2 - 1 copies make 2q/sqrt(t+1) equal sqrt(2) eps
    for cell in corpus() {
        for eps in [0.5, 0.25] {
            let t = aggregate_copy_count(cell.q, eps).unwrap();
            let d = td(&cell, t);
            assert!(d <= std::f64::consts::SQRT_2 * eps + 1e-12, "lambda={} q={} eps={eps} td={d}", cell.lambda, cell.q);
        }
    }
}

#[test]
fn aggregate_copy_count_can_miss_eps() {
    // one query on a state orthogonal to |1>|S->: inner product (t-1)/(t+1)
    let env = OracleEnv::sample(&[2], &mut Rng::from_seed(1)).unwrap();
    let mut c = OracleAidedCircuit::new(3);
    c.oracle(2, &[0, 1, 2]).unwrap();
    let input = StateVector::zero(3).unwrap();
    let t = aggregate_copy_count(1, 0.5).unwrap();
    let ell: BTreeMap<u32, usize> = [(2, t)].into();
    let r = emulation_error(&c, &env, &ell, &input).unwrap();
    let ip = (t as f64 - 1.0) / (t as f64 + 1.0);
    assert!((r.exact_td - (1.0 - ip * ip).sqrt()).abs() < 1e-10);
    assert!(r.exact_td > 0.5);
}

#[test]
fn corrected_copy_count_reaches_eps() {
    for cell in corpus() {
        for eps in [0.5, 0.25] {
            let t = copies_for_accuracy(cell.q, eps).unwrap();
            let d = td(&cell, t);
            assert!(d <= eps, "lambda={} q={} eps={eps} t={t} td={d}", cell.lambda, cell.q);
        }
    }
}
