//! Randomized comparisons of the production routines against [`crate::oracle`].
//!
//! Each suite draws its instances from a fixed seed, so a run is
//! reproducible and the same suites back the `selftest` command and the
//! acceptance tests.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elicit::{gamma_schedule, recommend, select_query_robust, worst_case_values, NoiseParams};
use crate::lp::{solve_lp, Constraint, LinearProgram, LpSolution, Relation};
use crate::model::{AlternativeSet, QueryHistory, Response};
use crate::oracle;

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    /// Largest absolute disagreement seen.
    pub max_error: f64,
    pub tolerance: f64,
    pub elapsed_ms: u64,
}

pub const SUITES: [&str; 5] = [
    "lp_vertex_enumeration",
    "gamma_schedule",
    "simplex_recommendation",
    "worst_case_values",
    "robust_query",
];

/// Run every suite in [`SUITES`] order.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    SUITES.iter().map(|name| run_suite(name, seed).expect("known suite")).collect()
}

/// Run one suite by name; `None` for an unknown name.
pub fn run_suite(name: &str, seed: u64) -> Option<SuiteResult> {
    let start = Instant::now();
    let mut tally = match name {
        "lp_vertex_enumeration" => lp_vertex_enumeration(seed, 60),
        "gamma_schedule" => gamma_vs_bisection(),
        "simplex_recommendation" => simplex_recommendation(seed, 60),
        "worst_case_values" => worst_case_vs_vertices(seed, 40),
        "robust_query" => robust_query(seed, 50),
        _ => return None,
    };
    tally.name = name.to_string();
    tally.elapsed_ms = start.elapsed().as_millis() as u64;
    tally.passed = tally.failures == 0 && tally.checks > 0;
    Some(tally)
}

impl SuiteResult {
    fn new(tolerance: f64) -> Self {
        SuiteResult {
            name: String::new(),
            passed: false,
            checks: 0,
            failures: 0,
            max_error: 0.0,
            tolerance,
            elapsed_ms: 0,
        }
    }

    fn compare(&mut self, got: f64, expected: f64) {
        let err = (got - expected).abs();
        self.checks += 1;
        if err.is_nan() || err > self.tolerance {
            self.failures += 1;
        }
        if !err.is_nan() {
            self.max_error = self.max_error.max(err);
        }
    }

    fn check(&mut self, ok: bool) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
        }
    }
}

fn random_alternatives(rng: &mut impl Rng, count: usize, dim: usize) -> AlternativeSet {
    let features = (0..count)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    AlternativeSet::from_features(features).expect("valid random features")
}

fn random_history(rng: &mut impl Rng, x: &AlternativeSet, len: usize) -> QueryHistory {
    let queries = x.queries();
    let mut h = QueryHistory::new();
    for _ in 0..len {
        let q = queries[rng.random_range(0..queries.len())];
        h.push(q, Response::ALL[rng.random_range(0..3)]);
    }
    h
}

/// Bounded random LP whose feasible set contains a random anchor point.
fn random_lp(rng: &mut impl Rng) -> LinearProgram {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(0..=8);
    let objective = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let anchor: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut lp = LinearProgram::new(objective);
    lp.push(Constraint::new(vec![1.0; n], Relation::Le, n as f64));
    for _ in 0..m {
        let coefs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let at: f64 = coefs.iter().zip(&anchor).map(|(a, x)| a * x).sum();
        let slack = rng.random_range(0.0..0.5);
        let row = match rng.random_range(0..3) {
            0 => Constraint::new(coefs, Relation::Le, at + slack),
            1 => Constraint::new(coefs, Relation::Ge, at - slack),
            _ => Constraint::new(coefs, Relation::Eq, at),
        };
        lp.push(row);
    }
    lp
}

fn lp_vertex_enumeration(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = SuiteResult::new(1e-6);
    for _ in 0..cases {
        let lp = random_lp(&mut rng);
        let n = lp.num_vars();
        let mut rows = lp.constraints.clone();
        for j in 0..n {
            let mut unit = vec![0.0; n];
            unit[j] = 1.0;
            rows.push(Constraint::new(unit, Relation::Ge, 0.0));
        }
        match (solve_lp(&lp), oracle::vertex_min(&lp.objective, &rows)) {
            (Ok(LpSolution::Optimal { value, point }), Some(expected)) => {
                r.compare(value, expected);
                r.check(lp.constraints.iter().all(|c| c.violation(&point) < 1e-7));
            }
            _ => r.check(false),
        }
    }
    r
}

fn gamma_vs_bisection() -> SuiteResult {
    let mut r = SuiteResult::new(1e-9);
    for sigma in [0.01, 0.05, 0.1, 0.2] {
        for p in [0.6, 0.75, 0.9, 0.95] {
            let noise = NoiseParams::new(sigma, p).expect("valid noise");
            for k in 1..=10 {
                match gamma_schedule(noise, k) {
                    Ok(g) => r.compare(g, oracle::gamma_bisection(sigma, p, k)),
                    Err(_) => r.check(false),
                }
            }
        }
    }
    r
}

/// With no answers the worst case of each alternative is its smallest
/// feature; the recommendation must hit the best of those exactly.
fn simplex_recommendation(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = SuiteResult::new(0.0);
    for _ in 0..cases {
        let count = rng.random_range(2..=6);
        let dim = rng.random_range(1..=4);
        let x = random_alternatives(&mut rng, count, dim);
        let mins: Vec<f64> = x
            .features()
            .iter()
            .map(|f| f.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let best = mins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match recommend(&x, &QueryHistory::new(), 0.0) {
            Ok(rec) => {
                r.compare(rec.value, best);
                r.check(rec.feasible && mins[rec.index] == best);
            }
            Err(_) => r.check(false),
        }
    }
    r
}

fn worst_case_vs_vertices(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = SuiteResult::new(1e-7);
    for _ in 0..cases {
        let count = rng.random_range(2..=5);
        let dim = rng.random_range(1..=3);
        let x = random_alternatives(&mut rng, count, dim);
        let len = rng.random_range(0..=2);
        let h = random_history(&mut rng, &x, len);
        let gamma = rng.random_range(0.0..0.3);
        match (worst_case_values(&x, &h, gamma), oracle::worst_case_values(&x, &h, gamma)) {
            (Ok(Some(got)), Some(expected)) => {
                for (g, e) in got.iter().zip(&expected) {
                    r.compare(*g, *e);
                }
            }
            (Ok(None), None) => r.check(true),
            _ => r.check(false),
        }
    }
    r
}

/// Instances with at most five alternatives, three features and a second
/// query at most.
fn robust_query(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = SuiteResult::new(1e-7);
    for _ in 0..cases {
        let count = rng.random_range(2..=5);
        let dim = rng.random_range(1..=3);
        let x = random_alternatives(&mut rng, count, dim);
        let len = rng.random_range(0..=1);
        let h = random_history(&mut rng, &x, len);
        let noise = NoiseParams::new(rng.random_range(0.0..0.15), 0.9).expect("valid noise");
        let gamma = oracle::gamma_bisection(noise.sigma, noise.p, h.len() + 1);
        let expected = oracle::robust_best_objective(&x, &h, gamma);
        match (select_query_robust(&x, &h, noise, 10), expected) {
            (Ok(sel), Some(e)) => r.compare(sel.objective, e),
            (Err(_), None) => r.check(true),
            _ => r.check(false),
        }
    }
    r
}
