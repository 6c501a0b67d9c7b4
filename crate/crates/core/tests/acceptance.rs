//! Acceptance suite. Prints one `[PASS]` / `[FAIL]` line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Oracles are computed here, independently of the library code paths they
//! check: potentials are read straight from the engines, rates come from the
//! likelihood tables in the preset files, and spectral values are checked
//! against closed forms and a dense symmetric eigensolver.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use distdetect::analysis::{
    empirical_rate_slope, monte_carlo_verify, parallel_map, trial_seed, Guarantee, Simulation,
    StepRecord, TrajectoryRecord,
};
use distdetect::cli::{run_simulate, RunOptions, ScenarioConfig};
use distdetect::detection::{closed_form_phi, DecentralizedState};
use distdetect::network::{
    expected_matrix, metropolis_matrix, mixing_deviation_profile, sigma2, Graph, MixingMatrix,
    NetworkProcess,
};
use distdetect::signal::SignalModel;
use distdetect::Scenario;

fn preset(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name);
    ScenarioConfig::load(&path).expect("preset loads")
}

fn scenario(name: &str) -> Scenario {
    preset(name).to_scenario().expect("preset is valid")
}

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Counts steps at which the TV error exceeds the exponential potential-gap
/// sum, with the gap sum recomputed from the engine's potentials.
#[derive(Default)]
struct GapTally {
    steps: u64,
    violations: u64,
    worst_margin: f64,
}

impl GapTally {
    fn record(&mut self, sim: &Simulation<'_>, rec: &StepRecord, truth: usize) {
        let state = sim.decentralized();
        let eta = state.eta();
        for (i, agent) in rec.agents.iter().enumerate() {
            let phi = state.phi(i);
            let gaps: Vec<f64> = (0..phi.len())
                .filter(|&k| k != truth)
                .map(|k| eta * (phi[k] - phi[truth]))
                .collect();
            let top = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = top + gaps.iter().map(|g| (g - top).exp()).sum::<f64>().ln();
            let margin = agent.log_tv_error - log_sum;
            if self.steps == 0 && i == 0 {
                self.worst_margin = margin;
            }
            self.worst_margin = self.worst_margin.max(margin);
            if margin > 1e-12 * (1.0 + log_sum.abs()) {
                self.violations += 1;
            }
        }
        self.steps += 1;
    }

    fn merge(&mut self, other: GapTally) {
        if self.steps == 0 {
            self.worst_margin = other.worst_margin;
        } else if other.steps > 0 {
            self.worst_margin = self.worst_margin.max(other.worst_margin);
        }
        self.steps += other.steps;
        self.violations += other.violations;
    }
}

/// Runs one trial, tallying the gap inequality at every step, and keeps the
/// records when `keep` is set.
fn checked_trial(
    sc: &Scenario,
    eta: f64,
    seed: u64,
    horizon: usize,
    keep: bool,
    mut on_step: impl FnMut(&Simulation<'_>),
) -> (Vec<StepRecord>, GapTally) {
    let mut sim = Simulation::new(&sc.model, &sc.network, eta, seed).unwrap();
    let truth = sc.model.true_index();
    let mut tally = GapTally::default();
    let mut steps = Vec::new();
    for _ in 0..horizon {
        let rec = sim.step().unwrap();
        tally.record(&sim, &rec, truth);
        on_step(&sim);
        if keep {
            steps.push(rec);
        }
    }
    (steps, tally)
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum()
}

fn ac1(tally: &mut GapTally) -> Check {
    let sc = scenario("connection_identity.json");
    let (n, m) = (sc.num_agents(), sc.model.num_states());
    let mut worst = 0.0f64;
    for r in 0..sc.trials {
        let seed = trial_seed(sc.seed, r as u64);
        let (_, t) = checked_trial(&sc, 1.0, seed, sc.horizon, false, |sim| {
            let central = sim.centralized().phi();
            for k in 0..m {
                let mean = (0..n).map(|i| sim.decentralized().phi(i)[k]).sum::<f64>() / n as f64;
                worst = worst.max((mean - central[k]).abs());
            }
        });
        tally.merge(t);
    }
    ensure(
        worst <= 1e-8,
        format!("max |mean_i phi_i - phi| = {worst:.3e} over {} seeds, T = {}", sc.trials, sc.horizon),
    )
}

fn random_connected_graph(n: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut edges = BTreeSet::new();
    for v in 1..n {
        let u = order[rng.gen_range(0..v)];
        edges.insert((order[v].min(u), order[v].max(u)));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.25) {
                edges.insert((i, j));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

fn random_model(n: usize, m: usize, rng: &mut ChaCha8Rng) -> SignalModel {
    loop {
        let tables = (0..n)
            .map(|_| {
                let a = rng.gen_range(2..=3);
                (0..m)
                    .map(|_| {
                        let raw: Vec<f64> = (0..a).map(|_| rng.gen_range(0.05..1.0)).collect();
                        let s: f64 = raw.iter().sum();
                        raw.into_iter().map(|x| x / s).collect()
                    })
                    .collect()
            })
            .collect();
        if let Ok(model) = SignalModel::new(rng.gen_range(0..m), tables) {
            return model;
        }
    }
}

fn random_process(kind: usize, n: usize, rng: &mut ChaCha8Rng) -> NetworkProcess {
    let g = random_connected_graph(n, rng);
    match kind {
        0 => NetworkProcess::fixed(metropolis_matrix(&g)).unwrap(),
        1 => NetworkProcess::gossip(g).unwrap(),
        _ => {
            let mut support: Vec<(MixingMatrix, f64)> = g
                .edges()
                .map(|(i, j)| (MixingMatrix::pairwise_averaging(n, i, j), rng.gen_range(0.1..1.0)))
                .collect();
            support.push((MixingMatrix::identity(n), rng.gen_range(0.1..1.0)));
            let other = random_connected_graph(n, rng);
            support.push((metropolis_matrix(&other), rng.gen_range(0.1..1.0)));
            let total: f64 = support.iter().map(|s| s.1).sum();
            support.iter_mut().for_each(|s| s.1 /= total);
            NetworkProcess::finite_support(support).unwrap()
        }
    }
}

fn ac2() -> Check {
    let mut worst = 0.0f64;
    let mut kinds = [0usize; 3];
    for instance in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE + instance);
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(2..=4);
        let t = rng.gen_range(1..=50);
        let kind = instance as usize % 3;
        kinds[kind] += 1;
        let model = random_model(n, m, &mut rng);
        let process = random_process(kind, n, &mut rng);
        let eta = rng.gen_range(0.1..2.0);

        let mut state = DecentralizedState::new(n, m, eta).unwrap();
        let mut matrices = Vec::with_capacity(t);
        let mut psis = Vec::with_capacity(t);
        for tau in 1..=t {
            let w = process.draw(&mut rng).into_owned();
            let sample = model.sample_step(&mut rng);
            state.step(&w, &sample, &model).unwrap();
            matrices.push(w);
            psis.push(
                (0..n)
                    .map(|j| model.log_marginal_vector(j, sample.symbols[j]).to_vec())
                    .collect::<Vec<_>>(),
            );
            if tau == t || tau == t.div_ceil(2) {
                for i in 0..n {
                    let closed = closed_form_phi(&matrices, &psis, i).unwrap();
                    for (a, b) in closed.iter().zip(state.phi(i)) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
    }
    ensure(
        worst <= 1e-8,
        format!(
            "max entrywise gap {worst:.3e} over 50 instances (fixed {}, gossip {}, finite support {})",
            kinds[0], kinds[1], kinds[2]
        ),
    )
}

fn ac3(tally: &mut GapTally) -> Check {
    let sc = scenario("reference_prop1.json");
    let outcome = monte_carlo_verify(&sc, Guarantee::Prop1, sc.trials, sc.seed, None)
        .map_err(|e| e.to_string())?;
    let report = &outcome.reports[0];

    let tallies = parallel_map(sc.trials, None, |r| {
        Ok(checked_trial(&sc, 1.0, trial_seed(sc.seed, r as u64), sc.horizon, false, |_| {}).1)
    })
    .unwrap();
    tallies.into_iter().for_each(|t| tally.merge(t));

    let threshold = 0.1 + 3.0 * (0.09f64 / 500.0).sqrt();
    ensure(
        report.checkpoint == Some(300)
            && report.trials == 500
            && outcome.eta == 1.0
            && report.violation_rate <= threshold,
        format!(
            "violation rate {:.4} <= {threshold:.4} (bound {:.4} at t = 300, R = {})",
            report.violation_rate, report.bound.value, report.trials
        ),
    )
}

fn ac4(tally: &mut GapTally) -> Check {
    let sc = scenario("theorem1_cycle8.json");
    let outcome = monte_carlo_verify(&sc, Guarantee::Theorem1, sc.trials, sc.seed, None)
        .map_err(|e| e.to_string())?;
    let report = &outcome.reports[0];

    let tallies = parallel_map(sc.trials, None, |r| {
        Ok(checked_trial(&sc, outcome.eta, trial_seed(sc.seed, r as u64), sc.horizon, false, |_| {}).1)
    })
    .unwrap();
    tallies.into_iter().for_each(|t| tally.merge(t));

    // η = (1 − σ₂) / (16 B ln n) from the preset's own numbers.
    let b = 5f64.ln();
    let eta = (1.0 - outcome.sigma2) / (16.0 * b * 8f64.ln());
    let threshold = 0.1 + 3.0 * (0.09f64 / 300.0).sqrt();
    let worst = report.trial_statistics.iter().copied().fold(0.0, f64::max);
    ensure(
        sc.horizon == 2000
            && report.trials == 300
            && (outcome.eta - eta).abs() < 1e-15
            && report.violation_rate <= threshold,
        format!(
            "violation rate {:.4} <= {threshold:.4} (bound {:.2}, largest cost {worst:.4}, eta {:.5})",
            report.violation_rate, report.bound.value, outcome.eta
        ),
    )
}

/// Runs the 20 long reference trajectories once for the rate and
/// consistency criteria.
fn long_reference(tally: &mut GapTally) -> (Scenario, Vec<TrajectoryRecord>) {
    let sc = scenario("reference_long.json");
    let runs = parallel_map(sc.trials, None, |r| {
        let seed = trial_seed(sc.seed, r as u64);
        let (steps, t) = checked_trial(&sc, 1.0, seed, sc.horizon, true, |_| {});
        Ok((
            TrajectoryRecord {
                seed,
                config_digest: String::new(),
                eta: 1.0,
                steps,
            },
            t,
        ))
    })
    .unwrap();
    let mut trajectories = Vec::with_capacity(runs.len());
    for (traj, t) in runs {
        tally.merge(t);
        trajectories.push(traj);
    }
    (sc, trajectories)
}

fn ac5(cfg: &ScenarioConfig, trajectories: &[TrajectoryRecord]) -> Check {
    // Slowest network-average KL rate, straight from the likelihood tables.
    let agents = &cfg.model.agents;
    let truth = cfg.model.true_state;
    let m = agents[0].len();
    let rate = (0..m)
        .filter(|&k| k != truth)
        .map(|k| agents.iter().map(|a| kl(&a[truth], &a[k])).sum::<f64>() / agents.len() as f64)
        .fold(f64::INFINITY, f64::min);

    let n = agents.len();
    let horizon = cfg.horizon;
    let mut slopes = vec![0.0; n];
    let mut window_end = horizon;
    for traj in trajectories {
        for (i, s) in slopes.iter_mut().enumerate() {
            let end = traj.underflow_step(i).map_or(horizon, |t| t - 1);
            window_end = window_end.min(end);
            *s += empirical_rate_slope(traj, i, (2500, end)).map_err(|e| e.to_string())?;
        }
    }
    slopes.iter_mut().for_each(|s| *s /= trajectories.len() as f64);
    let worst = slopes
        .iter()
        .map(|s| (s + rate).abs() / rate)
        .fold(0.0, f64::max);
    let listed: Vec<String> = slopes.iter().map(|s| format!("{s:.4}")).collect();
    ensure(
        worst <= 0.2,
        format!(
            "mean slopes [{}] vs -I = {:.4} (worst relative error {:.1}%, window [2500, {window_end}])",
            listed.join(", "),
            -rate,
            100.0 * worst
        ),
    )
}

fn ac6() -> Check {
    let path = metropolis_matrix(&Graph::path(3).unwrap());
    let s_path = sigma2(&path).map_err(|e| e.to_string())?;
    let mut worst_avg = 0.0f64;
    for n in 2..=10 {
        worst_avg = worst_avg.max(sigma2(&MixingMatrix::averaging(n)).map_err(|e| e.to_string())?);
    }
    let gossip = expected_matrix(&NetworkProcess::gossip(Graph::cycle(3).unwrap()).unwrap());
    let s_gossip = sigma2(&gossip).map_err(|e| e.to_string())?;

    // Cross-check against a dense eigensolver.
    let dense = |w: &MixingMatrix| {
        let n = w.dim();
        let a = DMatrix::from_fn(n, n, |i, j| w.get(i, j) - 1.0 / n as f64);
        a.symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    };
    let oracle_gap = (dense(&path) - s_path).abs().max((dense(&gossip) - s_gossip).abs());

    ensure(
        (s_path - 2.0 / 3.0).abs() <= 1e-9
            && worst_avg <= 1e-10
            && (s_gossip - 0.5).abs() <= 1e-9
            && oracle_gap <= 1e-9,
        format!(
            "Metropolis path {s_path:.12}, averaging max {worst_avg:.1e}, gossip 3-cycle {s_gossip:.12}, eigensolver gap {oracle_gap:.1e}"
        ),
    )
}

fn ac7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1E77A2);
    let mut fixtures: Vec<(String, MixingMatrix)> = Vec::new();
    for n in 2..=16 {
        let mut graphs = vec![
            ("path", Graph::path(n).unwrap()),
            ("cycle", Graph::cycle(n).unwrap()),
            ("star", Graph::star(n).unwrap()),
            ("complete", Graph::complete(n).unwrap()),
        ];
        for _ in 0..3 {
            graphs.push(("random", random_connected_graph(n, &mut rng)));
        }
        for (name, g) in graphs {
            fixtures.push((format!("metropolis {name} n={n}"), metropolis_matrix(&g)));
            let gossip = NetworkProcess::gossip(g).unwrap();
            fixtures.push((format!("gossip {name} n={n}"), expected_matrix(&gossip)));
        }
    }
    let mut failures = Vec::new();
    let mut max_ratio = 0.0f64;
    for (name, w) in &fixtures {
        let n = w.dim();
        let s = sigma2(w).map_err(|e| format!("{name}: {e}"))?;
        let bound = 4.0 * (n as f64).ln() / (1.0 - s);
        for i in 0..n {
            // The profile is cumulative, so its last entry is its maximum.
            let profile = mixing_deviation_profile(w, i, 1000);
            let worst = profile.into_iter().fold(0.0, f64::max);
            max_ratio = max_ratio.max(worst / bound);
            if worst > bound {
                failures.push(format!("{name} agent {i}: {worst:.4} > {bound:.4}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!(
            "{} fixtures, all agents, t <= 1000; largest sum/bound ratio {max_ratio:.3}",
            fixtures.len()
        ))
    } else {
        Err(failures.join("; "))
    }
}

fn ac8(tally: &GapTally) -> Check {
    ensure(
        tally.violations == 0 && tally.steps > 0,
        format!(
            "{} violations over {} recorded steps (largest log TV minus log gap sum {:.3e})",
            tally.violations, tally.steps, tally.worst_margin
        ),
    )
}

fn ac9(trajectories: &[TrajectoryRecord]) -> Check {
    let target = 1e-6f64.ln();
    let mut latest = 0;
    for traj in trajectories {
        for i in 0..traj.num_agents() {
            match traj.steps.iter().find(|s| s.agents[i].log_tv_error < target) {
                Some(s) => latest = latest.max(s.t),
                None => {
                    return Err(format!(
                        "seed {} agent {i} never reached TV < 1e-6 within {} steps",
                        traj.seed,
                        traj.len()
                    ))
                }
            }
        }
    }
    Ok(format!(
        "all agents of {} seeds below 1e-6; latest first crossing at t = {latest}",
        trajectories.len()
    ))
}

fn ac10() -> Check {
    let cfg = preset("connection_identity.json");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut files = Vec::new();
    for (dir, threads) in dirs.iter().zip([Some(1), None]) {
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            threads,
            ..RunOptions::default()
        };
        let out = run_simulate(&cfg, &opts).map_err(|e| e.to_string())?;
        files.push((
            std::fs::read(&out.csv_path).unwrap(),
            std::fs::read(&out.summary_path).unwrap(),
        ));
    }
    ensure(
        files[0] == files[1],
        format!("two runs produced {} identical CSV bytes", files[0].0.len()),
    )
}

struct Line {
    id: &'static str,
    title: &'static str,
    result: Check,
    elapsed: Duration,
    limit: Option<Duration>,
}

fn timed(
    id: &'static str,
    title: &'static str,
    limit: Option<Duration>,
    f: impl FnOnce() -> Check,
) -> Line {
    let start = Instant::now();
    let result = f();
    Line {
        id,
        title,
        result,
        elapsed: start.elapsed(),
        limit,
    }
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let mut tally = GapTally::default();
    let mut lines = vec![
        timed("AC1", "connection identity", secs(10), || ac1(&mut tally)),
        timed("AC2", "closed form equals recursion", secs(30), ac2),
        timed("AC3", "anytime log TV bound", secs(120), || ac3(&mut tally)),
        timed("AC4", "decentralization cost bound", secs(180), || ac4(&mut tally)),
    ];
    let (sc, trajectories) = long_reference(&mut tally);
    let cfg = preset("reference_long.json");
    assert_eq!(sc.horizon, 5000);
    lines.push(timed("AC5", "asymptotic rate", None, || ac5(&cfg, &trajectories)));
    lines.push(timed("AC6", "spectral fixtures", None, ac6));
    lines.push(timed("AC7", "mixing deviation bound", None, ac7));
    lines.push(timed("AC8", "TV below potential-gap sum", None, || ac8(&tally)));
    lines.push(timed("AC9", "strong consistency", None, || ac9(&trajectories)));
    lines.push(timed("AC10", "deterministic output", None, ac10));

    let mut failed = 0;
    for line in &lines {
        let over = line.limit.is_some_and(|l| line.elapsed > l);
        let (ok, detail) = match &line.result {
            Ok(d) if over => (false, format!("{d}; exceeded {:?}", line.limit.unwrap())),
            Ok(d) => (true, d.clone()),
            Err(d) => (false, d.clone()),
        };
        failed += usize::from(!ok);
        println!(
            "[{}] {} {}: {} ({:.2} s)",
            if ok { "PASS" } else { "FAIL" },
            line.id,
            line.title,
            detail,
            line.elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
