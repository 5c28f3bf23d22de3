//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::fs;
use std::process::Command;
use std::time::Instant;

use gut_core::algorithms::{
    init_states, step, validate_hyperparameters, AgentState, AlgorithmKind, AlgorithmSpec,
};
use gut_core::harness::{
    check_problem_equivalence, run_consensus, run_consensus_states, run_training, ConsensusMethod,
    MetricTrace, TrainOptions,
};
use gut_core::models::{
    finite_diff_check, make_problem, Problem, ProblemKind, ProblemOracle, Quadratic,
    SyntheticProblemSpec,
};
use gut_core::partition::{dirichlet_partition, partition_histogram};
use gut_core::rng::{self, Purpose};
use gut_core::topology::{build_topology, MixingMatrix, TopologyKind};
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal, Uniform};
use tempfile::TempDir;

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

fn criterion(id: usize, title: &str, limit_secs: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let secs = start.elapsed().as_secs_f64();
    let in_time = limit_secs.is_none_or(|l| secs < l);
    let pass = o.pass && in_time;
    let limit = limit_secs.map_or(String::new(), |l| format!(", limit {l}s"));
    println!(
        "criterion {id:>2} {} {title}: {} ({secs:.2}s{limit})",
        if pass { "PASS" } else { "FAIL" },
        o.detail
    );
    pass
}

fn ring(n: usize) -> MixingMatrix {
    build_topology(TopologyKind::Ring, n, None).unwrap()
}

fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::global(seed, Purpose::Init);
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut r))
}

fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let m = gaussian(n, d, seed);
    (0..n).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn xs(states: &[AgentState]) -> Vec<Vec<f64>> {
    states.iter().map(|s| s.x.clone()).collect()
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn final_error(t: &MetricTrace, rounds: usize) -> Option<f64> {
    if t.is_divergent() {
        return None;
    }
    t.at_round(rounds).map(|r| r.consensus_error)
}

fn mean_preservation() -> Outcome {
    let (n, d, rounds) = (64, 32, 2000);
    let w = ring(n);
    let x0 = gaussian(n, d, 1);
    let (trace, iterates) =
        run_consensus_states(&w, &x0, ConsensusMethod::Gut, 0.9, 0.0, rounds).unwrap();
    let mean0 = x0.mean();
    let tol = 1e-10 * (1.0 + mean0.abs());
    let worst = iterates
        .iter()
        .map(|x| (x.mean() - mean0).abs())
        .fold(
            0.0,
            |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) },
        );
    let completed = iterates.len() == rounds + 1 && !trace.is_divergent();
    let last = trace.last().map_or(f64::NAN, |r| r.consensus_error);
    outcome(
        completed && worst <= tol,
        format!(
            "{} of {rounds} rounds completed, max mean drift {worst:e} vs tol {tol:e}, \
             consensus error {last:e} at round {}; mu=0.9 makes this recursion unstable on rings",
            iterates.len() - 1,
            trace.last().map_or(0, |r| r.round)
        ),
    )
}

fn form_equivalence() -> Outcome {
    let w = ring(8);
    let problem = make_problem(&SyntheticProblemSpec {
        kind: ProblemKind::Quadratic,
        n_agents: 8,
        zeta: 1.0,
        sigma: 0.1,
        ..Default::default()
    })
    .unwrap();
    let spec = AlgorithmSpec::new(AlgorithmKind::Gut, 0.05, 0.9, 0.0);
    let report = check_problem_equivalence(&w, &problem, &spec, 1, 1, 100, 1e-8).unwrap();
    let per_form: Vec<String> = report
        .forms
        .iter()
        .map(|f| format!("{} {:e}", f.form, f.max_deviation))
        .collect();
    outcome(
        report.pass,
        format!(
            "max relative deviation {:e} ({})",
            report.max_deviation,
            per_form.join(", ")
        ),
    )
}

fn gossip_then_gradient(w: &MixingMatrix, x: &[Vec<f64>], eta: f64, p: &Problem) -> Vec<Vec<f64>> {
    let dense = w.weights();
    (0..x.len())
        .map(|i| {
            let mixed: Vec<f64> = (0..x[i].len())
                .map(|k| (0..x.len()).map(|j| dense[(i, j)] * x[j][k]).sum())
                .collect();
            let (_, g) = p.local_objective(i, &mixed);
            mixed.iter().zip(g).map(|(m, gi)| m - eta * gi).collect()
        })
        .collect()
}

fn zero_mu_reductions() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let pair = MixingMatrix::from_weights(DMatrix::from_element(2, 2, 0.5)).unwrap();
    let p = Problem::Quadratic(
        Quadratic::from_targets(vec![vec![4.0, -2.0], vec![6.0, 8.0]], 0.0).unwrap(),
    );
    let oracle = ProblemOracle {
        problem: &p,
        batch_size: 1,
        seed: 0,
    };
    let x0 = vec![vec![0.0, 2.0], vec![8.0, -4.0]];
    let spec = AlgorithmSpec::new(AlgorithmKind::Gut, 0.5, 0.0, 0.0);
    let out = step(
        &init_states(&x0, &pair, &spec).unwrap(),
        &pair,
        &spec,
        &oracle,
    )
    .unwrap();
    let exact = xs(&out.states) == gossip_then_gradient(&pair, &x0, 0.5, &p);
    pass &= exact;
    notes.push(format!("dyadic GUT step bit-exact {exact}"));

    let w = ring(10);
    let p = Problem::Quadratic(Quadratic::from_targets(gaussian_rows(10, 4, 2), 0.0).unwrap());
    let oracle = ProblemOracle {
        problem: &p,
        batch_size: 1,
        seed: 0,
    };
    let spec = AlgorithmSpec::new(AlgorithmKind::Gut, 0.1, 0.0, 0.0);
    let mut states = init_states(&gaussian_rows(10, 4, 3), &w, &spec).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let reference = gossip_then_gradient(&w, &xs(&states), 0.1, &p);
        states = step(&states, &w, &spec, &oracle).unwrap().states;
        worst = worst.max(max_abs_diff(&xs(&states), &reference));
    }
    pass &= worst <= 1e-12;
    notes.push(format!("ring GUT vs Wx-G(Wx) {worst:e}"));

    let x0 = gaussian(16, 8, 4);
    let w16 = ring(16);
    let (gut, gut_x) =
        run_consensus_states(&w16, &x0, ConsensusMethod::Gut, 0.0, 0.0, 300).unwrap();
    let dense = w16.weights().clone();
    let mut x = x0.clone();
    let mut trace_dev: f64 = 0.0;
    for (t, xt) in gut_x.iter().enumerate() {
        trace_dev = trace_dev.max((xt - &x).amax());
        trace_dev = trace_dev.max((gut.records[t].consensus_error - gossip_error(&x)).abs());
        x = &dense * &x;
    }
    pass &= trace_dev <= 1e-12;
    notes.push(format!("consensus gut(mu=0) vs dense gossip {trace_dev:e}"));

    let p = Problem::Quadratic(Quadratic::from_targets(gaussian_rows(10, 4, 5), 0.2).unwrap());
    let oracle = ProblemOracle {
        problem: &p,
        batch_size: 1,
        seed: 3,
    };
    let x0 = gaussian_rows(10, 4, 6);
    let run = |kind| {
        let spec = AlgorithmSpec::new(kind, 0.05, 0.0, 0.0);
        let mut s = init_states(&x0, &w, &spec).unwrap();
        for _ in 0..30 {
            s = step(&s, &w, &spec, &oracle).unwrap().states;
        }
        xs(&s)
    };
    let reference = run(AlgorithmKind::Gut);
    for kind in [AlgorithmKind::RuleA, AlgorithmKind::RuleB] {
        let same = run(kind) == reference;
        pass &= same;
        notes.push(format!("{kind} bit-identical {same}"));
    }
    outcome(pass, notes.join(", "))
}

fn gossip_error(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let mean = x.row_mean();
    (0..n)
        .map(|i| (x.row(i) - &mean).norm_squared())
        .sum::<f64>()
        / n as f64
}

fn consensus_at_scale() -> Outcome {
    let (d, rounds) = (32, 2000);
    let mus = [0.3, 0.5, 0.7, 0.9];
    let mut pass = true;
    let mut notes = Vec::new();
    for n in [64, 128, 256] {
        let w = ring(n);
        let x0 = gaussian(n, d, n as u64);
        let gossip = run_consensus(&w, &x0, ConsensusMethod::Gossip, 0.0, 0.0, rounds).unwrap();
        let base = final_error(&gossip, rounds).unwrap();
        let finals: Vec<(f64, Option<f64>, usize)> = mus
            .iter()
            .map(|&mu| {
                let t = run_consensus(&w, &x0, ConsensusMethod::Gut, mu, 0.0, rounds).unwrap();
                (mu, final_error(&t, rounds), t.last().map_or(0, |r| r.round))
            })
            .collect();
        let results: Vec<String> = finals
            .iter()
            .map(|&(mu, e, last)| match e {
                Some(e) => format!("{mu}:{e:.1e}"),
                None => format!("{mu}:diverged@{last}"),
            })
            .collect();
        let found = finals.iter().any(|&(_, e, _)| e.is_some_and(|e| e < base));
        pass &= found;
        notes.push(format!(
            "n={n} gossip {base:.2e} gut[{}]",
            results.join(" ")
        ));
    }

    let n = 256;
    let w = ring(n);
    let x0 = gaussian(n, d, n as u64);
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for beta in [0.5, 0.7, 0.9] {
        let qg = run_consensus(&w, &x0, ConsensusMethod::QgGossip, 0.0, beta, rounds).unwrap();
        let Some(base) = final_error(&qg, rounds) else {
            continue;
        };
        for &mu in &mus {
            let t = run_consensus(&w, &x0, ConsensusMethod::QgGutm, mu, beta, rounds).unwrap();
            if let Some(e) = final_error(&t, rounds) {
                if e < base && best.is_none_or(|b| e / base < b.2 / b.3) {
                    best = Some((mu, beta, e, base));
                }
            }
        }
    }
    match best {
        Some((mu, beta, e, base)) => notes.push(format!(
            "n=256 qg-gutm mu={mu} beta={beta} {e:.2e} < qg-gossip {base:.2e}"
        )),
        None => {
            pass = false;
            notes.push("n=256 no qg-gutm pair beat qg-gossip".into());
        }
    }
    outcome(pass, notes.join("; "))
}

fn validator() -> Outcome {
    let w = ring(16);
    let rho = w.rho().unwrap();
    let closed = 1.0 - (1.0 + 2.0 * (std::f64::consts::PI / 8.0).cos()) / 3.0;
    let check = validate_hyperparameters(0.1, 0.9, rho, 1.0);
    let rho_ok = (rho - closed).abs() <= 1e-10;
    let eta_ok = check.eta_max == rho / 7.0;
    let mu_ok = check.mu_max == rho / (42.0 + rho);
    let hand_ok = ((check.eta_max - 0.007251) / 0.007251).abs() < 1e-3
        && ((check.mu_max - 0.0012074) / 0.0012074).abs() < 1e-3;
    let flags_large = !check.compliant();
    outcome(
        rho_ok && eta_ok && mu_ok && hand_ok && flags_large,
        format!(
            "rho {rho:.10} (closed form diff {:e}), eta_max {:.7}, mu_max {:.7}, \
             eta=0.1/mu=0.9 flagged {flags_large}",
            (rho - closed).abs(),
            check.eta_max,
            check.mu_max
        ),
    )
}

fn gradient_oracle() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let specs = [
        (ProblemKind::Quadratic, 1e-8),
        (ProblemKind::Softmax, 1e-5),
        (ProblemKind::Mlp, 1e-5),
    ];
    for (kind, tol) in specs {
        let p = make_problem(&SyntheticProblemSpec {
            kind,
            d: 5,
            n_agents: 4,
            classes: 3,
            samples: 120,
            test_samples: 30,
            hidden: 6,
            alpha: 1.0,
            min_per_agent: 0,
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        let mut r = rng::global(8, Purpose::Init);
        let worst = (0..20)
            .map(|_| {
                let x: Vec<f64> = (0..p.dim())
                    .map(|_| Distribution::<f64>::sample(&StandardNormal, &mut r))
                    .collect();
                finite_diff_check(&p, &x, 1e-5).unwrap()
            })
            .fold(0.0, f64::max);
        pass &= worst <= tol;
        notes.push(format!("{kind} {worst:.1e}"));
    }

    let draws = 100_000;
    for kind in [ProblemKind::Quadratic, ProblemKind::Softmax] {
        let p = make_problem(&SyntheticProblemSpec {
            kind,
            d: 3,
            n_agents: 2,
            classes: 3,
            samples: 60,
            test_samples: 30,
            sigma: 0.5,
            alpha: 1.0,
            min_per_agent: 1,
            seed: 9,
            ..Default::default()
        })
        .unwrap();
        let x = vec![0.1; p.dim()];
        let (_, exact) = p.local_objective(0, &x);
        let dim = exact.len();
        let mut sum = vec![0.0; dim];
        let mut sum_sq = vec![0.0; dim];
        for round in 0..draws {
            let batch = p.make_batch(0, round, 1, 11);
            let (_, g) = p.loss_and_grad(&x, &batch).unwrap();
            for k in 0..dim {
                sum[k] += g[k];
                sum_sq[k] += g[k] * g[k];
            }
        }
        let nf = draws as f64;
        let worst_z = (0..dim)
            .map(|k| {
                let mean = sum[k] / nf;
                let var = (sum_sq[k] / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
                let se = (var / nf).sqrt();
                if se == 0.0 {
                    if (mean - exact[k]).abs() <= 1e-12 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (mean - exact[k]).abs() / se
                }
            })
            .fold(0.0, f64::max);
        pass &= worst_z <= 3.0;
        notes.push(format!("{kind} mean gradient within {worst_z:.2} SE"));
    }
    outcome(pass, notes.join(", "))
}

fn heterogeneity() -> Outcome {
    let w = ring(16);
    let problem = SyntheticProblemSpec {
        kind: ProblemKind::Softmax,
        d: 20,
        n_agents: 16,
        classes: 10,
        samples: 4000,
        test_samples: 2000,
        separation: 1.0,
        alpha: 0.01,
        min_per_agent: 0,
        ..Default::default()
    };
    let opts = TrainOptions {
        rounds: 3000,
        batch_size: 32,
        seeds: vec![1, 2, 3],
        eval_every: 100,
        decay: true,
        threads: None,
    };
    let train = |kind, mu, beta| {
        run_training(
            &w,
            &problem,
            &AlgorithmSpec::new(kind, 0.1, mu, beta),
            &opts,
        )
        .unwrap()
    };
    let dsgd = train(AlgorithmKind::Dsgd, 0.0, 0.0);
    let gut = train(AlgorithmKind::Gut, 0.1, 0.0);
    let qg_dsgdm = train(AlgorithmKind::QgDsgdm, 0.0, 0.9);
    let qg_gutm = train(AlgorithmKind::QgGutm, 0.09, 0.9);
    let acc = |r: &gut_core::harness::TrainingReport| {
        r.summary.avg_model_accuracy.map_or(f64::NAN, |m| m.mean)
    };
    let gut_gap = acc(&gut) - acc(&dsgd);
    let qg_gap = acc(&qg_gutm) - acc(&qg_dsgdm);
    let mean_error = |r: &gut_core::harness::TrainingReport, round: usize| {
        r.traces
            .iter()
            .map(|t| {
                t.at_round(round)
                    .map_or(f64::INFINITY, |x| x.consensus_error)
            })
            .sum::<f64>()
            / r.traces.len() as f64
    };
    let matched: Vec<usize> = dsgd.traces[0]
        .records
        .iter()
        .map(|r| r.round)
        .filter(|&r| r > 0)
        .collect();
    let below = matched
        .iter()
        .filter(|&&r| mean_error(&gut, r) < mean_error(&dsgd, r))
        .count();
    let diverged = [&dsgd, &gut, &qg_dsgdm, &qg_gutm]
        .iter()
        .any(|r| r.any_divergent());
    outcome(
        !diverged && gut_gap > -0.005 && qg_gap > -0.005 && below == matched.len(),
        format!(
            "accuracy GUT {:.4} vs DSGD {:.4} ({gut_gap:+.4}), QG-GUTm {:.4} vs QG-DSGDm {:.4} \
             ({qg_gap:+.4}); GUT consensus error below DSGD at {below}/{} logged rounds",
            acc(&gut),
            acc(&dsgd),
            acc(&qg_gutm),
            acc(&qg_dsgdm),
            matched.len()
        ),
    )
}

fn communication() -> Outcome {
    let mut pass = true;
    let mut checked = 0;
    let topologies = [
        build_topology(TopologyKind::Ring, 8, None).unwrap(),
        build_topology(TopologyKind::Torus, 9, Some((3, 3))).unwrap(),
        build_topology(TopologyKind::Dyck, 32, None).unwrap(),
    ];
    let problem = SyntheticProblemSpec {
        kind: ProblemKind::Quadratic,
        d: 3,
        ..Default::default()
    };
    let opts = TrainOptions {
        rounds: 12,
        batch_size: 1,
        seeds: vec![1],
        eval_every: 1,
        decay: false,
        threads: None,
    };
    for w in &topologies {
        let degree = (0..w.n())
            .map(|i| {
                (0..w.n())
                    .filter(|&j| j != i && w.weights()[(i, j)] > 0.0)
                    .count()
            })
            .max()
            .unwrap() as u64;
        let spec = SyntheticProblemSpec {
            n_agents: w.n(),
            ..problem.clone()
        };
        for kind in [
            AlgorithmKind::Gut,
            AlgorithmKind::QgGutm,
            AlgorithmKind::RuleA,
            AlgorithmKind::RuleB,
            AlgorithmKind::Gt,
        ] {
            let multiplier = if kind == AlgorithmKind::Gt { 2 } else { 1 };
            let report =
                run_training(w, &spec, &AlgorithmSpec::new(kind, 0.01, 0.0, 0.5), &opts).unwrap();
            for r in &report.traces[0].records {
                pass &= r.comm_scalars == r.round as u64 * degree * 3 * multiplier;
                checked += 1;
            }
        }
    }
    let w = ring(8);
    let t = run_consensus(
        &w,
        &gaussian(8, 5, 1),
        ConsensusMethod::QgGutm,
        0.1,
        0.5,
        20,
    )
    .unwrap();
    for r in &t.records {
        pass &= r.comm_scalars == r.round as u64 * 2 * 5;
        checked += 1;
    }
    outcome(
        pass,
        format!("{checked} logged records on ring, torus and dyck match degree x d x (1 or 2 for GT) per round"),
    )
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_gutsim");
    let runs = [
        vec![
            "train",
            "--algorithm.kind=QG-GUTm",
            "--algorithm.mu=0.05",
            "--problem.kind=softmax",
            "--problem.d=8",
            "--problem.classes=5",
            "--problem.samples=500",
            "--problem.test_samples=100",
            "--partition.alpha=0.1",
            "--partition.min_per_agent=0",
            "--topology.n=8",
            "--run.rounds=60",
            "--run.seeds=1,2,3,4",
        ],
        vec![
            "consensus",
            "--consensus.method=qg-gutm",
            "--algorithm.mu=0.5",
            "--algorithm.beta=0.7",
            "--topology.n=32",
            "--run.rounds=200",
        ],
    ];
    let mut compared = 0;
    for args in &runs {
        let dirs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
        for (dir, threads) in dirs.iter().zip([1, 8, 8]) {
            let status = Command::new(bin)
                .args(args)
                .arg(format!("--run.threads={threads}"))
                .arg(format!("--run.output_dir={}", dir.path().display()))
                .output()
                .unwrap()
                .status;
            if !status.success() {
                return outcome(false, format!("{} exited with {status}", args[0]));
            }
        }
        let mut names: Vec<String> = fs::read_dir(dirs[0].path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".csv"))
            .collect();
        names.sort();
        for name in &names {
            let first = fs::read(dirs[0].path().join(name)).unwrap();
            for other in &dirs[1..] {
                if fs::read(other.path().join(name)).ok().as_ref() != Some(&first) {
                    return outcome(false, format!("{} {name} differs", args[0]));
                }
                compared += 1;
            }
        }
    }
    outcome(
        compared > 0,
        format!("{compared} CSV comparisons byte-identical across repeats and 1 vs 8 threads"),
    )
}

fn partition_integrity() -> Outcome {
    let mut r = rng::global(2024, Purpose::Partition);
    let log_alpha = Uniform::new(-2.0f64, 2.0).unwrap();
    let mut accepted = 0;
    let mut rejected = 0;
    for draw in 0..200u64 {
        let alpha = 10f64.powf(log_alpha.sample(&mut r));
        let classes = 2 + (draw % 9) as usize;
        let agents = 2 + (draw % 15) as usize;
        let min = (draw % 3) as usize;
        let labels: Vec<usize> = (0..600)
            .map(|i| (i * 7 + draw as usize) % classes)
            .collect();
        match dirichlet_partition(&labels, agents, alpha, draw * 31 + 5, min) {
            Ok(p) => {
                let mut seen = vec![false; labels.len()];
                for a in &p.assignments {
                    if a.len() < min {
                        return outcome(false, format!("draw {draw}: agent below minimum {min}"));
                    }
                    for &i in a {
                        if seen[i] {
                            return outcome(
                                false,
                                format!("draw {draw}: index {i} assigned twice"),
                            );
                        }
                        seen[i] = true;
                    }
                }
                if !seen.iter().all(|&s| s) {
                    return outcome(false, format!("draw {draw}: sample dropped"));
                }
                accepted += 1;
            }
            Err(gut_core::Error::Partition(_)) => rejected += 1,
            Err(e) => return outcome(false, format!("draw {draw}: {e}")),
        }
    }

    let labels: Vec<usize> = (0..10_000).map(|i| i % 10).collect();
    let iid = dirichlet_partition(&labels, 16, 1e6, 3, 1).unwrap();
    let skew = partition_histogram(&iid, &labels).unwrap().skew;

    let labels: Vec<usize> = (0..1000).map(|i| i % 10).collect();
    let mut worst_share: f64 = 1.0;
    for seed in 0..100 {
        let p = dirichlet_partition(&labels, 10, 1e-6, seed, 0).unwrap();
        let h = partition_histogram(&p, &labels).unwrap();
        for c in 0..10 {
            let max = h.counts.iter().map(|row| row[c]).max().unwrap();
            worst_share = worst_share.min(max as f64 / 100.0);
        }
    }
    outcome(
        accepted > 0 && skew < 0.01 && worst_share >= 0.99,
        format!(
            "{accepted} valid draws, {rejected} reported infeasible; alpha=1e6 skew {skew:.1e}; \
             alpha=1e-6 lowest per-class concentration {worst_share:.3} over 100 seeds"
        ),
    )
}

fn main() {
    let results = [
        criterion(
            1,
            "average preservation, gut mu=0.9 ring 64",
            Some(5.0),
            mean_preservation,
        ),
        criterion(2, "four-form equivalence", Some(1.0), form_equivalence),
        criterion(3, "mu=0 reductions", None, zero_mu_reductions),
        criterion(
            4,
            "consensus speed-up at scale",
            Some(60.0),
            consensus_at_scale,
        ),
        criterion(5, "hyperparameter validator", None, validator),
        criterion(6, "gradient oracle", None, gradient_oracle),
        criterion(7, "heterogeneity benefit", Some(120.0), heterogeneity),
        criterion(8, "communication accounting", None, communication),
        criterion(9, "determinism", None, determinism),
        criterion(10, "partition integrity", None, partition_integrity),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria pass", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
