//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p pra-core --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{max_abs_diff, random_instance, rng, test_perms, vertex_enumeration};
use pra_core::edf::compare_methods;
use pra_core::equivariant::{expand_to_dense, permute_blocks, EquivariantLayer};
use pra_core::io::{write_jsonl, FileHeader, DATASET_FORMAT, ORACLE_FORMAT};
use pra_core::lp::{build_lp, solve_plan, verify_plan, PlanSolution, PlanStatus, SOLVER_TOL};
use pra_core::nn::gradcheck::{
    central_difference, max_relative_error_floor, FD_STEP, REL_ERR_FLOOR,
};
use pra_core::nn::{Activation, DenseLayer, Layer, Mlp};
use pra_core::sim::{gen_dataset, gen_scenario_seeded, NetworkConfig, Scenario};
use pra_core::trainer::{
    build_samples, delivered, empirical_lagrangian, epoch_complexity_sweep, evaluate_gap,
    normalize_plan, sample_complexity_sweep, train, PlanModel, Sample, Supervision, SweepResult,
    TrainConfig, TrainingSet,
};
use rand::Rng;

const TARGET_GAP: f64 = 0.20;
const TRAIN_SEED: u64 = 1;
const TEST_SEED: u64 = 2;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

struct Desk {
    net: NetworkConfig,
    cfg: TrainConfig,
    pool: Vec<Scenario>,
    test: Vec<Scenario>,
    oracle: Vec<PlanSolution>,
    proposed: Option<PlanModel>,
}

impl Desk {
    fn new() -> Self {
        let net = NetworkConfig::desk();
        let pool = gen_dataset(TRAIN_SEED, 2000, false, &net).unwrap();
        let test = gen_dataset(TEST_SEED, 100, true, &net).unwrap();
        let oracle = test
            .iter()
            .map(|sc| solve_plan(sc, SOLVER_TOL).unwrap())
            .collect();
        Self {
            net,
            cfg: TrainConfig::desk(),
            pool,
            test,
            oracle,
            proposed: None,
        }
    }

    fn proposed(&mut self) -> &PlanModel {
        if self.proposed.is_none() {
            let set = TrainingSet::from_scenarios(&self.pool).unwrap();
            self.proposed = Some(train(&set, &self.cfg).unwrap().model);
        }
        self.proposed.as_ref().unwrap()
    }
}

fn random_stack(r: &mut impl Rng, k: usize, depth: usize) -> (Mlp, usize, usize) {
    let mut dims = vec![r.random_range(1..=4)];
    for _ in 0..depth {
        dims.push(r.random_range(1..=6));
    }
    let layers: Vec<Layer> = dims
        .windows(2)
        .map(|w| random_eq_layer(r, k, w[0], w[1]).into())
        .collect();
    (Mlp::new(layers).unwrap(), dims[0], dims[depth])
}

fn random_eq_layer(r: &mut impl Rng, k: usize, d_in: usize, d_out: usize) -> EquivariantLayer {
    let l = EquivariantLayer::glorot(k, d_in, d_out, Activation::Softplus, r);
    let bias = (0..d_out).map(|_| r.random_range(-0.5..0.5)).collect();
    EquivariantLayer::new(l.u().clone(), l.v().clone(), bias, k, Activation::Softplus).unwrap()
}

fn random_vec(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-2.0..2.0)).collect()
}

fn equivariance() -> Verdict {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for depth in 1..=3 {
        for k in 1..=8 {
            for _ in 0..100 {
                let (net, d_in, d_out) = random_stack(&mut r, k, depth);
                let x = random_vec(&mut r, k * d_in);
                let y = net.forward(&x).unwrap();
                for perm in test_perms(k, 20, &mut r) {
                    let yp = net
                        .forward(&permute_blocks(&x, &perm, d_in).unwrap())
                        .unwrap();
                    worst = worst.max(max_abs_diff(
                        &yp,
                        &permute_blocks(&y, &perm, d_out).unwrap(),
                    ));
                    checks += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && secs < 10.0,
        format!("{checks} permuted evaluations, max deviation {worst:.2e}, {secs:.1} s"),
    )
}

fn dense_equivalence() -> Verdict {
    let mut r = rng(202);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = r.random_range(1..=8);
        let (d_in, d_out) = (r.random_range(1..=6), r.random_range(1..=6));
        let layer = random_eq_layer(&mut r, k, d_in, d_out);
        let bias = (0..k).flat_map(|_| layer.bias().iter().copied()).collect();
        let dense = DenseLayer::new(expand_to_dense(&layer), bias, Activation::Softplus).unwrap();
        let x = random_vec(&mut r, k * d_in);
        worst = worst.max(max_abs_diff(
            &layer.forward(&x).unwrap(),
            &dense.forward(&x).unwrap(),
        ));
    }
    verdict(
        worst <= 1e-12,
        format!("100 cases, max deviation {worst:.2e}"),
    )
}

fn lagrangian_gradients() -> Verdict {
    let net = NetworkConfig {
        k_max: 3,
        n_frames: 4,
        ..NetworkConfig::desk()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let cfg = TrainConfig {
            k_max: 3,
            n_frames: 4,
            plan_hidden_per_block: vec![5, 5],
            multiplier_hidden: vec![8],
            sharing: true,
            seed,
            ..TrainConfig::desk()
        };
        let model = PlanModel::new(&cfg, &mut rng(seed)).unwrap();
        let scs: Vec<Scenario> = (0..3)
            .map(|n| gen_scenario_seeded(seed * 10 + n, 1 + n as usize, &net).unwrap())
            .collect();
        let samples = build_samples(&scs).unwrap();
        let refs: Vec<&Sample> = samples.iter().collect();
        let eval = empirical_lagrangian(&model, &refs, scs.len(), true, true).unwrap();
        let value = |m: &PlanModel| {
            empirical_lagrangian(m, &refs, scs.len(), false, false)
                .unwrap()
                .value
        };
        let floor = REL_ERR_FLOOR * eval.value.abs().max(1.0);

        let mut probe = model.clone();
        let numeric = central_difference(
            |theta| {
                probe.plan.set_flat_params(theta).unwrap();
                value(&probe)
            },
            &model.plan.flat_params(),
            FD_STEP,
        );
        worst = worst.max(max_relative_error_floor(
            &eval.plan_grads.concat(),
            &numeric,
            floor,
        ));

        let mut probe = model.clone();
        let numeric = central_difference(
            |theta| {
                probe.multiplier.set_flat_params(theta).unwrap();
                value(&probe)
            },
            &model.multiplier.flat_params(),
            FD_STEP,
        );
        worst = worst.max(max_relative_error_floor(
            &eval.multiplier_grads.concat(),
            &numeric,
            floor,
        ));
    }
    verdict(
        worst <= 1e-4,
        format!("DNN-s and DNN-λ over 5 models, max relative error {worst:.2e}"),
    )
}

fn qos_by_construction() -> Verdict {
    let mut r = rng(404);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (k_max, t_f) = (r.random_range(1..=8), r.random_range(1..=10));
        let rates: Vec<f64> = (0..k_max * t_f)
            .map(|_| {
                if r.random_bool(0.2) {
                    0.0
                } else {
                    r.random_range(0.01..30.0)
                }
            })
            .collect();
        let raw: Vec<f64> = (0..k_max * t_f)
            .map(|_| r.random_range(-10.0f64..3.0).exp())
            .collect();
        let plan = normalize_plan(&raw, &rates, t_f).unwrap();
        for (k, d) in delivered(&plan, &rates, t_f).iter().enumerate() {
            if rates[k * t_f..(k + 1) * t_f].iter().any(|v| *v != 0.0) {
                worst = worst.max((d - 1.0).abs());
            }
        }
    }
    verdict(
        worst <= 1e-12,
        format!("1000 raw outputs, max residual {worst:.2e}"),
    )
}

fn lp_oracle() -> Verdict {
    let start = Instant::now();
    let mut r = rng(505);
    let (mut worst_obj, mut worst_kkt): (f64, f64) = (0.0, 0.0);
    let (mut mismatched, mut infeasible) = (0, 0);
    for n in 0..50u64 {
        let t_f = r.random_range(1..=4);
        let k = r.random_range(1..=3);
        let n_bs = r.random_range(1..=2);
        let sc = if n % 2 == 0 {
            random_instance(&mut r, 3, k, t_f, n_bs, 0.3, 3.0)
        } else {
            let net = NetworkConfig {
                k_max: 3,
                n_frames: t_f,
                ..NetworkConfig::desk()
            };
            gen_scenario_seeded(n, k, &net).unwrap()
        };
        let sol = solve_plan(&sc, SOLVER_TOL).unwrap();
        match vertex_enumeration(&build_lp(&sc).unwrap().lp) {
            None => {
                infeasible += 1;
                mismatched += usize::from(sol.status != PlanStatus::Infeasible);
            }
            Some(best) => {
                if sol.status != PlanStatus::Optimal {
                    mismatched += 1;
                    continue;
                }
                worst_obj = worst_obj.max((sol.objective - best).abs());
                let gap = sol.kkt.duality_gap / (1.0 + sol.objective.abs());
                worst_kkt = worst_kkt.max(sol.kkt.max_residual()).max(gap);
                mismatched += usize::from(!verify_plan(&sol.plan, &sc, 1e-6).unwrap().feasible);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        mismatched == 0 && worst_obj <= 1e-3 && worst_kkt <= 1e-6 && secs < 60.0,
        format!(
            "50 instances ({infeasible} infeasible), {mismatched} mismatches, objective error {worst_obj:.2e}, KKT residual {worst_kkt:.2e}, {secs:.1} s"
        ),
    )
}

fn desk_training(desk: &mut Desk) -> Verdict {
    let start = Instant::now();
    let model = desk.proposed().clone();
    let rep = evaluate_gap(&model, &desk.test, &desk.oracle).unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        rep.gap <= TARGET_GAP,
        format!(
            "gap {:.4} on {} test scenarios, capacity violation {:.2e}, {secs:.0} s",
            rep.gap, rep.scenarios, rep.mean_capacity_violation
        ),
    )
}

/// First size (or epoch) whose gap is at most `target`.
fn reached(r: &SweepResult, target: f64) -> Option<usize> {
    r.points
        .iter()
        .find(|p| p.report.gap <= target)
        .map(|p| p.size)
}

fn trend(label: &str, shared: &SweepResult, dense: &SweepResult) {
    for target in [0.10, 0.05, 0.02] {
        println!(
            "    info: {label} to reach gap {target:.2}: sharing {:?}, no sharing {:?}",
            reached(shared, target),
            reached(dense, target)
        );
    }
}

fn gaps(r: &SweepResult) -> String {
    r.points
        .iter()
        .map(|p| format!("{}:{:.3}", p.size, p.report.gap))
        .collect::<Vec<_>>()
        .join(" ")
}

fn sample_complexity(desk: &Desk) -> Verdict {
    let sizes = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000];
    let run = |sharing| {
        let cfg = TrainConfig {
            sharing,
            ..desk.cfg.clone()
        };
        sample_complexity_sweep(
            &sizes,
            &desk.pool,
            &desk.test,
            &desk.oracle,
            &cfg,
            TARGET_GAP,
        )
        .unwrap()
    };
    let (shared, dense) = (run(true), run(false));
    println!("    info: gaps with sharing    {}", gaps(&shared));
    println!("    info: gaps without sharing {}", gaps(&dense));
    trend("training scenarios", &shared, &dense);
    let pass = match (shared.threshold, dense.threshold) {
        (Some(s), Some(d)) => s < d && 2 * s <= d,
        (Some(_), None) => true,
        _ => false,
    };
    verdict(
        pass,
        format!(
            "minimal training set for gap {TARGET_GAP}: sharing {:?}, no sharing {:?}",
            shared.threshold, dense.threshold
        ),
    )
}

fn epoch_complexity(desk: &Desk) -> Verdict {
    let train_set = &desk.pool;
    let run = |sharing, target| {
        let cfg = TrainConfig {
            sharing,
            ..desk.cfg.clone()
        };
        epoch_complexity_sweep(train_set, &desk.test, &desk.oracle, &cfg, target, 1).unwrap()
    };
    let (shared, dense) = (run(true, TARGET_GAP), run(false, TARGET_GAP));
    let (shared_curve, dense_curve) = (run(true, 0.02), run(false, 0.02));
    trend("epochs", &shared_curve, &dense_curve);
    let pass = match (shared.threshold, dense.threshold) {
        (Some(s), Some(d)) => s < d,
        (Some(_), None) => true,
        _ => false,
    };
    verdict(
        pass,
        format!(
            "epochs to gap {TARGET_GAP}: sharing {:?}, no sharing {:?}",
            shared.threshold, dense.threshold
        ),
    )
}

fn method_ordering(desk: &mut Desk) -> Verdict {
    let sup_cfg = TrainConfig {
        supervision: Supervision::Supervised,
        ..desk.cfg.clone()
    };
    let supervised = train(
        &TrainingSet::with_labels(&desk.pool, SOLVER_TOL).unwrap(),
        &sup_cfg,
    )
    .unwrap()
    .model;
    let proposed = desk.proposed().clone();
    let rows = compare_methods(
        &[("proposed", &proposed), ("supervised", &supervised)],
        &desk.test,
        &desk.oracle,
        &desk.net,
        TEST_SEED,
    )
    .unwrap();
    let row = |name: &str| rows.iter().find(|r| r.method == name).unwrap();
    let (opt, prop, sup, edf) = (
        row("optimal"),
        row("proposed"),
        row("supervised"),
        row("baseline"),
    );
    for r in &rows {
        println!(
            "    info: {:<10} mean time {:.4} s, capacity violation {:.3e}, incomplete {}",
            r.method, r.mean_time_s, r.mean_capacity_violation, r.incomplete
        );
    }
    let ordered = opt.mean_time_s <= prop.mean_time_s && prop.mean_time_s <= edf.mean_time_s;
    let within = prop.mean_time_s <= 1.25 * opt.mean_time_s;
    let conflict = sup.mean_capacity_violation > prop.mean_capacity_violation;
    verdict(
        opt.trials >= 100 && ordered && within && conflict,
        format!(
            "{} trials; ordering {}, proposed/optimal {:.3}, capacity violation supervised {:.3e} vs unsupervised {:.3e}",
            opt.trials,
            if ordered { "holds" } else { "violated" },
            prop.mean_time_s / opt.mean_time_s,
            sup.mean_capacity_violation,
            prop.mean_capacity_violation
        ),
    )
}

/// Bytes produced by every stage of a small pipeline.
fn pipeline_bytes() -> Vec<(&'static str, Vec<u8>)> {
    let net = NetworkConfig::desk();
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 8,
        ..TrainConfig::desk()
    };
    let pool = gen_dataset(7, 24, false, &net).unwrap();
    let test = gen_dataset(8, 10, true, &net).unwrap();
    let oracle: Vec<PlanSolution> = test
        .iter()
        .map(|sc| solve_plan(sc, SOLVER_TOL).unwrap())
        .collect();
    let mut out = Vec::new();

    let mut data = Vec::new();
    write_jsonl(
        &mut data,
        &FileHeader::new(DATASET_FORMAT, 7, "h", pool.len()),
        &pool,
    )
    .unwrap();
    out.push(("dataset", data));
    let mut sol = Vec::new();
    write_jsonl(
        &mut sol,
        &FileHeader::new(ORACLE_FORMAT, 8, "h", oracle.len()),
        &oracle,
    )
    .unwrap();
    out.push(("oracle", sol));

    let state = train(&TrainingSet::from_scenarios(&pool).unwrap(), &cfg).unwrap();
    let mut model = Vec::new();
    state.model.save(&mut model).unwrap();
    out.push(("model", model));
    out.push((
        "history",
        state
            .history
            .iter()
            .flat_map(|v| v.to_bits().to_le_bytes())
            .collect(),
    ));

    let sup_cfg = TrainConfig {
        supervision: Supervision::Supervised,
        ..cfg.clone()
    };
    let sup = train(
        &TrainingSet::with_labels(&pool, SOLVER_TOL).unwrap(),
        &sup_cfg,
    )
    .unwrap();
    let mut model = Vec::new();
    sup.model.save(&mut model).unwrap();
    out.push(("supervised model", model));

    let rep = evaluate_gap(&state.model, &test, &oracle).unwrap();
    out.push(("evaluation", serde_json::to_vec(&rep).unwrap()));
    let rows = compare_methods(&[("proposed", &state.model)], &test, &oracle, &net, 8).unwrap();
    out.push(("comparison", serde_json::to_vec(&rows).unwrap()));
    let sweep = sample_complexity_sweep(&[4, 12], &pool, &test, &oracle, &cfg, 0.1).unwrap();
    out.push(("sample sweep", serde_json::to_vec(&sweep).unwrap()));
    let sweep = epoch_complexity_sweep(&pool, &test, &oracle, &cfg, 0.0, 2).unwrap();
    out.push(("epoch sweep", serde_json::to_vec(&sweep).unwrap()));
    out
}

fn determinism() -> Verdict {
    let (a, b) = (pipeline_bytes(), pipeline_bytes());
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0)
        .collect();
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} stages bit-identical across two runs", a.len())
        } else {
            format!("stages differ: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let mut desk = Desk::new();
    type Criterion = Box<dyn FnOnce(&mut Desk) -> Verdict>;
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1 equivariance", Box::new(|_| equivariance())),
        ("2 dense equivalence", Box::new(|_| dense_equivalence())),
        (
            "3 Lagrangian gradients",
            Box::new(|_| lagrangian_gradients()),
        ),
        ("4 QoS by construction", Box::new(|_| qos_by_construction())),
        ("5 LP oracle", Box::new(|_| lp_oracle())),
        ("6 desk training gap", Box::new(desk_training)),
        ("7 sample complexity", Box::new(|d| sample_complexity(d))),
        ("8 epoch complexity", Box::new(|d| epoch_complexity(d))),
        ("9 method ordering", Box::new(method_ordering)),
        ("10 determinism", Box::new(|_| determinism())),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let v = run(&mut desk);
        println!(
            "{} criterion {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!(
            "acceptance: {} failing: {}",
            failed.len(),
            failed.join(", ")
        );
        ExitCode::FAILURE
    }
}
