use std::error::Error;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use pra_core::edf::{compare_methods, edf_schedule};
use pra_core::io::{
    load_config, read_jsonl, write_jsonl, ExperimentConfig, FileHeader, DATASET_FORMAT,
    ORACLE_FORMAT,
};
use pra_core::lp::{solve_plan, PlanSolution, SOLVER_TOL};
use pra_core::rng::{substream, Purpose};
use pra_core::sim::{gen_dataset, Scenario};
use pra_core::trainer::{
    epoch_complexity_sweep, evaluate_gap, sample_complexity_sweep, train_with, PlanModel,
    Supervision, TrainConfig, TrainingSet,
};
use serde::{Deserialize, Serialize};

use crate::output::{config_hash, CsvOut, Staged};
use crate::{Common, Method, TestSet};

type Res<T> = Result<T, Box<dyn Error>>;

struct Ctx {
    cfg: ExperimentConfig,
    hash: String,
    seed: u64,
}

fn context(common: &Common) -> Res<Ctx> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => ExperimentConfig::desk(),
    };
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    Ok(Ctx {
        hash: config_hash(&cfg),
        seed: cfg.train.seed,
        cfg,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OracleRecord {
    index: usize,
    scenario_seed: u64,
    solution: PlanSolution,
}

fn load_dataset(path: &Path, ctx: &Ctx) -> Res<Vec<Scenario>> {
    let (header, scs): (FileHeader, Vec<Scenario>) = read_jsonl(BufReader::new(File::open(path)?))
        .map_err(|e| format!("{}: {e}", path.display()))?;
    header.check(DATASET_FORMAT, scs.len())?;
    let net = &ctx.cfg.network;
    for (n, sc) in scs.iter().enumerate() {
        sc.validate()?;
        if sc.k_max() != net.k_max || sc.n_frames() != net.n_frames || sc.n_bs() != net.n_bs {
            return Err(format!(
                "{}: scenario {n} does not match the config dimensions",
                path.display()
            )
            .into());
        }
    }
    Ok(scs)
}

fn load_oracle(path: &Path, scs: &[Scenario]) -> Res<Vec<PlanSolution>> {
    let (header, recs): (FileHeader, Vec<OracleRecord>) =
        read_jsonl(BufReader::new(File::open(path)?))
            .map_err(|e| format!("{}: {e}", path.display()))?;
    header.check(ORACLE_FORMAT, recs.len())?;
    if recs.len() != scs.len() {
        return Err(format!(
            "{}: {} solutions for {} scenarios",
            path.display(),
            recs.len(),
            scs.len()
        )
        .into());
    }
    recs.into_iter()
        .zip(scs)
        .map(|(r, sc)| {
            if r.scenario_seed != sc.seed {
                return Err(format!(
                    "{}: record {} belongs to another scenario",
                    path.display(),
                    r.index
                )
                .into());
            }
            Ok(r.solution)
        })
        .collect()
}

fn load_test(test: &TestSet, ctx: &Ctx) -> Res<(Vec<Scenario>, Vec<PlanSolution>)> {
    let scs = load_dataset(&test.test, ctx)?;
    let oracle = load_oracle(&test.oracle, &scs)?;
    Ok((scs, oracle))
}

fn training_set(scs: &[Scenario], cfg: &TrainConfig) -> Res<TrainingSet> {
    Ok(match cfg.supervision {
        Supervision::Unsupervised => TrainingSet::from_scenarios(scs)?,
        Supervision::Supervised => TrainingSet::with_labels(scs, SOLVER_TOL)?,
    })
}

pub fn gen_data(common: &Common, count: usize, random_k: bool, out: &Path) -> Res<()> {
    let ctx = context(common)?;
    let scs = gen_dataset(ctx.seed, count, random_k, &ctx.cfg.network)?;
    let mut file = Staged::create(out)?;
    write_jsonl(
        file.writer(),
        &FileHeader::new(DATASET_FORMAT, ctx.seed, &ctx.hash, scs.len()),
        &scs,
    )?;
    file.commit()?;
    println!("wrote {count} scenarios to {}", out.display());
    Ok(())
}

pub fn oracle(common: &Common, data: &Path, out: &Path) -> Res<()> {
    let ctx = context(common)?;
    let scs = load_dataset(data, &ctx)?;
    let recs = scs
        .iter()
        .enumerate()
        .map(|(index, sc)| {
            Ok(OracleRecord {
                index,
                scenario_seed: sc.seed,
                solution: solve_plan(sc, SOLVER_TOL)?,
            })
        })
        .collect::<pra_core::Result<Vec<_>>>()?;
    let mut file = Staged::create(out)?;
    write_jsonl(
        file.writer(),
        &FileHeader::new(ORACLE_FORMAT, ctx.seed, &ctx.hash, recs.len()),
        &recs,
    )?;
    file.commit()?;
    let total: f64 = recs.iter().map(|r| r.solution.objective).sum();
    println!("solved {} plans, total objective {total}", recs.len());
    Ok(())
}

fn method_config(ctx: &Ctx, method: &Method) -> TrainConfig {
    let mut cfg = ctx.cfg.train.clone();
    if let Some(s) = method.sharing {
        cfg.sharing = s;
    }
    if method.supervised {
        cfg.supervision = Supervision::Supervised;
    }
    cfg
}

fn write_model(path: &Path, model: &PlanModel, ctx: &Ctx) -> Res<()> {
    let mut file = Staged::create(path)?;
    writeln!(
        file.writer(),
        "# config_hash={} seed={}",
        ctx.hash,
        ctx.seed
    )?;
    model.save(file.writer())?;
    file.commit()?;
    Ok(())
}

pub fn train(
    common: &Common,
    method: &Method,
    data: &Path,
    out: &Path,
    log: Option<&Path>,
    test: Option<&TestSet>,
    eval_every: usize,
) -> Res<()> {
    let ctx = context(common)?;
    let cfg = method_config(&ctx, method);
    let scs = load_dataset(data, &ctx)?;
    let test = test.map(|t| load_test(t, &ctx)).transpose()?;
    let mut log = log
        .map(|p| {
            CsvOut::create(
                p,
                &ctx.hash,
                ctx.seed,
                &["epoch", "loss", "gap", "capacity_violation"],
            )
        })
        .transpose()?;
    let set = training_set(&scs, &cfg)?;
    let every = eval_every.max(1);
    let state = train_with(&set, &cfg, |st| {
        let mut gap = None;
        if let Some((t, o)) = &test {
            if st.epoch % every == 0 || st.epoch == cfg.epochs {
                let r = evaluate_gap(&st.model, t, o)?;
                gap = Some((r.gap, r.mean_capacity_violation));
            }
        }
        if let Some(l) = log.as_mut() {
            l.row((
                st.epoch,
                st.history[st.epoch - 1],
                gap.map(|g| g.0),
                gap.map(|g| g.1),
            ))
            .map_err(|e| pra_core::Error::InvalidArgument(e.to_string()))?;
        }
        Ok(true)
    })?;
    write_model(out, &state.model, &ctx)?;
    if let Some(l) = log {
        l.commit()?;
    }
    println!(
        "trained {} epochs, final loss {}",
        state.epoch,
        state.history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn eval(common: &Common, model: &Path, test: &TestSet, out: &Path) -> Res<()> {
    let ctx = context(common)?;
    let m = PlanModel::load(BufReader::new(File::open(model)?), &ctx.cfg.train)?;
    let (scs, oracle) = load_test(test, &ctx)?;
    let r = evaluate_gap(&m, &scs, &oracle)?;
    let mut csv = CsvOut::create(
        out,
        &ctx.hash,
        ctx.seed,
        &[
            "scenarios",
            "gap",
            "mean_capacity_violation",
            "mean_qos_residual",
            "unrepaired_users",
        ],
    )?;
    csv.row((
        r.scenarios,
        r.gap,
        r.mean_capacity_violation,
        r.mean_qos_residual,
        r.unrepaired_users,
    ))?;
    csv.commit()?;
    println!(
        "gap {:.4} over {} scenarios, capacity violation {:.4}",
        r.gap, r.scenarios, r.mean_capacity_violation
    );
    Ok(())
}

pub fn baseline(common: &Common, data: &Path, out: &Path) -> Res<()> {
    let ctx = context(common)?;
    let scs = load_dataset(data, &ctx)?;
    let mut csv = CsvOut::create(
        out,
        &ctx.hash,
        ctx.seed,
        &[
            "method",
            "index",
            "k",
            "n_frames",
            "mean_time_s",
            "incomplete",
        ],
    )?;
    for (n, sc) in scs.iter().enumerate() {
        let o = edf_schedule(
            sc,
            &mut substream(ctx.seed, Purpose::Fading, n as u64),
            &ctx.cfg.network,
        )?;
        let incomplete = o.complete.iter().filter(|c| !**c).count();
        csv.row((
            "baseline",
            n,
            sc.k,
            sc.n_frames(),
            o.mean_time(),
            incomplete,
        ))?;
    }
    csv.commit()?;
    println!("scheduled {} scenarios", scs.len());
    Ok(())
}

pub fn sweep_samples(
    common: &Common,
    data: &Path,
    test: &TestSet,
    sizes: &[usize],
    target: f64,
    out: &Path,
) -> Res<()> {
    let ctx = context(common)?;
    let pool = load_dataset(data, &ctx)?;
    let (scs, oracle) = load_test(test, &ctx)?;
    let mut csv = CsvOut::create(
        out,
        &ctx.hash,
        ctx.seed,
        &["sharing", "size", "gap", "capacity_violation", "reached"],
    )?;
    for sharing in [true, false] {
        let cfg = TrainConfig {
            sharing,
            ..ctx.cfg.train.clone()
        };
        let r = sample_complexity_sweep(sizes, &pool, &scs, &oracle, &cfg, target)?;
        for p in &r.points {
            csv.row((
                sharing,
                p.size,
                p.report.gap,
                p.report.mean_capacity_violation,
                p.report.gap <= target,
            ))?;
        }
        println!("sharing={sharing}: threshold {:?}", r.threshold);
    }
    csv.commit()?;
    Ok(())
}

pub fn sweep_epochs(
    common: &Common,
    data: &Path,
    test: &TestSet,
    target: f64,
    eval_every: usize,
    out: &Path,
) -> Res<()> {
    let ctx = context(common)?;
    let scs_train = load_dataset(data, &ctx)?;
    let (scs, oracle) = load_test(test, &ctx)?;
    let mut csv = CsvOut::create(
        out,
        &ctx.hash,
        ctx.seed,
        &["sharing", "epoch", "gap", "capacity_violation", "reached"],
    )?;
    for sharing in [true, false] {
        let cfg = TrainConfig {
            sharing,
            ..ctx.cfg.train.clone()
        };
        let r = epoch_complexity_sweep(&scs_train, &scs, &oracle, &cfg, target, eval_every)?;
        for p in &r.points {
            csv.row((
                sharing,
                p.size,
                p.report.gap,
                p.report.mean_capacity_violation,
                p.report.gap <= target,
            ))?;
        }
        println!("sharing={sharing}: epochs to target {:?}", r.threshold);
    }
    csv.commit()?;
    Ok(())
}

pub fn compare(common: &Common, data: &Path, test: &TestSet, out: &Path) -> Res<()> {
    let ctx = context(common)?;
    let scs_train = load_dataset(data, &ctx)?;
    let (scs, oracle) = load_test(test, &ctx)?;
    let unsup = TrainConfig {
        supervision: Supervision::Unsupervised,
        ..ctx.cfg.train.clone()
    };
    let sup = TrainConfig {
        supervision: Supervision::Supervised,
        ..ctx.cfg.train.clone()
    };
    let proposed = train_with(&training_set(&scs_train, &unsup)?, &unsup, |_| Ok(true))?.model;
    let supervised = train_with(&training_set(&scs_train, &sup)?, &sup, |_| Ok(true))?.model;
    let rows = compare_methods(
        &[("proposed", &proposed), ("supervised", &supervised)],
        &scs,
        &oracle,
        &ctx.cfg.network,
        ctx.seed,
    )?;
    let mut csv = CsvOut::create(
        out,
        &ctx.hash,
        ctx.seed,
        &[
            "method",
            "k_max",
            "n_frames",
            "trials",
            "users",
            "mean_time_s",
            "mean_capacity_violation",
            "mean_qos_residual",
            "incomplete",
        ],
    )?;
    for r in &rows {
        csv.row((
            &r.method,
            ctx.cfg.network.k_max,
            ctx.cfg.network.n_frames,
            r.trials,
            r.users,
            r.mean_time_s,
            r.mean_capacity_violation,
            r.mean_qos_residual,
            r.incomplete,
        ))?;
        println!(
            "{:<10} mean time {:.4} s, capacity violation {:.4}",
            r.method, r.mean_time_s, r.mean_capacity_violation
        );
    }
    csv.commit()?;
    Ok(())
}
