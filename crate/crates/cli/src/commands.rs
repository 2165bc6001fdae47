use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::Rng;
use serde_json::{json, Map, Value};
use twofactor::design::{Config, FactorSpace, Record, RunLog, SupportCounts};
use twofactor::effects::{bootstrap_cis, level_means, quantile, ShrinkageSpec};
use twofactor::objective::{
    objective_from_json, two_factor_predict, CostModel, ObjectiveSpec, Problem, DEFAULT_GAMMA,
    DEFAULT_LAMBDA_COST, DEFAULT_LAMBDA_RISK,
};
use twofactor::optimizer::{
    diag_dominance_check_seeded, exhaustive_argmax, multistart, neighborhood_pool, top_k,
    two_swap_bound, verify_1swap, SearchSpec,
};
use twofactor::pci::{pci_all, pci_rank_pairs, write_pci_csv, Normalization};
use twofactor::planner::{effect_error_budget, hoeffding_cell_n, infer_bound, uniform_cells_n};
use twofactor::rng;
use twofactor::shapley::{mc_sample_size, write_shapley_csv};
use twofactor::simulation::{run_suite, write_suite_csv, Axis, Suite, SuiteConfig, SuiteResult};

use crate::args::{
    AblateArgs, Cli, Command, EstimateArgs, GlobalArgs, OptimizeArgs, PathKind, PciArgs, PlanArgs,
    SimulateArgs,
};
use crate::output::{csv_header, json_bytes, json_header, Artifacts, Input};
use crate::pipeline::{self, Loaded, Settings};

/// Grids up to this size are ranked and certified exhaustively.
pub const EXHAUSTIVE_CAP: u128 = 1_000_000;

/// Stream key separating top-K bootstrap draws from the search restarts.
const BOOTSTRAP_KEY: u64 = 0xb007;

/// What a subcommand printed and wrote.
#[derive(Debug, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub written: Vec<PathBuf>,
}

pub fn run(cli: &Cli) -> Result<Report> {
    let g = &cli.global;
    match &cli.command {
        Command::Estimate(a) => estimate(g, a),
        Command::Optimize(a) => optimize(g, a),
        Command::Pci(a) => pci(g, a),
        Command::Plan(a) => plan(g, a),
        Command::Simulate(a) => simulate(g, a),
        Command::Ablate(a) => ablate(g, a),
    }
}

fn out_dir(global: &GlobalArgs) -> Result<&Path> {
    global
        .out
        .as_deref()
        .ok_or_else(|| anyhow!("--out is required"))
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_bytes(header: String, rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut buf = header.into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

fn labelled(space: &FactorSpace, x: &Config) -> Value {
    let m: Map<String, Value> = (0..space.dim())
        .map(|j| (space.name(j).to_string(), json!(space.label(j, x[j]))))
        .collect();
    Value::Object(m)
}

fn global_json(global: &GlobalArgs, settings: &Settings) -> Value {
    json!({
        "space": global.space,
        "log": global.log,
        "out": global.out,
        "estimation": settings.to_json(),
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

fn record_counts(log: &RunLog) -> HashMap<&Config, usize> {
    let mut counts = HashMap::new();
    for r in log.records() {
        *counts.entry(&r.config).or_default() += 1;
    }
    counts
}

fn estimate(global: &GlobalArgs, args: &EstimateArgs) -> Result<Report> {
    let out = out_dir(global)?;
    let Loaded {
        space,
        log,
        space_input,
        log_input,
    } = pipeline::load(global)?;
    let settings = Settings::new(global, args.estimation.shapley_samples);
    let fitted = pipeline::fit(&space, &log, &settings, true)?;
    let tag = settings.path.tag();
    let units = &args.estimation.units;
    let support = SupportCounts::from_log(&space, &log);
    let means = level_means(&space, &log)?;

    // CM intervals come from the same bootstrap that supplies level-mean intervals.
    let boot = if args.bootstrap > 0 {
        let shrinkage = ShrinkageSpec::shared(&space, settings.tau)?;
        Some(bootstrap_cis(
            &space,
            &log,
            &fitted.reference,
            &shrinkage,
            args.bootstrap,
            args.coverage,
            global.seed,
        )?)
    } else {
        None
    };
    let mut table = fitted.table;
    if settings.path == PathKind::Cm {
        if let Some(b) = &boot {
            table.intervals = b.intervals.clone();
        }
    }
    let level_ci = boot
        .as_ref()
        .and_then(|b| b.intervals.as_ref())
        .map(|iv| iv.level_means.clone());

    let mut artifacts = Artifacts::new();
    let mut doc = table.to_json_value();
    doc["header"] = json_header(units, tag);
    artifacts.add("effects.json", json_bytes(&doc));

    let mut mains = vec![["factor", "level", "n", "mean", "ci_lo", "ci_hi", "effect"]
        .map(String::from)
        .to_vec()];
    for j in 0..space.dim() {
        for l in 0..space.levels(j) {
            let ci = level_ci.as_ref().map(|c| c[j][l]);
            mains.push(vec![
                space.name(j).to_string(),
                space.label(j, l).to_string(),
                support.main(j, l).to_string(),
                opt_num(means[j][l]),
                opt_num(ci.filter(|_| means[j][l].is_some()).map(|c| c.lo)),
                opt_num(ci.filter(|_| means[j][l].is_some()).map(|c| c.hi)),
                num(table.main(j, l)),
            ]);
        }
    }
    artifacts.add("mains.csv", csv_bytes(csv_header(units, tag), mains)?);

    let mut pairs = vec![[
        "factor_j",
        "factor_k",
        "level_j",
        "level_k",
        "n",
        "effect",
        "ci_lo",
        "ci_hi",
        "unsupported",
    ]
    .map(String::from)
    .to_vec()];
    for (p, (j, k)) in space.pairs().into_iter().enumerate() {
        for (l, m, v) in table.pairs[p].iter() {
            let ci = table.intervals.as_ref().map(|iv| *iv.pairs[p].get(l, m));
            pairs.push(vec![
                space.name(j).to_string(),
                space.name(k).to_string(),
                space.label(j, l).to_string(),
                space.label(k, m).to_string(),
                support.pair(&space, j, l, k, m).to_string(),
                num(*v),
                opt_num(ci.map(|c| c.lo)),
                opt_num(ci.map(|c| c.hi)),
                table.unsupported_pairs[p].get(l, m).to_string(),
            ]);
        }
    }
    artifacts.add(
        "interactions.csv",
        csv_bytes(csv_header(units, tag), pairs)?,
    );

    let mut lines = vec![format!(
        "estimated {} factors, {} pairs from {} records ({tag})",
        space.dim(),
        space.pair_count(),
        log.len()
    )];
    if let Some(sf) = &fitted.sf {
        let mut buf = csv_header("attribution", tag).into_bytes();
        write_shapley_csv(&space, &sf.estimates, &mut buf)?;
        artifacts.add("shapley.csv", buf);
        let mut diag = serde_json::to_value(sf.diagnostics)?;
        diag["unobserved_cells"] = json!(sf.unobserved_cells);
        diag["header"] = json_header(units, tag);
        artifacts.add("sf_diagnostics.json", json_bytes(&diag));
        if sf.unobserved_cells > 0 {
            lines.push(format!(
                "warning: {} configurations were never observed; their values fall back to the log mean",
                sf.unobserved_cells
            ));
        }
    }

    let config = merge(
        global_json(global, &settings),
        json!({ "bootstrap": args.bootstrap, "coverage": args.coverage, "units": units }),
    );
    let written = artifacts.commit(
        out,
        "estimate",
        config,
        &[&space_input, &log_input],
        global.seed,
    )?;
    lines.push(format!(
        "wrote {} files to {}",
        written.len(),
        out.display()
    ));
    Ok(Report { lines, written })
}

fn objective_setup(
    global: &GlobalArgs,
    space: &FactorSpace,
    file: Option<&Input>,
) -> Result<(ObjectiveSpec, CostModel)> {
    let (mut spec, cost) = match file {
        Some(input) => objective_from_json(space, input.text()?)?,
        None => (
            ObjectiveSpec::new(
                space,
                DEFAULT_LAMBDA_RISK,
                DEFAULT_LAMBDA_COST,
                DEFAULT_GAMMA,
            )?,
            CostModel::zero(space),
        ),
    };
    for (flag, v) in [
        ("--lambda-risk", global.lambda_risk),
        ("--lambda-cost", global.lambda_cost),
    ] {
        if let Some(v) = v {
            if !v.is_finite() || v < 0.0 {
                bail!("{flag} must be a nonnegative number, got {v}");
            }
        }
    }
    if let Some(v) = global.lambda_risk {
        spec.lambda_risk = v;
    }
    if let Some(v) = global.lambda_cost {
        spec.lambda_cost = v;
    }
    if let Some(g) = global.gamma {
        spec.set_shared_gamma(g)?;
    }
    Ok((spec, cost))
}

fn resample(space: &FactorSpace, log: &RunLog, seed: u64, b: u64) -> Result<RunLog> {
    let mut r = rng::stream(seed, &[BOOTSTRAP_KEY, b]);
    let n = log.len();
    loop {
        let records: Vec<Record> = (0..n)
            .map(|_| log.records()[r.random_range(0..n)].clone())
            .collect();
        if let Ok(resampled) = RunLog::new(space, records) {
            return Ok(resampled);
        }
    }
}

fn optimize(global: &GlobalArgs, args: &OptimizeArgs) -> Result<Report> {
    let out = out_dir(global)?;
    let loaded = pipeline::load(global)?;
    let (space, log) = (&loaded.space, &loaded.log);
    let objective_input = args
        .objective
        .as_deref()
        .map(|p| Input::read("objective", p))
        .transpose()?;
    let settings = Settings::new(global, args.estimation.shapley_samples);
    let fitted = pipeline::fit(space, log, &settings, true)?;
    let (spec, cost) = objective_setup(global, space, objective_input.as_ref())?;
    let support = SupportCounts::from_log(space, log);
    let problem = Problem::new(&fitted.table, &support, &spec, &cost);
    let search = SearchSpec {
        restarts: args.restarts,
        beam: args.beam,
        eps_stop: args.eps_stop,
        max_sweeps: args.max_sweeps,
        seed: global.seed,
    };
    let ms = multistart(&problem, &search)?;
    let swap = verify_1swap(&problem, &ms.best)?;
    let bound = two_swap_bound(&problem, &ms.best)?;
    let dominance = diag_dominance_check_seeded(&problem, global.seed);
    let enumerable = space.grid_size() <= EXHAUSTIVE_CAP;
    let global_opt = if enumerable {
        Some(exhaustive_argmax(&problem, EXHAUSTIVE_CAP)?)
    } else {
        None
    };
    let pool = if enumerable {
        space.enumerate()?
    } else {
        neighborhood_pool(&problem, &ms.traces)
    };
    let top = top_k(&problem, pool, args.top_k)?;

    // Percentile intervals of J over record-level bootstrap refits; risk and
    // cost stay at their full-log values.
    let tag = settings.path.tag();
    let units = &args.estimation.units;
    let mut replicates: Vec<Vec<f64>> = vec![Vec::with_capacity(args.bootstrap); top.len()];
    for b in 0..args.bootstrap {
        let resampled = resample(space, log, global.seed, b as u64)?;
        let t = pipeline::fit(space, &resampled, &settings, false)?.table;
        for (i, (x, _)) in top.iter().enumerate() {
            let terms = problem.terms(x)?;
            replicates[i].push(
                two_factor_predict(&t, x)
                    - spec.lambda_risk * terms.risk
                    - spec.lambda_cost * terms.cost,
            );
        }
    }
    let alpha = (1.0 - args.coverage) / 2.0;
    let counts = record_counts(log);

    let mut artifacts = Artifacts::new();
    let factor_names: Vec<String> = (0..space.dim())
        .map(|j| space.name(j).to_string())
        .collect();

    let mut header = vec!["rank".to_string()];
    header.extend(factor_names.iter().cloned());
    header.extend(
        [
            "objective",
            "ci_lo",
            "ci_hi",
            "prediction",
            "risk",
            "cost",
            "n_obs",
        ]
        .map(String::from),
    );
    let mut rows = vec![header];
    for (i, (x, v)) in top.iter().enumerate() {
        let terms = problem.terms(x)?;
        let (lo, hi) = if replicates[i].is_empty() {
            (None, None)
        } else {
            let mut r = replicates[i].clone();
            r.sort_by(f64::total_cmp);
            (Some(quantile(&r, alpha)), Some(quantile(&r, 1.0 - alpha)))
        };
        let mut row = vec![(i + 1).to_string()];
        row.extend(space.describe(x).into_iter().map(String::from));
        row.extend([
            num(*v),
            opt_num(lo),
            opt_num(hi),
            num(terms.prediction),
            num(terms.risk),
            num(terms.cost),
            counts.get(x).copied().unwrap_or(0).to_string(),
        ]);
        rows.push(row);
    }
    artifacts.add("topk.csv", csv_bytes(csv_header(units, tag), rows)?);

    let mut header = ["restart", "step", "sweep"].map(String::from).to_vec();
    header.extend(factor_names.iter().cloned());
    header.push("objective".into());
    let mut rows = vec![header];
    for (r, trace) in ms.traces.iter().enumerate() {
        for (s, step) in trace.steps.iter().enumerate() {
            let mut row = vec![r.to_string(), s.to_string(), step.sweep.to_string()];
            row.extend(space.describe(&step.config).into_iter().map(String::from));
            row.push(num(step.value));
            rows.push(row);
        }
    }
    artifacts.add("trace.csv", csv_bytes(csv_header(units, tag), rows)?);

    let margins: Map<String, Value> = factor_names
        .iter()
        .zip(&dominance.margins)
        .map(|(n, m)| (n.clone(), json!(m)))
        .collect();
    let influence: Map<String, Value> = factor_names
        .iter()
        .zip(&dominance.influence)
        .map(|(n, row)| {
            let inner: Map<String, Value> = factor_names
                .iter()
                .zip(row)
                .filter(|(m, _)| *m != n)
                .map(|(m, v)| (m.clone(), json!(v)))
                .collect();
            (n.clone(), Value::Object(inner))
        })
        .collect();
    artifacts.add(
        "dominance.json",
        json_bytes(&json!({
            "header": json_header(units, tag),
            "margins": margins,
            "influence": influence,
            "holds": dominance.holds,
            "exact": dominance.exact,
            "contexts": dominance.contexts,
        })),
    );

    let terms = problem.terms(&ms.best)?;
    let result = json!({
        "header": json_header(units, tag),
        "chosen": labelled(space, &ms.best),
        "objective": terms.value,
        "prediction": terms.prediction,
        "risk": terms.risk,
        "cost": terms.cost,
        "one_swap_optimal": swap.optimal,
        "two_swap_bound": bound,
        "global_optimum": global_opt.as_ref().map(|(x, v)| json!({
            "config": labelled(space, x),
            "objective": v,
        })),
        "matches_global": global_opt.as_ref().map(|(_, v)| *v == ms.value),
        "terminations": ms.traces.iter().map(|t| json!(t.termination)).collect::<Vec<_>>(),
    });
    artifacts.add("optimize.json", json_bytes(&result));

    let config = merge(
        global_json(global, &settings),
        json!({
            "objective": {
                "file": args.objective,
                "lambda_risk": spec.lambda_risk,
                "lambda_cost": spec.lambda_cost,
                "gamma": (0..space.pair_count()).map(|p| spec.gamma(p)).collect::<Vec<_>>(),
            },
            "search": search,
            "top_k": args.top_k,
            "bootstrap": args.bootstrap,
            "coverage": args.coverage,
            "units": units,
        }),
    );
    let mut inputs: Vec<&Input> = loaded.inputs().to_vec();
    inputs.extend(objective_input.as_ref());
    let written = artifacts.commit(out, "optimize", config, &inputs, global.seed)?;
    let described = space.describe(&ms.best).join(", ");
    Ok(Report {
        lines: vec![
            format!("chosen: {described}"),
            format!("objective: {}", num(ms.value)),
            format!("wrote {} files to {}", written.len(), out.display()),
        ],
        written,
    })
}

fn pci(global: &GlobalArgs, args: &PciArgs) -> Result<Report> {
    let out = out_dir(global)?;
    let loaded = pipeline::load(global)?;
    let space = &loaded.space;
    let settings = Settings::new(global, args.estimation.shapley_samples);
    let fitted = pipeline::fit(space, &loaded.log, &settings, true)?;
    let norm = if args.weighted {
        Normalization::Weighted(&fitted.reference)
    } else {
        Normalization::Uniform
    };
    let tag = settings.path.tag();
    let mut artifacts = Artifacts::new();
    let mut buf = csv_header("dimensionless", tag).into_bytes();
    write_pci_csv(space, &pci_all(&fitted.table, norm), &mut buf)?;
    artifacts.add("pci.csv", buf);

    let units = &args.estimation.units;
    let mut rows = vec![["rank", "factor_j", "factor_k", "s_jk"]
        .map(String::from)
        .to_vec()];
    let ranked = pci_rank_pairs(&fitted.table);
    for (i, (j, k, s)) in ranked.iter().enumerate() {
        rows.push(vec![
            (i + 1).to_string(),
            space.name(*j).to_string(),
            space.name(*k).to_string(),
            num(*s),
        ]);
    }
    artifacts.add("pci_rank.csv", csv_bytes(csv_header(units, tag), rows)?);

    let config = merge(
        global_json(global, &settings),
        json!({ "weighted": args.weighted, "units": units }),
    );
    let written = artifacts.commit(out, "pci", config, &loaded.inputs(), global.seed)?;
    let mut lines: Vec<String> = ranked
        .iter()
        .take(3)
        .map(|(j, k, s)| format!("{}|{}: s = {}", space.name(*j), space.name(*k), num(*s)))
        .collect();
    lines.push(format!(
        "wrote {} files to {}",
        written.len(),
        out.display()
    ));
    Ok(Report { lines, written })
}

fn parse_levels(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.parse()
                .with_context(|| format!("bad level count `{a}`"))?,
            b.parse()
                .with_context(|| format!("bad level count `{b}`"))?,
        )),
        _ => bail!("--levels expects `Lj,Lk`, got `{text}`"),
    }
}

fn plan(global: &GlobalArgs, args: &PlanArgs) -> Result<Report> {
    let mut inputs = Vec::new();
    let (bound, bound_source) = match args.bound {
        Some(b) => (b, "given"),
        None => {
            let loaded = pipeline::load(global)
                .context("--B is required unless --space and --log are given")?;
            let b = infer_bound(&loaded.log)?;
            inputs.push(loaded.space_input);
            inputs.push(loaded.log_input);
            (b, "inferred as 1.1 max|response|")
        }
    };
    let (b, e, d) = (bound, args.eps, args.delta);
    let levels = args.levels.as_deref().map(parse_levels).transpose()?;
    if args.union.is_some() && !args.mc {
        bail!("--union applies to --mc sizing only");
    }
    let (quantity, n, formula, raw) = if args.mc {
        let mult = args.union.unwrap_or(1);
        let n = mc_sample_size(b, e, d, args.union)?;
        let raw = 8.0 * b * b / (e * e) * (2.0 * mult as f64 / d).ln();
        let log_arg = if args.union.is_some() {
            format!("2*{mult}/{d:?}")
        } else {
            format!("2/{d:?}")
        };
        (
            "M",
            n,
            format!("ceil(8 * {b:?}^2 / {e:?}^2 * ln({log_arg}))"),
            raw,
        )
    } else if let Some((lj, lk)) = levels {
        let n = uniform_cells_n(b, e, d, lj, lk)?;
        let raw = 2.0 * b * b / (e * e) * (2.0 * (lj * lk) as f64 / d).ln();
        (
            "n",
            n,
            format!("ceil(2 * {b:?}^2 / {e:?}^2 * ln(2*{lj}*{lk}/{d:?}))"),
            raw,
        )
    } else {
        let n = hoeffding_cell_n(b, e, d)?;
        let raw = 2.0 * b * b / (e * e) * (2.0 / d).ln();
        (
            "n",
            n,
            format!("ceil(2 * {b:?}^2 / {e:?}^2 * ln(2/{d:?}))"),
            raw,
        )
    };
    let mut lines = vec![
        n.to_string(),
        format!("{quantity} = {formula} = ceil({raw:?}) = {n}"),
        format!("B = {b:?} ({bound_source}), eps = {e:?}, delta = {d:?}"),
    ];
    let mut doc = json!({
        "quantity": quantity,
        "value": n,
        "formula": formula,
        "unrounded": raw,
        "bound": b,
        "bound_source": bound_source,
        "eps": e,
        "delta": d,
        "levels": levels,
        "union": args.union,
        "mc": args.mc,
    });
    if let Some(eps0) = args.eps0 {
        let (mains, pairs) = effect_error_budget(eps0, e)?;
        lines.push(format!(
            "effect errors: mains <= {mains:?}, pairs <= {pairs:?} (eps0 = {eps0:?})"
        ));
        doc["effect_budget"] = json!({ "eps0": eps0, "mains": mains, "pairs": pairs });
    }
    let mut written = Vec::new();
    if let Some(out) = &global.out {
        doc["header"] = json_header("runs", "planner");
        let mut artifacts = Artifacts::new();
        artifacts.add("plan.json", json_bytes(&doc));
        let config = json!({ "plan": args, "space": global.space, "log": global.log });
        let refs: Vec<&Input> = inputs.iter().collect();
        written = artifacts.commit(out, "plan", config, &refs, global.seed)?;
    }
    Ok(Report { lines, written })
}

fn suite_config(
    global: &GlobalArgs,
    file: Option<&Input>,
    trials: Option<usize>,
) -> Result<SuiteConfig> {
    let mut config: SuiteConfig = match file {
        Some(input) => serde_json::from_str(input.text()?).context("parsing suite config")?,
        None => SuiteConfig::default(),
    };
    config.seed = global.seed;
    if let Some(t) = trials {
        config.trials = t;
    }
    if let Some(t) = global.tau {
        config.tau = t;
    }
    if let Some(l) = global.lambda_risk {
        config.lambda_risk = l;
    }
    if let Some(g) = global.gamma {
        config.gamma = g;
    }
    config.validate()?;
    Ok(config)
}

fn summary_lines(result: &SuiteResult) -> Vec<String> {
    result
        .summary
        .iter()
        .map(|r| {
            format!(
                "{} {} {} {}: {:.4} [{:.4}, {:.4}]",
                r.axis,
                r.cell,
                r.estimator.as_str(),
                r.metric.as_str(),
                r.mean,
                r.ci_lo,
                r.ci_hi
            )
        })
        .collect()
}

fn suite_csv(result: &SuiteResult) -> Result<Vec<u8>> {
    let mut buf = csv_header("teacher response", "per-row").into_bytes();
    write_suite_csv(&result.summary, &mut buf)?;
    Ok(buf)
}

fn run_suites(
    global: &GlobalArgs,
    subcommand: &str,
    suites: &[Suite],
    config_path: Option<&Path>,
    trials: Option<usize>,
) -> Result<Report> {
    let out = out_dir(global)?;
    let input = config_path.map(|p| Input::read("config", p)).transpose()?;
    let config = suite_config(global, input.as_ref(), trials)?;
    let mut artifacts = Artifacts::new();
    let mut lines = Vec::new();
    let mut hashes = Map::new();
    for &suite in suites {
        let result = run_suite(suite, &config)?;
        artifacts.add(&format!("{}.csv", suite.name()), suite_csv(&result)?);
        hashes.insert(suite.name().to_string(), json!(result.config_hash));
        lines.extend(summary_lines(&result));
    }
    let resolved = json!({ "suite_config": config, "config_hashes": hashes, "out": global.out });
    artifacts.add("suite_config.json", json_bytes(&resolved));
    let inputs: Vec<&Input> = input.iter().collect();
    let written = artifacts.commit(out, subcommand, resolved, &inputs, global.seed)?;
    lines.push(format!(
        "wrote {} files to {}",
        written.len(),
        out.display()
    ));
    Ok(Report { lines, written })
}

fn simulate(global: &GlobalArgs, args: &SimulateArgs) -> Result<Report> {
    let suite = Suite::parse(&args.suite)?;
    run_suites(
        global,
        "simulate",
        &[suite],
        args.config.as_deref(),
        args.trials,
    )
}

fn ablate(global: &GlobalArgs, args: &AblateArgs) -> Result<Report> {
    let suites: Vec<Suite> = if args.axis == "all" {
        Axis::ALL.iter().map(|&a| Suite::Ablation(a)).collect()
    } else {
        vec![Suite::Ablation(Axis::parse(&args.axis)?)]
    };
    run_suites(
        global,
        "ablate",
        &suites,
        args.config.as_deref(),
        args.trials,
    )
}
