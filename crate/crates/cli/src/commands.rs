use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use djinn::data::{make_splits, parse_csv, Dataset, SplitPlan};
use djinn::dot::{network_to_dot, tree_to_dot};
use djinn::ensemble::{fit_ensemble, sweep_to_csv, sweep_tree_count, EnsembleConfig};
use djinn::experiment::{compare_schemes, compare_with_search, evaluate_scheme, train_gate};
use djinn::metrics::EvalReport;
use djinn::model_io::{ensemble_to_json, networks_from_json, read_text, write_text};
use djinn::net::predict;
use djinn::presets::preset_by_name;
use djinn::synthetic::{truth_table, Gate};
use djinn::Task;

use crate::args::{CompareArgs, DataArgs, DotArgs, LogicArgs, ModelArgs, SearchArgs, SweepArgs, TrainArgs};

/// Files produced by a command, written only once everything succeeded.
#[derive(Default)]
struct Outputs(Vec<(String, String)>);

impl Outputs {
    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.0.push((name.into(), contents));
    }

    fn write(self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, contents) in self.0 {
            write_text(dir.join(name), &contents)?;
        }
        Ok(())
    }
}

struct Prepared {
    dataset: Dataset,
    config: EnsembleConfig,
    plan: SplitPlan,
    seed: u64,
}

fn load(data: &DataArgs, task: Task) -> Result<Dataset> {
    let text = read_text(&data.data)?;
    let targets: Vec<String> = if data.target.is_empty() {
        let header = text.lines().next().context("empty CSV file")?;
        vec![header
            .rsplit(',')
            .next()
            .unwrap_or_default()
            .trim()
            .trim_matches('"')
            .to_string()]
    } else {
        data.target.clone()
    };
    let names: Vec<&str> = targets.iter().map(String::as_str).collect();
    let dataset = parse_csv(&text, &names, task).with_context(|| format!("reading {}", data.data.display()))?;
    Ok(dataset)
}

/// Resolves flags over the preset and validates everything before training.
fn prepare(data: &DataArgs, model: &ModelArgs) -> Result<Prepared> {
    let preset = model.preset.as_deref().map(preset_by_name).transpose()?;
    let task = match (data.task, preset) {
        (Some(t), _) => t,
        (None, Some(p)) => p.task,
        (None, None) => bail!("--task is required without --preset"),
    };
    let pick = |flag: Option<usize>, from_preset: Option<usize>, name: &str| {
        flag.or(from_preset)
            .with_context(|| format!("--{name} is required without --preset"))
    };
    let trees = pick(model.trees, preset.map(|p| p.n_trees).or(Some(10)), "trees")?;
    let max_depth = pick(model.max_depth, preset.map(|p| p.max_depth), "max-depth")?;
    let epochs = pick(model.epochs, preset.map(|p| p.epochs), "epochs")?;
    let batch = pick(model.batch, preset.map(|p| p.batch_size), "batch")?;
    let lr = model
        .lr
        .or(preset.map(|p| p.learning_rate))
        .context("--lr is required without --preset")?;
    if trees == 0 || max_depth == 0 {
        bail!("--trees and --max-depth must be positive");
    }
    if model.jobs == 0 {
        bail!("--jobs must be at least 1");
    }

    let mut dataset = load(data, task)?;
    if let Some(n) = data.subsample {
        dataset = dataset.sample_rows(n, model.seed)?;
    }
    let plan = make_splits(dataset.n_samples(), model.permutations, model.test_fraction, model.seed)?;
    let mut config = EnsembleConfig::new(task, trees, max_depth, epochs, lr, batch);
    config.jobs = model.jobs;
    config.scale_targets = !model.unscaled_targets;
    let smallest_train = plan.permutations.iter().map(|p| p.train.len()).min().unwrap_or(0);
    config.training.validate(smallest_train)?;
    Ok(Prepared {
        dataset,
        config,
        plan,
        seed: model.seed,
    })
}

fn report_outputs(outputs: &mut Outputs, report: &EvalReport) -> Result<()> {
    outputs.add("report.json", report.to_json()?);
    print!("{}", report.to_table());
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let p = prepare(&args.data, &args.model)?;
    let name = args.init.as_str();
    let run = evaluate_scheme(name, &p.dataset, &p.plan, &p.config, args.init, p.seed, true)?;
    let report = EvalReport::new(p.dataset.task(), vec![run.scores.clone()], name)?;
    let full = fit_ensemble(&p.dataset, &p.config, args.init, p.seed)?;
    let mut outputs = Outputs::default();
    report_outputs(&mut outputs, &report)?;
    outputs.add("ensemble.json", ensemble_to_json(&full.ensemble)?);
    outputs.add(format!("cost_history_{name}.csv"), run.mean_history().to_csv());
    outputs.write(&args.out)
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let p = prepare(&args.data, &args.model)?;
    let (report, runs) = compare_schemes(&p.dataset, &p.plan, &p.config, &args.schemes, p.seed)?;
    let mut outputs = Outputs::default();
    report_outputs(&mut outputs, &report)?;
    for run in &runs {
        outputs.add(
            format!("cost_history_{}.csv", run.scores.name),
            run.mean_history().to_csv(),
        );
    }
    outputs.write(&args.out)
}

pub fn sweep_trees(args: &SweepArgs) -> Result<()> {
    let p = prepare(&args.data, &args.model)?;
    let rows = sweep_tree_count(&p.dataset, &p.plan, &args.counts, &p.config, p.seed)?;
    println!("trees  normalized MSE");
    for r in &rows {
        println!(
            "{:>5}  {:.4} ± {:.4}",
            r.n_trees, r.normalized_mse.mean, r.normalized_mse.std
        );
    }
    let mut outputs = Outputs::default();
    outputs.add("sweep_trees.csv", sweep_to_csv(&rows));
    outputs.write(&args.out)
}

pub fn bayesopt(args: &SearchArgs) -> Result<()> {
    let p = prepare(&args.data, &args.model)?;
    let result = compare_with_search(&p.dataset, &p.plan, &p.config, args.budget, p.seed)?;
    let mut outputs = Outputs::default();
    report_outputs(&mut outputs, &result.report)?;
    let layers = result
        .permutations
        .iter()
        .map(|s| s.space.n_layers())
        .max()
        .unwrap_or(0);
    let mut csv = String::from("permutation,iteration,seed,objective");
    for l in 1..=layers {
        let _ = write!(csv, ",width_{l}");
    }
    csv.push('\n');
    for (k, search) in result.permutations.iter().enumerate() {
        println!(
            "permutation {k}: best widths {:?} (validation cost {:.5})",
            search.best.widths, search.best.objective
        );
        for t in &search.trials {
            let widths: String = t.widths.iter().map(|w| format!(",{w}")).collect();
            let _ = writeln!(csv, "{k},{},{},{}{widths}", t.iteration, t.seed, t.objective);
        }
    }
    outputs.add("trials.csv", csv);
    outputs.add(
        "architectures.json",
        serde_json::to_string_pretty(&result.permutations)?,
    );
    outputs.write(&args.out)
}

pub fn logic_demo(args: &LogicArgs) -> Result<()> {
    let mut outputs = Outputs::default();
    for gate in Gate::ALL {
        let run = train_gate(gate, args.seed, args.epochs, args.lr)?;
        let table = truth_table(gate);
        let probs = predict(&run.trained, table.features(), Task::Classification)?;
        println!(
            "{} ({}/{} correct after {} epochs)",
            gate.name().to_uppercase(),
            run.correct,
            table.n_samples(),
            args.epochs
        );
        let inputs: Vec<String> = table.feature_names.clone();
        println!("  {} | target  predicted  p(1)", inputs.join(" "));
        for (i, row) in table.features().outer_iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format!("{:>w$}", *v as u8, w = 2)).collect();
            println!(
                "  {} | {:>6}  {:>9}  {:.3}",
                cells.join(" "),
                table.labels()[i],
                run.predicted[i],
                probs[[i, 1]]
            );
        }
        outputs.add(
            format!("{}_tree.dot", gate.name()),
            tree_to_dot(&run.tree, Some(&table.feature_names)),
        );
        outputs.add(
            format!("{}_network.dot", gate.name()),
            network_to_dot(&run.initial.network, Some(&table.feature_names)),
        );
    }
    outputs.write(&args.out)
}

pub fn export_dot(args: &DotArgs) -> Result<()> {
    let (_, networks) = networks_from_json(&read_text(&args.model)?)?;
    let net = networks
        .get(args.member)
        .with_context(|| format!("member {} out of range ({} networks)", args.member, networks.len()))?;
    let dot = network_to_dot(net, None);
    match &args.out {
        Some(path) => write_text(path, &dot)?,
        None => print!("{dot}"),
    }
    Ok(())
}
