//! Command-line front end: simulate, transform, order, estimate,
//! threshold, compare, score and run the whole pipeline.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use maxlinear::coeff::{
    build_scaling_vector_grid, estimated_dag, postprocess, recover_squared_linear,
    TransformMatrix,
};
use maxlinear::io;
use maxlinear::metrics::{nshd, shd, stability, DagEnsemble};
use maxlinear::model::RmlmModel;
use maxlinear::order::causal_order_traced;
use maxlinear::pipeline::{
    negate_losses, run_pipeline, validate, PipelineConfig, ValidationConfig,
};
use maxlinear::tail::{frechet_transform, EmpiricalScalings};

#[derive(Parser)]
#[command(
    name = "maxlinear",
    about = "Causal discovery and coefficient estimation for recursive max-linear models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Input CSV with a header row of column names.
    #[arg(long)]
    input: PathBuf,
    /// Treat the first column as a date/label column and skip it.
    #[arg(long)]
    date_column: bool,
    /// Work on componentwise max(-x, 0) of the raw data.
    #[arg(long)]
    negate: bool,
}

impl InputArgs {
    fn load(&self) -> Result<(maxlinear::dense::DenseMatrix, Vec<String>)> {
        let (mut data, names) = io::read_csv_path(&self.input, self.date_column)
            .with_context(|| format!("reading {}", self.input.display()))?;
        if self.negate {
            negate_losses(&mut data);
        }
        Ok((data, names))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Rank-transform a sample to standard Frechet(2) margins.
    Transform {
        #[command(flatten)]
        input: InputArgs,
        /// Output CSV path (defaults to <output-dir>/transformed.csv).
        #[arg(long, default_value = "transformed")]
        output_dir: PathBuf,
    },
    /// Discover a causal order of the columns.
    Order {
        #[command(flatten)]
        input: InputArgs,
        /// Exceedances used for the scaling estimates.
        #[arg(long, default_value_t = 250)]
        k: usize,
        #[arg(long, default_value_t = 1.3)]
        a: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value = "order-out")]
        output_dir: PathBuf,
        /// Print the per-iteration selection vectors.
        #[arg(short, long)]
        verbose: bool,
    },
    /// Estimate the coefficient matrix respecting a discovered order.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        /// Order report produced by the `order` subcommand.
        #[arg(long)]
        order: PathBuf,
        /// Exceedances used for the scaling estimates.
        #[arg(long, default_value_t = 90)]
        k: usize,
        #[arg(long, default_value = "estimate-out")]
        output_dir: PathBuf,
        /// Also write the suffix-set scaling estimates.
        #[arg(long)]
        emit_scalings: bool,
    },
    /// Extract the thresholded minimum DAG of an estimated matrix.
    Dag {
        /// Matrix JSON produced by `estimate`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value = "dag-out")]
        output_dir: PathBuf,
    },
    /// Structural Hamming distance between two DAG files.
    Compare {
        first: PathBuf,
        second: PathBuf,
    },
    /// Edge-stability counts across DAG files.
    Stability {
        /// DAG JSON files forming the ensemble.
        #[arg(required = true)]
        dags: Vec<PathBuf>,
    },
    /// Run the full workflow over exceedance and threshold grids.
    Pipeline {
        /// Config JSON mirroring the pipeline configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        date_column: bool,
        #[arg(long)]
        negate: bool,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw samples from a model, generating one if none is given.
    Simulate {
        /// Model JSON; mutually exclusive with --d.
        #[arg(long, conflicts_with = "d")]
        model: Option<PathBuf>,
        /// Generate a random model with this many nodes.
        #[arg(long)]
        d: Option<usize>,
        /// Edge probability of the generated model.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "simulate-out")]
        output_dir: PathBuf,
    },
    /// Run the exact-arithmetic invariant suite and report per check.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample size of the Monte Carlo consistency check.
        #[arg(long, default_value_t = 400_000)]
        mc_n: usize,
        /// Write the report JSON here as well.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Transform { input, output_dir } => {
            let (data, names) = input.load()?;
            let transformed = frechet_transform(&data).context("transform")?;
            std::fs::create_dir_all(&output_dir)?;
            let path = output_dir.join("transformed.csv");
            let file = std::fs::File::create(&path)?;
            io::write_csv(file, &transformed, &names)?;
            println!("wrote {}", path.display());
        }
        Command::Order {
            input,
            k,
            a,
            epsilon,
            output_dir,
            verbose,
        } => {
            let (data, names) = input.load()?;
            let transformed = frechet_transform(&data).context("transform")?;
            let source = EmpiricalScalings::new(&transformed, k).context("order")?;
            let (result, traces) =
                causal_order_traced(&source, a, epsilon, Some(k)).context("order")?;
            if verbose {
                for (it, trace) in traces.iter().enumerate() {
                    let delta: Vec<String> = trace
                        .delta
                        .iter()
                        .enumerate()
                        .filter_map(|(node, v)| {
                            v.map(|v| format!("{}={v:.6}", names[node]))
                        })
                        .collect();
                    eprintln!(
                            "iteration {}: tolerance {:.6}, shortfalls [{}] -> {:?}",
                            it + 1,
                            trace.epsilon,
                            delta.join(", "),
                            trace.selected.iter().map(|&n| &names[n]).collect::<Vec<_>>()
                        );
                }
            }
            let report = io::OrderReportJson::from_result(&result, &names)?;
            std::fs::create_dir_all(&output_dir)?;
            let path = output_dir.join("order.json");
            io::write_json(&path, &report)?;
            println!("wrote {}", path.display());
            println!(
                "order: {}",
                result
                    .order
                    .iter()
                    .map(|&n| names[n].as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        Command::Estimate {
            input,
            order,
            k,
            output_dir,
            emit_scalings,
        } => {
            let (data, names) = input.load()?;
            let transformed = frechet_transform(&data).context("transform")?;
            let report: io::OrderReportJson = io::read_json(&order)
                .with_context(|| format!("reading {}", order.display()))?;
            let order = report.into_result(&names).context("order file")?;
            let ks = [k];
            let vectors =
                build_scaling_vector_grid(&transformed, &ks, &order).context("estimate")?;
            let transform = TransformMatrix::build(order.dim())?;
            let a2 = recover_squared_linear(&vectors[0], &transform)?;
            let (matrix, post) = postprocess(&a2, &order)?;
            std::fs::create_dir_all(&output_dir)?;
            let path = output_dir.join(format!("matrix_k{k}.json"));
            io::write_json(&path, &io::MatrixJson::from_matrix(&matrix, &names)?)?;
            println!("wrote {}", path.display());
            if !post.degenerate_rows.is_empty() {
                eprintln!(
                    "warning: degenerate rows replaced by unit diagonal: {:?}",
                    post.degenerate_rows
                        .iter()
                        .map(|&n| &names[n])
                        .collect::<Vec<_>>()
                );
            }
            if emit_scalings {
                let records = scaling_records(&vectors[0], &order, k);
                let path = output_dir.join(format!("scalings_k{k}.json"));
                io::write_json(&path, &records)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Dag {
            input,
            delta,
            output_dir,
        } => {
            let json: io::MatrixJson = io::read_json(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let (matrix, names) = json.into_matrix().context("matrix file")?;
            let dag = estimated_dag(&matrix, delta);
            std::fs::create_dir_all(&output_dir)?;
            let json_path = output_dir.join(format!("dag_delta_{delta}.json"));
            io::write_json(&json_path, &io::DagJson::from_dag(&dag, Some(&names)))?;
            let dot_path = output_dir.join(format!("dag_delta_{delta}.dot"));
            std::fs::write(&dot_path, io::dot_export(&dag, &names)?)?;
            println!("wrote {} and {}", json_path.display(), dot_path.display());
        }
        Command::Compare { first, second } => {
            let (g1, _) = load_dag(&first)?;
            let (g2, _) = load_dag(&second)?;
            let result = serde_json::json!({
                "shd": shd(&g1, &g2)?,
                "nshd": nshd(&g1, &g2)?,
                "edges": [g1.edge_count(), g2.edge_count()],
            });
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Stability { dags } => {
            let mut members = Vec::new();
            let mut names: Option<Vec<String>> = None;
            for (idx, path) in dags.iter().enumerate() {
                let (dag, file_names) = load_dag(path)?;
                if names.is_none() {
                    names = file_names;
                }
                members.push((dag, idx));
            }
            let ensemble = DagEnsemble::new(members, 0.0)?;
            let score = stability(&ensemble);
            let names =
                names.unwrap_or_else(|| io::default_names(ensemble.members()[0].0.node_count()));
            let mut records = Vec::new();
            for (parent, child, count) in score.edges() {
                records.push(serde_json::json!({
                    "from": names[parent],
                    "to": names[child],
                    "count": count,
                }));
            }
            println!("{}", serde_json::to_string_pretty(&records)?);
        }
        Command::Pipeline {
            config,
            input,
            output_dir,
            date_column,
            negate,
            k,
            a,
            epsilon,
            seed,
        } => {
            let mut cfg = match config {
                Some(path) => io::read_json::<PipelineConfig>(&path)
                    .with_context(|| format!("reading {}", path.display()))?,
                None => {
                    let input = input
                        .clone()
                        .context("either --config or --input is required")?;
                    let output = output_dir.clone().unwrap_or_else(|| "pipeline-out".into());
                    PipelineConfig::new(input, output)
                }
            };
            if let Some(input) = input {
                cfg.input = input;
            }
            if let Some(output) = output_dir {
                cfg.output_dir = output;
            }
            if date_column {
                cfg.date_column = true;
            }
            if negate {
                cfg.negate = true;
            }
            if let Some(k) = k {
                cfg.k_order = k;
            }
            if let Some(a) = a {
                cfg.a = a;
            }
            if let Some(epsilon) = epsilon {
                cfg.epsilon = epsilon;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let report = run_pipeline(&cfg)?;
            println!(
                "pipeline finished: {} steps, winner delta={} r={}, report at {}",
                report.order.steps.len(),
                report.overall.delta,
                report.overall.r,
                cfg.output_dir.join("report.json").display()
            );
        }
        Command::Simulate {
            model,
            d,
            density,
            n,
            seed,
            output_dir,
        } => {
            let (model, names) = match (model, d) {
                (Some(path), _) => {
                    let json: io::ModelJson = io::read_json(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    json.into_model().context("model file")?
                }
                (None, Some(d)) => {
                    let model = RmlmModel::random(d, density, seed).context("model")?;
                    (model, io::default_names(d))
                }
                (None, None) => bail!("either --model or --d is required"),
            };
            std::fs::create_dir_all(&output_dir)?;
            let model_path = output_dir.join("model.json");
            io::write_json(&model_path, &io::ModelJson::from_model(&model, &names)?)?;
            let samples = model.simulate(n);
            let csv_path = output_dir.join("samples.csv");
            let file = std::fs::File::create(&csv_path)?;
            io::write_csv(file, &samples, &names)?;
            println!("wrote {} and {}", model_path.display(), csv_path.display());
        }
        Command::Validate {
            seed,
            mc_n,
            output_dir,
        } => {
            let config = ValidationConfig {
                seed,
                mc_n,
                mc_k: (mc_n / 100).max(100),
                ..ValidationConfig::default()
            };
            let report = validate(&config);
            for check in &report.checks {
                println!(
                    "{} {} - {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.details
                );
            }
            if let Some(dir) = output_dir {
                std::fs::create_dir_all(&dir)?;
                io::write_json(&dir.join("validation.json"), &report)?;
            }
            if !report.all_passed() {
                bail!("validation failed");
            }
        }
    }
    Ok(())
}

fn load_dag(path: &PathBuf) -> Result<(maxlinear::graph::Dag, Option<Vec<String>>)> {
    let json: io::DagJson =
        io::read_json(path).with_context(|| format!("reading {}", path.display()))?;
    json.into_dag()
        .with_context(|| format!("invalid DAG in {}", path.display()))
}

fn scaling_records(
    vector: &maxlinear::coeff::ScalingVector,
    order: &maxlinear::order::OrderResult,
    k: usize,
) -> Vec<io::ScalingRecord> {
    use maxlinear::coeff::tri_index;
    use maxlinear::projection::MaxProjection;
    let d = order.dim();
    let mut records = Vec::new();
    for i in 0..d {
        for j in i..d {
            let nodes: Vec<usize> = std::iter::once(order.order[i])
                .chain(((j + 1)..d).map(|q| order.order[q]))
                .collect();
            let projection = MaxProjection::set(nodes).expect("nonempty");
            records.push(io::ScalingRecord {
                descriptor: io::ProjectionJson::from_projection(&projection),
                k,
                estimate: vector.values()[tri_index(d, i, j)],
            });
        }
    }
    records
}
