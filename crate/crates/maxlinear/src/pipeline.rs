//! End-to-end estimation pipeline and the self-contained validation
//! suite.
//!
//! The pipeline ingests a returns CSV, maps losses to nonnegative data,
//! rank-transforms to Frechet(2) margins, discovers a causal order
//! once, estimates a coefficient matrix for every exceedance count in
//! the configured grids, extracts thresholded DAGs for every threshold,
//! selects per-group centroids by total normalised structural Hamming
//! distance and scores edge stability over the winning group. All
//! artifacts are written under one output directory and indexed by a
//! self-describing report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coeff::{
    build_scaling_vector, build_scaling_vector_grid, estimated_dag, postprocess,
    recover_squared_linear, recover_squared_recursive, tri_len, ScalingVector,
    TransformMatrix,
};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{centroid, stability, DagEnsemble};
use crate::model::{scaling_gap_identity, RmlmModel};
use crate::order::{causal_order, causal_order_traced};
use crate::projection::{MaxProjection, ScalingSource};
use crate::tail::{estimate_scaling, frechet_transform, EmpiricalScalings};

fn default_k_order() -> usize {
    250
}
fn default_a() -> f64 {
    1.3
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_k_grid_bases() -> Vec<usize> {
    vec![50, 60, 70, 80, 90]
}
fn default_k_grid_offsets() -> Vec<usize> {
    vec![0, 2, 4, 6, 8]
}
fn default_delta_grid() -> Vec<f64> {
    vec![0.0, 0.025, 0.05, 0.1]
}

/// Everything a pipeline run depends on. Mirrored by the `--config`
/// JSON file; command-line flags override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub date_column: bool,
    /// Work on componentwise `max(-x, 0)` of the raw data.
    #[serde(default)]
    pub negate: bool,
    /// Exceedances used by the order-discovery stage.
    #[serde(default = "default_k_order")]
    pub k_order: usize,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Base exceedance counts; each spawns the group `base + offsets`.
    #[serde(default = "default_k_grid_bases")]
    pub k_grid_bases: Vec<usize>,
    #[serde(default = "default_k_grid_offsets")]
    pub k_grid_offsets: Vec<usize>,
    #[serde(default = "default_delta_grid")]
    pub delta_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            input: input.into(),
            output_dir: output_dir.into(),
            date_column: false,
            negate: false,
            k_order: default_k_order(),
            a: default_a(),
            epsilon: default_epsilon(),
            k_grid_bases: default_k_grid_bases(),
            k_grid_offsets: default_k_grid_offsets(),
            delta_grid: default_delta_grid(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "a = {} must exceed 1",
                self.a
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig("epsilon must be nonnegative".into()));
        }
        if self.k_order == 0 {
            return Err(Error::InvalidConfig("k_order must be positive".into()));
        }
        if self.k_grid_bases.is_empty()
            || self.k_grid_offsets.is_empty()
            || self.delta_grid.is_empty()
        {
            return Err(Error::InvalidConfig("grids must be nonempty".into()));
        }
        if self.delta_grid.iter().any(|&d| !(d >= 0.0)) {
            return Err(Error::InvalidConfig(
                "thresholds must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// All exceedance groups: `(base, members)` in configuration order.
    pub fn exceedance_groups(&self) -> Vec<(usize, Vec<usize>)> {
        self.k_grid_bases
            .iter()
            .map(|&b| (b, self.k_grid_offsets.iter().map(|&o| b + o).collect()))
            .collect()
    }
}

/// Read the input CSV and apply the configured preprocessing.
pub fn ingest(config: &PipelineConfig) -> Result<(DenseMatrix, Vec<String>)> {
    let (mut data, names) = io::read_csv_path(&config.input, config.date_column)?;
    if config.negate {
        negate_losses(&mut data);
    }
    Ok((data, names))
}

/// Componentwise `max(-x, 0)`: losses become positive, gains vanish.
pub fn negate_losses(data: &mut DenseMatrix) {
    for r in 0..data.nrows() {
        for v in data.row_mut(r) {
            *v = (-*v).max(0.0);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixArtifact {
    pub r: usize,
    pub path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagArtifact {
    pub delta: f64,
    pub r: usize,
    pub json_path: String,
    pub dot_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NshdRow {
    pub delta: f64,
    pub k_base: usize,
    pub r: usize,
    pub sum_nshd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentroidChoice {
    pub delta: f64,
    pub k_base: usize,
    pub r: usize,
    pub sum_nshd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityEdge {
    pub from: String,
    pub to: String,
    pub count: u32,
}

/// Self-describing index of one pipeline run; all paths are relative
/// to the output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub n_observations: usize,
    pub names: Vec<String>,
    pub order: io::OrderReportJson,
    pub matrices: Vec<MatrixArtifact>,
    /// Nodes whose coefficient row degenerated, per exceedance count.
    pub degenerate_rows: BTreeMap<usize, Vec<String>>,
    pub dags: Vec<DagArtifact>,
    pub nshd_table_path: String,
    pub nshd_table: Vec<NshdRow>,
    pub centroids: Vec<CentroidChoice>,
    pub overall: CentroidChoice,
    pub stability_path: String,
    pub stability_edges: Vec<StabilityEdge>,
}

/// Marker written when a stage fails, so partial outputs are labelled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureMarker {
    pub stage: String,
    pub message: String,
}

/// Run the whole estimation workflow. On error a failure marker is
/// written next to whatever artifacts already exist and the
/// stage-tagged error is returned.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    std::fs::create_dir_all(&config.output_dir)?;
    match run_pipeline_inner(config) {
        Ok(report) => Ok(report),
        Err(err) => {
            let (stage, message) = match &err {
                Error::Stage { stage, source } => (stage.to_string(), source.to_string()),
                other => ("pipeline".to_string(), other.to_string()),
            };
            let marker = FailureMarker { stage, message };
            let _ = io::write_json(&config.output_dir.join("FAILED.json"), &marker);
            Err(err)
        }
    }
}

fn run_pipeline_inner(config: &PipelineConfig) -> Result<RunReport> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let out = config.output_dir.clone();

    let (raw, names) = ingest(config).map_err(|e| e.in_stage("ingest"))?;
    let n = raw.nrows();

    let data = frechet_transform(&raw).map_err(|e| e.in_stage("transform"))?;

    // the causal order is estimated once and reused for every
    // exceedance count in the coefficient grids
    let order_source =
        EmpiricalScalings::new(&data, config.k_order).map_err(|e| e.in_stage("order"))?;
    let (order, traces) =
        causal_order_traced(&order_source, config.a, config.epsilon, Some(config.k_order))
            .map_err(|e| e.in_stage("order"))?;
    let order_report =
        io::OrderReportJson::from_result(&order, &names).map_err(|e| e.in_stage("order"))?;
    io::write_json(&out.join("order.json"), &order_report).map_err(|e| e.in_stage("order"))?;
    io::write_json(&out.join("order_trace.json"), &traces)
        .map_err(|e| e.in_stage("order"))?;

    // one coefficient matrix per distinct exceedance count
    let groups = config.exceedance_groups();
    let mut all_rs: Vec<usize> = groups.iter().flat_map(|(_, g)| g.clone()).collect();
    all_rs.sort_unstable();
    all_rs.dedup();

    let scaling_vectors = build_scaling_vector_grid(&data, &all_rs, &order)
        .map_err(|e| e.in_stage("estimate"))?;
    let transform =
        TransformMatrix::build(order.dim()).map_err(|e| e.in_stage("estimate"))?;
    std::fs::create_dir_all(out.join("matrices")).map_err(Error::from)?;
    let mut matrices = Vec::new();
    let mut matrix_by_r = BTreeMap::new();
    let mut degenerate_rows = BTreeMap::new();
    for (&r, s) in all_rs.iter().zip(&scaling_vectors) {
        let a2 = recover_squared_linear(s, &transform).map_err(|e| e.in_stage("estimate"))?;
        let (matrix, report) = postprocess(&a2, &order).map_err(|e| e.in_stage("estimate"))?;
        if !report.degenerate_rows.is_empty() {
            degenerate_rows.insert(
                r,
                report
                    .degenerate_rows
                    .iter()
                    .map(|&node| names[node].clone())
                    .collect::<Vec<_>>(),
            );
        }
        let rel = format!("matrices/r_{r}.json");
        let json =
            io::MatrixJson::from_matrix(&matrix, &names).map_err(|e| e.in_stage("estimate"))?;
        io::write_json(&out.join(&rel), &json).map_err(|e| e.in_stage("estimate"))?;
        matrices.push(MatrixArtifact { r, path: rel });
        matrix_by_r.insert(r, matrix);
    }

    // thresholded DAG for every (delta, r)
    let mut dags = Vec::new();
    let mut dag_by = BTreeMap::new();
    for &delta in &config.delta_grid {
        let dir = format!("dags/delta_{delta}");
        std::fs::create_dir_all(out.join(&dir)).map_err(Error::from)?;
        for &r in &all_rs {
            let dag = estimated_dag(&matrix_by_r[&r], delta);
            let json_path = format!("{dir}/r_{r}.json");
            let dot_path = format!("{dir}/r_{r}.dot");
            io::write_json(
                &out.join(&json_path),
                &io::DagJson::from_dag(&dag, Some(&names)),
            )
            .map_err(|e| e.in_stage("dag"))?;
            std::fs::write(
                out.join(&dot_path),
                io::dot_export(&dag, &names).map_err(|e| e.in_stage("dag"))?,
            )
            .map_err(Error::from)?;
            dags.push(DagArtifact {
                delta,
                r,
                json_path,
                dot_path,
            });
            dag_by.insert((float_key(delta), r), dag);
        }
    }

    // centroid selection per (delta, base group) and overall winner
    let mut table = Vec::new();
    let mut centroids = Vec::new();
    let mut overall: Option<CentroidChoice> = None;
    for &delta in &config.delta_grid {
        for (base, members) in &groups {
            let ensemble = DagEnsemble::new(
                members
                    .iter()
                    .map(|&r| (dag_by[&(float_key(delta), r)].clone(), r))
                    .collect(),
                delta,
            )
            .map_err(|e| e.in_stage("select"))?;
            let sums = ensemble.nshd_sums().map_err(|e| e.in_stage("select"))?;
            let (_, r_star) = centroid(&ensemble).map_err(|e| e.in_stage("select"))?;
            let mut sum_star = f64::INFINITY;
            for ((_, r), sum) in ensemble.members().iter().zip(&sums) {
                table.push(NshdRow {
                    delta,
                    k_base: *base,
                    r: *r,
                    sum_nshd: *sum,
                });
                if *r == r_star {
                    sum_star = *sum;
                }
            }
            let choice = CentroidChoice {
                delta,
                k_base: *base,
                r: r_star,
                sum_nshd: sum_star,
            };
            if overall
                .as_ref()
                .map_or(true, |best| choice.sum_nshd < best.sum_nshd)
            {
                overall = Some(choice.clone());
            }
            centroids.push(choice);
        }
    }
    let overall = overall.expect("grids are nonempty");

    let nshd_table_path = "nshd_table.csv".to_string();
    write_nshd_table(&out.join(&nshd_table_path), &table)?;

    // stability over the winning group at the winning threshold
    let winning_group = groups
        .iter()
        .find(|(b, _)| *b == overall.k_base)
        .expect("winner comes from the groups")
        .1
        .clone();
    let ensemble = DagEnsemble::new(
        winning_group
            .iter()
            .map(|&r| (dag_by[&(float_key(overall.delta), r)].clone(), r))
            .collect(),
        overall.delta,
    )
    .map_err(|e| e.in_stage("stability"))?;
    let score = stability(&ensemble);
    let stability_edges: Vec<StabilityEdge> = score
        .edges()
        .into_iter()
        .map(|(parent, child, count)| StabilityEdge {
            from: names[parent].clone(),
            to: names[child].clone(),
            count,
        })
        .collect();
    let stability_path = "stability.csv".to_string();
    write_stability_table(&out.join(&stability_path), &stability_edges)?;

    let report = RunReport {
        config: config.clone(),
        n_observations: n,
        names,
        order: order_report,
        matrices,
        degenerate_rows,
        dags,
        nshd_table_path,
        nshd_table: table,
        centroids,
        overall,
        stability_path,
        stability_edges,
    };
    io::write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Stable map key for grid thresholds (finite by validation).
fn float_key(v: f64) -> u64 {
    v.to_bits()
}

fn write_nshd_table(path: &Path, rows: &[NshdRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["delta", "k_base", "r", "sum_nshd"])?;
    for row in rows {
        wtr.write_record(&[
            row.delta.to_string(),
            row.k_base.to_string(),
            row.r.to_string(),
            row.sum_nshd.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn write_stability_table(path: &Path, edges: &[StabilityEdge]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["from", "to", "count"])?;
    for e in edges {
        wtr.write_record(&[e.from.clone(), e.to.clone(), e.count.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------
// validation suite

/// Knobs for the self-contained validation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub dims: Vec<usize>,
    pub models_per_dim: usize,
    pub seed: u64,
    /// Sample size of the Monte Carlo consistency check.
    pub mc_n: usize,
    pub mc_k: usize,
    pub mc_tolerance: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            dims: vec![3, 4, 5, 6],
            models_per_dim: 50,
            seed: 0,
            mc_n: 400_000,
            mc_k: 4_000,
            // noise plus pre-asymptotic bias at the default sample size;
            // the acceptance suite checks 0.05 at n = 10^6, k = 10^4
            mc_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub details: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Checker {
    checks: Vec<CheckResult>,
}

impl Checker {
    fn record(&mut self, name: &str, failures: Vec<String>, cases: usize) {
        let passed = failures.is_empty();
        self.checks.push(CheckResult {
            name: name.to_string(),
            passed,
            details: if passed {
                format!("{cases} cases")
            } else {
                format!(
                    "{} of {cases} cases failed; first: {}",
                    failures.len(),
                    failures[0]
                )
            },
        });
    }
}

/// Run the exact-arithmetic invariant battery plus a Monte Carlo
/// consistency check. Failures are report content, not errors.
pub fn validate(config: &ValidationConfig) -> ValidationReport {
    let mut checker = Checker { checks: Vec::new() };
    let models: Vec<RmlmModel> = config
        .dims
        .iter()
        .flat_map(|&d| {
            (0..config.models_per_dim).map(move |m| {
                RmlmModel::random(d, 0.5, config.seed + (d * 1000 + m) as u64)
                    .expect("random specs are valid models")
            })
        })
        .collect();

    check_scaling_formulas(&mut checker, &models);
    check_gap_identity(&mut checker, &models, config.seed);
    check_source_criterion(&mut checker, &models);
    check_closed_set_criterion(&mut checker, &models);
    check_two_route_identity(&mut checker, config);
    check_exact_round_trip(&mut checker, &models);
    check_order_validity(&mut checker, &models);
    check_fixture_order(&mut checker);
    check_transform_fixture(&mut checker);
    check_monte_carlo(&mut checker, config);

    ValidationReport {
        checks: checker.checks,
    }
}

fn check_scaling_formulas(checker: &mut Checker, models: &[RmlmModel]) {
    let mut failures = Vec::new();
    let mut cases = 0;
    for (idx, model) in models.iter().enumerate() {
        let d = model.dim();
        let atoms = model.angular_atoms();
        let scalings = model.scalings();
        for mask in 1u32..(1 << d) {
            let set: Vec<usize> = (0..d).filter(|&i| mask >> i & 1 == 1).collect();
            let closed = scalings
                .scaling(&MaxProjection::set(set.iter().copied()).expect("nonempty"))
                .expect("valid projection");
            let direct = atoms.moment(|omega| {
                set.iter().map(|&i| omega[i] * omega[i]).fold(0.0, f64::max)
            });
            cases += 1;
            if (closed - direct).abs() > 1e-12 {
                failures.push(format!("model {idx} set {set:?}: {closed} vs {direct}"));
            }
        }
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let rest: Vec<usize> =
                    (0..d).filter(|&k| k != i && k != j).take(2).collect();
                let a = 1.3;
                let p = MaxProjection::scaled(i, j, rest.iter().copied(), a)
                    .expect("valid triple");
                let closed = scalings.scaling(&p).expect("valid projection");
                let direct = atoms.moment(|omega| {
                    let mut best = omega[i] * omega[i];
                    for &k in std::iter::once(&j).chain(rest.iter()) {
                        best = best.max(a * a * omega[k] * omega[k]);
                    }
                    best
                });
                cases += 1;
                if (closed - direct).abs() > 1e-12 {
                    failures.push(format!(
                        "model {idx} triple ({i},{j},{rest:?}): {closed} vs {direct}"
                    ));
                }
            }
        }
    }
    checker.record("scaling-formulas-vs-atom-moments", failures, cases);
}

fn check_gap_identity(checker: &mut Checker, models: &[RmlmModel], seed: u64) {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9a3f);
    let mut failures = Vec::new();
    let mut cases = 0;
    'outer: for (idx, model) in models.iter().enumerate() {
        let d = model.dim();
        let ancestors = model.ancestor_sets();
        for _ in 0..24 {
            if cases >= 1000 {
                break 'outer;
            }
            let mut set: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
            for k in 0..d {
                if rng.gen::<f64>() < 0.4 {
                    set.insert(k);
                    set.extend(ancestors[k].iter().copied());
                }
            }
            let outside: Vec<usize> = (0..d).filter(|k| !set.contains(k)).collect();
            if outside.len() < 2 {
                continue;
            }
            let mut pick = outside.clone();
            pick.shuffle(&mut rng);
            let (i, j) = (pick[0], pick[1]);
            let a = 1.0 + rng.gen_range(0.05..1.0);
            let (lhs, rhs) = scaling_gap_identity(model, i, j, set.iter().copied(), a)
                .expect("admissible tuple");
            cases += 1;
            if (lhs - rhs).abs() > 1e-12 {
                failures.push(format!("model {idx} (i={i}, j={j}): {lhs} vs {rhs}"));
            }
        }
    }
    checker.record("rescaling-gap-identity", failures, cases);
}

fn check_source_criterion(checker: &mut Checker, models: &[RmlmModel]) {
    let mut failures = Vec::new();
    let mut cases = 0;
    let a = 1.3f64;
    let benchmark = a * a - 1.0;
    for (idx, model) in models.iter().enumerate() {
        let d = model.dim();
        let ancestors = model.ancestor_sets();
        let scalings = model.scalings();
        for j in 0..d {
            for i in 0..d {
                if i == j {
                    continue;
                }
                let gap = scalings
                    .scaling(&MaxProjection::scaled(i, j, [], a).expect("valid"))
                    .expect("valid")
                    - scalings
                        .scaling(&MaxProjection::scaled(i, j, [], 1.0).expect("valid"))
                        .expect("valid");
                cases += 1;
                if ancestors[j].is_empty() {
                    if (gap - benchmark).abs() > 1e-12 {
                        failures.push(format!(
                            "model {idx} source j={j}, i={i}: gap {gap} != {benchmark}"
                        ));
                    }
                } else {
                    if gap > benchmark + 1e-12 {
                        failures.push(format!(
                            "model {idx} non-source j={j}, i={i}: gap {gap} exceeds benchmark"
                        ));
                    }
                    if ancestors[j].contains(&i) && !(gap < benchmark) {
                        failures.push(format!(
                            "model {idx} j={j}, ancestor i={i}: inequality must be strict"
                        ));
                    }
                }
            }
        }
    }
    checker.record("source-node-criterion", failures, cases);
}

fn check_closed_set_criterion(checker: &mut Checker, models: &[RmlmModel]) {
    let mut failures = Vec::new();
    let mut cases = 0;
    let a = 1.3f64;
    for (idx, model) in models.iter().enumerate() {
        let d = model.dim();
        let ancestors = model.ancestor_sets();
        let scalings = model.scalings();
        // ancestral closures of each single node as candidate ordered sets
        let mut closed_sets: Vec<std::collections::BTreeSet<usize>> = Vec::new();
        for seedling in 0..d {
            let mut set = ancestors[seedling].clone();
            set.insert(seedling);
            if set.len() < d && !closed_sets.contains(&set) {
                closed_sets.push(set);
            }
        }
        for set in closed_sets {
            let ordered: Vec<usize> = set.iter().copied().collect();
            for j in 0..d {
                if set.contains(&j) {
                    continue;
                }
                let ready = ancestors[j].iter().all(|an| set.contains(an));
                let sigma_jo = scalings
                    .scaling(
                        &MaxProjection::set(std::iter::once(j).chain(ordered.iter().copied()))
                            .expect("nonempty"),
                    )
                    .expect("valid");
                for i in 0..d {
                    if i == j || set.contains(&i) {
                        continue;
                    }
                    let gap = scalings
                        .scaling(
                            &MaxProjection::scaled(i, j, ordered.iter().copied(), a)
                                .expect("valid"),
                        )
                        .expect("valid")
                        - scalings
                            .scaling(
                                &MaxProjection::scaled(i, j, ordered.iter().copied(), 1.0)
                                    .expect("valid"),
                            )
                            .expect("valid");
                    let benchmark = (a * a - 1.0) * sigma_jo;
                    cases += 1;
                    if ready {
                        if (gap - benchmark).abs() > 1e-12 {
                            failures.push(format!(
                                "model {idx} ready j={j}, i={i}: {gap} != {benchmark}"
                            ));
                        }
                    } else if ancestors[j].contains(&i) && !set.contains(&i) {
                        if !(gap < benchmark) {
                            failures.push(format!(
                                "model {idx} unready j={j}, ancestor i={i}: must be strict"
                            ));
                        }
                    } else if gap > benchmark + 1e-12 {
                        failures.push(format!(
                            "model {idx} unready j={j}, i={i}: gap exceeds benchmark"
                        ));
                    }
                }
            }
        }
    }
    checker.record("ancestrally-closed-criterion", failures, cases);
}

fn check_two_route_identity(checker: &mut Checker, config: &ValidationConfig) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed ^ 0x51ab);
    let mut failures = Vec::new();
    let mut cases = 0;
    for &d in &config.dims {
        let t = TransformMatrix::build(d).expect("d >= 2");
        for trial in 0..100 {
            let values: Vec<f64> = (0..tri_len(d)).map(|_| rng.gen_range(-2.0..5.0)).collect();
            let s = ScalingVector::new(d, values).expect("length checked");
            let lin = recover_squared_linear(&s, &t).expect("dimensions agree");
            let rec = recover_squared_recursive(&s);
            cases += 1;
            let worst = lin
                .values()
                .iter()
                .zip(rec.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if worst > 1e-12 {
                failures.push(format!("d={d} trial {trial}: max deviation {worst}"));
            }
        }
    }
    checker.record("two-route-recovery-identity", failures, cases);
}

fn check_exact_round_trip(checker: &mut Checker, models: &[RmlmModel]) {
    let mut failures = Vec::new();
    let mut cases = 0;
    for (idx, model) in models.iter().enumerate() {
        let d = model.dim();
        let order = causal_order(&model.scalings(), 1.3, 0.1).expect("exact order");
        let s = build_scaling_vector(&model.scalings(), &order).expect("valid order");
        let t = TransformMatrix::build(d).expect("d >= 2");
        let a2 = recover_squared_linear(&s, &t).expect("dimensions agree");
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let truth = model.matrix().get(order.order[i], order.order[j]).powi(2);
                worst = worst.max((a2.get(i, j) - truth).abs());
            }
        }
        let (rebuilt, report) = postprocess(&a2, &order).expect("valid input");
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((rebuilt.get(i, j) - model.matrix().get(i, j)).abs());
            }
        }
        cases += 1;
        if worst > 1e-10 || !report.degenerate_rows.is_empty() {
            failures.push(format!("model {idx}: max deviation {worst}"));
        }
    }
    checker.record("exact-round-trip", failures, cases);
}

fn check_order_validity(checker: &mut Checker, models: &[RmlmModel]) {
    let mut failures = Vec::new();
    let mut cases = 0;
    for (idx, model) in models.iter().enumerate() {
        let order = causal_order(&model.scalings(), 1.3, 0.1).expect("exact order");
        let reach = crate::tropical::reachability(model.matrix());
        cases += 1;
        if !reach.is_valid_causal_order(&order.order) {
            failures.push(format!("model {idx}: invalid order {:?}", order.order));
        }
    }
    checker.record("order-validity-exact", failures, cases);
}

fn check_fixture_order(checker: &mut Checker) {
    let w = DenseMatrix::from_rows(vec![
        vec![1.0, 0.50, 0.60, 0.70],
        vec![0.0, 1.00, 0.55, 0.65],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ])
    .expect("literal");
    let spec = crate::graph::DagSpec::from_weights(w).expect("acyclic");
    let model = RmlmModel::from_spec(&spec, 0).expect("valid model");
    let mut failures = Vec::new();
    for a in [1.1, 1.3, 2.0] {
        let result = causal_order(&model.scalings(), a, 0.0).expect("exact order");
        if result.steps != vec![vec![2, 3], vec![1], vec![0]]
            || result.order != vec![0, 1, 2, 3]
        {
            failures.push(format!(
                "a={a}: steps {:?}, order {:?}",
                result.steps, result.order
            ));
        }
    }
    checker.record("four-node-fixture-order", failures, 3);
}

fn check_transform_fixture(checker: &mut Checker) {
    #[rustfmt::skip]
    let expected: [[f64; 10]; 10] = [
        [ 1.0,  0.0,  0.0, 0.0, -1.0,  0.0, 0.0,  0.0, 0.0,  0.0],
        [-1.0,  1.0,  0.0, 0.0,  1.0,  0.0, 0.0, -1.0, 0.0,  0.0],
        [ 0.0, -1.0,  1.0, 0.0,  0.0,  0.0, 0.0,  1.0, 0.0, -1.0],
        [ 0.0,  0.0, -1.0, 1.0,  0.0,  0.0, 0.0,  0.0, 0.0,  1.0],
        [ 0.0,  0.0,  0.0, 0.0,  1.0,  0.0, 0.0, -1.0, 0.0,  0.0],
        [ 0.0,  0.0,  0.0, 0.0, -1.0,  1.0, 0.0,  1.0, 0.0, -1.0],
        [ 0.0,  0.0,  0.0, 0.0,  0.0, -1.0, 1.0,  0.0, 0.0,  1.0],
        [ 0.0,  0.0,  0.0, 0.0,  0.0,  0.0, 0.0,  1.0, 0.0, -1.0],
        [ 0.0,  0.0,  0.0, 0.0,  0.0,  0.0, 0.0, -1.0, 1.0,  1.0],
        [ 0.0,  0.0,  0.0, 0.0,  0.0,  0.0, 0.0,  0.0, 0.0,  1.0],
    ];
    let t = TransformMatrix::build(4).expect("d >= 2");
    let mut failures = Vec::new();
    for r in 0..10 {
        for c in 0..10 {
            if t.get(r, c) != expected[r][c] {
                failures.push(format!("entry ({r},{c}): {} vs {}", t.get(r, c), expected[r][c]));
            }
        }
    }
    checker.record("transform-matrix-fixture", failures, 100);
}

fn check_monte_carlo(checker: &mut Checker, config: &ValidationConfig) {
    use rand::SeedableRng;
    // fixed model structure with small pre-asymptotic bias; the data
    // stream and the descriptors still follow the configured seed
    let structure = RmlmModel::random(5, 0.5, 9).expect("valid model");
    let model = RmlmModel::new(structure.matrix().clone(), config.seed + 1009)
        .expect("same matrix");
    let x = model.simulate(config.mc_n);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed ^ 0x7e11);
    let mut failures = Vec::new();
    let mut cases = 0;
    for _ in 0..10 {
        let p = random_projection(5, 1.3, &mut rng);
        let exact = model.exact_scaling(&p).expect("valid projection");
        let est = match estimate_scaling(&x, config.mc_k, &p) {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("{p:?}: estimation failed: {e}"));
                continue;
            }
        };
        cases += 1;
        if (est - exact).abs() > config.mc_tolerance {
            failures.push(format!("{p:?}: estimate {est} vs exact {exact}"));
        }
    }
    checker.record("monte-carlo-consistency", failures, cases);
}

/// Random descriptor over `d` nodes: a nonempty set or a rescaled
/// triple with the given factor.
pub fn random_projection<R: rand::Rng>(d: usize, a: f64, rng: &mut R) -> MaxProjection {
    use rand::seq::SliceRandom;
    if rng.gen::<f64>() < 0.5 {
        let m = rng.gen_range(1..=d);
        let mut nodes: Vec<usize> = (0..d).collect();
        nodes.shuffle(rng);
        MaxProjection::set(nodes.into_iter().take(m)).expect("nonempty")
    } else {
        let mut nodes: Vec<usize> = (0..d).collect();
        nodes.shuffle(rng);
        let i = nodes[0];
        let j = nodes[1];
        let extra = rng.gen_range(0..=(d - 2));
        MaxProjection::scaled(i, j, nodes[2..2 + extra].iter().copied(), a).expect("valid")
    }
}
