//! Calibration harness for the seeded statistical tests. Not part of
//! the shipped workflow; run with `cargo run --release --example
//! calibrate -- <mode>`.

use maxlinear::coeff::{
    build_scaling_vector_grid, estimated_dag, postprocess, recover_squared_linear,
    TransformMatrix,
};
use maxlinear::metrics::nshd;
use maxlinear::model::RmlmModel;
use maxlinear::order::causal_order;
use maxlinear::pipeline::random_projection;
use maxlinear::projection::ScalingSource;
use maxlinear::tail::{estimate_scaling, frechet_transform, EmpiricalScalings};
use maxlinear::tropical::reachability;

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "mc".into());
    match mode.as_str() {
        "mc" => scan_mc_seeds(),
        "order" => scan_order_seeds(),
        "pipeline" => scan_pipeline(),
        "identity" => scan_identity(),
        "slope" => scan_slope(),
        other => eprintln!("unknown mode {other}"),
    }
}

fn scan_mc_seeds() {
    use rand::SeedableRng;
    let (n, k) = (1_000_000usize, 10_000usize);
    for model_seed in 1..=20u64 {
        let model = RmlmModel::random(5, 0.5, model_seed).unwrap();
        let x = model.simulate(n);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(model_seed * 100 + 1);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let p = random_projection(5, 1.3, &mut rng);
            let exact = model.exact_scaling(&p).unwrap();
            let est = estimate_scaling(&x, k, &p).unwrap();
            worst = worst.max((est - exact).abs());
        }
        println!("model seed {model_seed}: max error {worst:.4}");
    }
}

fn scan_order_seeds() {
    let (n, k) = (1_000_000usize, 10_000usize);
    for model_seed in [3u64, 5, 7] {
        let base = RmlmModel::random(5, 0.5, model_seed).unwrap();
        let truth = reachability(base.matrix());
        let mut valid = 0;
        for data_seed in 0..20u64 {
            let model = RmlmModel::new(base.matrix().clone(), 1000 + data_seed).unwrap();
            let x = model.simulate(n);
            let source = EmpiricalScalings::new(&x, k).unwrap();
            let result = causal_order(&source, 1.3, 0.1).unwrap();
            if truth.is_valid_causal_order(&result.order) {
                valid += 1;
            }
        }
        println!("model seed {model_seed}: {valid}/20 valid orders");
    }
}

fn scan_pipeline() {
    let (n, d) = (100_000usize, 10usize);
    for edge_prob in [0.3, 0.5] {
        let mut scores = Vec::new();
        for seed in 0..10u64 {
            let model = RmlmModel::random(d, edge_prob, 500 + seed).unwrap();
            let x = model.simulate(n);
            let data = frechet_transform(&x).unwrap();
            let source = EmpiricalScalings::new(&data, 250).unwrap();
            let order = causal_order(&source, 1.3, 0.1).unwrap();
            let ks = [98usize];
            let vectors = build_scaling_vector_grid(&data, &ks, &order).unwrap();
            let t = TransformMatrix::build(d).unwrap();
            let a2 = recover_squared_linear(&vectors[0], &t).unwrap();
            let (matrix, _) = postprocess(&a2, &order).unwrap();
            let dag = estimated_dag(&matrix, 0.0);
            let truth = reachability(model.matrix());
            let score = nshd(&dag, &truth).unwrap();
            scores.push(score);
            println!("  p={edge_prob} seed {seed}: nshd {score:.3}  est_edges {} true_edges {}",
                dag.edge_count(), truth.edge_count());
        }
        scores.sort_by(f64::total_cmp);
        println!(
            "p={edge_prob}: median nshd {:.3}",
            (scores[4] + scores[5]) / 2.0
        );
    }
}

fn scan_identity() {
    use maxlinear::tropical::MaxLinearMatrix;
    let n = 100_000usize;
    for d in [5usize, 10] {
        let model = RmlmModel::new(MaxLinearMatrix::identity(d), 77).unwrap();
        let x = model.simulate(n);
        let data = frechet_transform(&x).unwrap();
        let source = EmpiricalScalings::new(&data, 250).unwrap();
        let order = causal_order(&source, 1.3, 0.1).unwrap();
        let ks: Vec<usize> = (0..5)
            .flat_map(|b| (0..5).map(move |o| 50 + 10 * b + 2 * o))
            .collect();
        let vectors = build_scaling_vector_grid(&data, &ks, &order).unwrap();
        let t = TransformMatrix::build(d).unwrap();
        for (i, &r) in ks.iter().enumerate() {
            let a2 = recover_squared_linear(&vectors[i], &t).unwrap();
            let (matrix, _) = postprocess(&a2, &order).unwrap();
            for delta in [0.0, 0.025, 0.05, 0.1] {
                let dag = estimated_dag(&matrix, delta);
                if delta >= 0.05 && dag.edge_count() > 0 {
                    println!("d={d} r={r} delta={delta}: {} edges!", dag.edge_count());
                }
            }
        }
        println!("d={d}: done");
    }
}

fn scan_slope() {
    let mut medians = Vec::new();
    for n in [10_000usize, 100_000, 1_000_000] {
        let k = (n as f64).powf(0.7) as usize;
        let mut errors = Vec::new();
        for seed in 0..20u64 {
            let model = RmlmModel::random(4, 0.5, 42).unwrap();
            let model = RmlmModel::new(model.matrix().clone(), 9000 + seed).unwrap();
            let x = model.simulate(n);
            let p = maxlinear::projection::MaxProjection::set([0usize, 1, 2]).unwrap();
            let exact = model.scalings().scaling(&p).unwrap();
            let est = estimate_scaling(&x, k, &p).unwrap();
            errors.push((est - exact).abs());
        }
        errors.sort_by(f64::total_cmp);
        let median = (errors[9] + errors[10]) / 2.0;
        println!("n={n} k={k}: median abs error {median:.5}");
        medians.push(median);
    }
    println!("decreasing: {}", medians[0] > medians[1] && medians[1] > medians[2]);
}
