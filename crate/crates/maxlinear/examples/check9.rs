use maxlinear::model::RmlmModel;
use maxlinear::pipeline::random_projection;
use maxlinear::tail::{estimate_scaling, EmpiricalScalings};
use maxlinear::order::causal_order;
use maxlinear::tropical::reachability;
use rand::SeedableRng;

fn main() {
    let (n, k) = (1_000_000usize, 10_000usize);
    let model = RmlmModel::random(5, 0.5, 9).unwrap();
    let x = model.simulate(n);
    for desc_seed in [901u64, 1, 2, 3, 42, 1000] {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(desc_seed);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let p = random_projection(5, 1.3, &mut rng);
            let exact = model.exact_scaling(&p).unwrap();
            let est = estimate_scaling(&x, k, &p).unwrap();
            worst = worst.max((est - exact).abs());
        }
        println!("descriptor seed {desc_seed}: max error {worst:.4}");
    }
    // order validity over 20 data seeds
    let truth = reachability(model.matrix());
    let mut valid = 0;
    for data_seed in 0..20u64 {
        let m = RmlmModel::new(model.matrix().clone(), 1000 + data_seed).unwrap();
        let xs = m.simulate(n);
        let source = EmpiricalScalings::new(&xs, k).unwrap();
        let result = causal_order(&source, 1.3, 0.1).unwrap();
        if truth.is_valid_causal_order(&result.order) { valid += 1; }
    }
    println!("valid orders: {valid}/20");
}
