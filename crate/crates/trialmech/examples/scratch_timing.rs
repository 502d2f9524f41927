// temporary timing probe; deleted before release
use std::time::Instant;
use trialmech::benchmarks::{bench_typefreq, bench_worst};
use trialmech::harness::{random_instance, RandomInstanceConfig};
use trialmech::incentives::degeneracy_gap;
use trialmech::model::TypeDistribution;
use trialmech::rng::CounterRng;

fn main() {
    let cfg = RandomInstanceConfig {
        n_arms: 3..=3,
        n_outcomes: 3..=3,
        n_states: 2..=3,
        n_public: 1,
        n_private: 3,
    };
    let root = CounterRng::new(2024);
    let good = TypeDistribution::new(vec![0.5, 0.5, 0.0]).unwrap();
    for seed in 0..30u64 {
        let mut rng = root.derive(seed);
        let inst = random_instance(&mut rng, &cfg);
        let gap = degeneracy_gap(&inst);
        if gap < 0.01 {
            continue;
        }
        let t = Instant::now();
        let worst = bench_worst(&inst).unwrap();
        let t_worst = t.elapsed();
        let t = Instant::now();
        let g = bench_typefreq(&inst, &good).unwrap();
        let t_freq = t.elapsed();
        println!(
            "seed {seed}: gap {gap:.3} worst {:.3} ({t_worst:?}) good {:.3} ({t_freq:?})",
            worst.value, g.value
        );
    }
}
