// temporary probe for the mixture-curve instance search; deleted before release
use trialmech::benchmarks::{bench_typefreq, max_restricted_margin, mixture_benchmark_curve};
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
    let mut root = CounterRng::new(2024);
    let good = TypeDistribution::new(vec![0.5, 0.5, 0.0]).unwrap();
    let bad = TypeDistribution::new(vec![0.0, 0.0, 1.0]).unwrap();
    let mut tried = 0;
    let mut pass_gap = 0;
    let mut pass_finite = 0;
    let mut pass_ratio = 0;
    for seed in 0..4000u64 {
        let mut rng = root.derive(seed);
        let inst = random_instance(&mut rng, &cfg);
        tried += 1;
        if degeneracy_gap(&inst) < 0.01 {
            continue;
        }
        pass_gap += 1;
        let Ok(g) = bench_typefreq(&inst, &good) else { continue };
        let Ok(b) = bench_typefreq(&inst, &bad) else { continue };
        if !g.is_finite() || !b.is_finite() {
            continue;
        }
        pass_finite += 1;
        if b.value <= g.value * 1.05 {
            continue;
        }
        pass_ratio += 1;
        if pass_ratio % 10 == 1 {
            eprintln!("funnel: tried {tried} gap {pass_gap} finite {pass_finite} ratio {pass_ratio}");
        }
        let Ok(eta_max) = max_restricted_margin(&inst, &[0, 1]) else { continue };
        if eta_max <= 1e-6 {
            continue;
        }
        let eta = (eta_max * 0.9).min(degeneracy_gap(&inst));
        let Ok(points) = mixture_benchmark_curve(&inst, &good, &bad, &[0.1, 0.01, 0.001], eta)
        else {
            continue;
        };
        let env_ok = points.iter().all(|p| {
            p.lower_env <= p.value + 1e-6 * p.value
                && p.value <= p.upper_env.unwrap() + 1e-6 * p.value
        });
        let mono = points[2].value <= points[1].value + 1e-9
            && points[1].value <= points[0].value + 1e-9;
        let limit = points[2].value - g.value <= 0.1 * (b.value - g.value);
        println!(
            "seed {seed}: gap {:.4} g {:.4} b {:.4} eta {:.4} env_ok {env_ok} mono {mono} limit {limit} values {:?} lowers {:?}",
            degeneracy_gap(&inst),
            g.value,
            b.value,
            eta,
            points.iter().map(|p| p.value).collect::<Vec<_>>(),
            points.iter().map(|p| p.lower_env).collect::<Vec<_>>(),
        );
        if env_ok && mono && limit {
            println!("FOUND seed {seed} after {tried} tried");
            let _ = &mut root;
            return;
        }
        if seed > 300 {
            break;
        }
    }
    println!("no hit in budget; tried {tried} gap {pass_gap} finite {pass_finite} ratio {pass_ratio}");
}
