use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use gso_bench::{random_graph, short_gso, sk_problem, SEED};
use gso_core::baselines::{self, SaConfig};
use gso_core::relaxation::{self, ThetaPopulation};
use gso_core::rng::{self, Purpose};
use gso_core::{solver, Objective, ObjectiveSpec, Problem};

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("gumbel_softmax");
    for &(bs, n, k) in &[(64usize, 256usize, 2usize), (16, 1024, 8)] {
        let p = relaxation::probabilities(&ThetaPopulation::random(bs, n, k, SEED));
        let mut rng = rng::stream(SEED, Purpose::Gumbel, 0, 0);
        let g = relaxation::gumbel_noise((bs, n, k), &mut rng);
        group.throughput(Throughput::Elements((bs * n) as u64));
        group.bench_function(BenchmarkId::from_parameter(format!("{bs}x{n}x{k}")), |b| {
            b.iter(|| relaxation::gumbel_softmax_sample(p.view(), g.view(), 1.0).unwrap())
        });
    }
    group.finish();
}

fn gso_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("gso_50_steps");
    group.sample_size(10);
    let sk = sk_problem(256);
    let g: Problem = random_graph(500, 0.01).into();
    let cases: [(&str, &Problem, ObjectiveSpec); 3] = [
        ("sk256", &sk, ObjectiveSpec::sk()),
        ("mis500", &g, ObjectiveSpec::mis(3.0)),
        ("modularity500", &g, ObjectiveSpec::modularity(8)),
    ];
    for (name, problem, spec) in cases {
        let obj = Objective::new(spec, problem).unwrap();
        let cfg = short_gso(64, 50);
        group.bench_function(name, |b| b.iter(|| solver::gso_run(&obj, &cfg).unwrap()));
    }
    group.finish();
}

fn annealing(c: &mut Criterion) {
    let mut group = c.benchmark_group("sa_100_sweeps");
    group.sample_size(10);
    let sk = sk_problem(256);
    let obj = Objective::new(ObjectiveSpec::sk(), &sk).unwrap();
    let cfg = SaConfig {
        sweeps: 100,
        seed: SEED,
        ..SaConfig::default()
    };
    group.bench_function("sk256", |b| b.iter(|| baselines::simulated_annealing(&obj, &cfg).unwrap()));
    group.finish();
}

fn greedy(c: &mut Criterion) {
    let g = random_graph(2000, 0.005);
    c.bench_function("md_greedy_mis_2000", |b| b.iter(|| baselines::md_greedy_mis(&g)));
}

criterion_group!(benches, sampling, gso_steps, annealing, greedy);
criterion_main!(benches);
