use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use multibump::exec::Exec;
use multibump::grid::{build_domain, Configuration, DomainMask};
use multibump::linalg::{neg_laplacian, SubsetOp};
use multibump::minimizer::{initial_guess, Model};
use multibump::{energy, split};

fn executors() -> Vec<(&'static str, Exec)> {
    let mut v = vec![("sequential", Exec::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", Exec::Parallel));
    v
}

fn setup(model: &Model, div: f64, exec: Exec) -> (DomainMask, Vec<f64>) {
    let p = &model.params;
    let s = 2.0 * p.r0;
    let cfg = Configuration::new(vec![vec![0.0, 0.0], vec![s, 0.0], vec![0.0, s]]).unwrap();
    let dm = build_domain(&cfg, model.default_d(), p.r_star / div, p).unwrap().with_exec(exec);
    let u = initial_guess(&dm, &model.profile);
    (dm, u)
}

fn kernels(c: &mut Criterion) {
    let model = Model::build(1.5, 2, 1.4).unwrap();
    let q = model.params.q;
    let delta = model.params.delta;
    for div in [32.0, 64.0] {
        let mut g = c.benchmark_group(format!("kernels_R*/{div}"));
        g.sample_size(20);
        for (name, exec) in executors() {
            let (dm, u) = setup(&model, div, exec);
            let kv = vec![1.0; dm.len()];
            g.bench_with_input(BenchmarkId::new("laplacian", name), &u, |b, u| b.iter(|| neg_laplacian(&dm, black_box(u))));
            g.bench_with_input(BenchmarkId::new("energy_and_gradient", name), &u, |b, u| {
                b.iter(|| (energy::energy_i(&dm, black_box(u), &kv, q), energy::grad_i(&dm, u, &kv, q)))
            });
            g.bench_with_input(BenchmarkId::new("split", name), &u, |b, u| b.iter(|| split::emerging_split(black_box(u), &dm, delta).unwrap()));
            let op = SubsetOp::new(&dm, &dm.cells, |_| 1.0);
            let rhs = op.gather(&u);
            g.bench_with_input(BenchmarkId::new("cg_solve", name), &rhs, |b, rhs| b.iter(|| op.solve(black_box(rhs), 1e-10, 2000).unwrap()));
        }
        g.finish();
    }
}

criterion_group!(benches, kernels);
criterion_main!(benches);
