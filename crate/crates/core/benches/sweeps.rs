use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use skewlab::cones::{center_expansion_sweep_with, cone_invariance_sweep_with, ConeKind, ConeSpec};
use skewlab::curves::holonomy::{holonomy_defect_with, standard_pair};
use skewlab::bundle::{volume_defect_with, Bundle};
use skewlab::par::Exec;
use skewlab::MapParams;

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn sweeps(c: &mut Criterion) {
    let p = MapParams::standard(50.0).unwrap();
    let mut g = c.benchmark_group("cone_invariance_2000");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| cone_invariance_sweep_with(exec, &p, ConeSpec { kind: ConeKind::Unstable, size: 0.1 }, 2000, 1).unwrap())
        });
    }
    g.finish();

    let p = MapParams::standard(150.0).unwrap();
    let mut g = c.benchmark_group("center_expansion_5000");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| center_expansion_sweep_with(exec, &p, 5000, 1)));
    }
    g.finish();

    let p = MapParams::standard(10.0).unwrap();
    let mut g = c.benchmark_group("volume_defect_5000");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| volume_defect_with(exec, &p, 5000, 1)));
    }
    g.finish();

    let p = MapParams::standard(10.0).unwrap();
    let (a, q) = standard_pair(&p, Bundle::Ss, 1.0);
    let mut g = c.benchmark_group("holonomy_defect_8x8");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| holonomy_defect_with(exec, &p, &a, &q, Bundle::Ss, 8).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
