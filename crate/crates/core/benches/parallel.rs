use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kinexplain::cohort::RiskGroup;
use kinexplain::model::{ensemble_predict_many, Architecture, GcnModel};
use kinexplain::par::Execution;
use kinexplain::perturb::{run_experiment, Boundary, Experiment, JointSet, Kind, References, Scaling};
use kinexplain::preprocess::{extract_features, prepare_clip, PreprocessConfig};
use kinexplain::skeleton::{FactorGrid, MotionWindow, SkeletonTopology};
use kinexplain::synth::{generate, SynthConfig};
use kinexplain::xai::Method;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture() -> (SkeletonTopology, Vec<MotionWindow>, Vec<GcnModel>) {
    let topo = SkeletonTopology::default();
    let cfg = SynthConfig { subjects_per_class: 2, ..SynthConfig::default() };
    let windows: Vec<MotionWindow> = generate(&cfg, Execution::Sequential)
        .unwrap()
        .clips
        .iter()
        .flat_map(|c| prepare_clip(&c.sequence, &topo, &PreprocessConfig::default()).unwrap())
        .take(16)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let models = (0..3)
        .map(|_| GcnModel::new(&topo, &Architecture::default(), &mut rng).unwrap())
        .collect();
    (topo, windows, models)
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn bench_predict(c: &mut Criterion) {
    let (topo, windows, models) = fixture();
    let features: Vec<_> = windows.iter().map(|w| extract_features(w, &topo).unwrap()).collect();
    let mut group = c.benchmark_group("ensemble_predict_many");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| ensemble_predict_many(exec, &models, &features).unwrap())
        });
    }
    group.finish();
}

fn bench_experiment(c: &mut Criterion) {
    let (topo, windows, models) = fixture();
    let refs: Vec<&MotionWindow> = windows.iter().collect();
    let references = References::compute(&refs, &topo).unwrap();
    let grid = FactorGrid::default();
    let joints = [6, 7, 8];
    let exp = Experiment {
        method: Method::Cam,
        group: RiskGroup::VeryLow,
        joint_set: JointSet::Topk,
        joints: &joints,
        kind: Kind::Velocity,
        grid: &grid,
        scaling: Scaling::Sample,
        boundary: Boundary::Reflect,
        references: Some(&references),
    };
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_experiment(&exp, &windows, &models, &topo, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_predict, bench_experiment);
criterion_main!(benches);
