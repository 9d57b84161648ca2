//! Slow statistical checks on transport and accumulation.

use muscat::geometry::{ConcreteSample, Scene, Slab, Vec3};
use muscat::materials::MaterialRegistry;
use muscat::muon_source::MuonState;
use muscat::reconstruction::{quantize_angle, Deposit, VoxelGrid};
use muscat::rng::stream;
use muscat::transport::{propagate, TransportOptions};
use rand::Rng;

fn full_scene() -> Scene {
    Scene::new(&ConcreteSample::empty(0, Slab::FULL), &MaterialRegistry::builtin()).unwrap()
}

fn vertical(rng: &mut impl Rng) -> MuonState {
    MuonState {
        position: Vec3::new(rng.random_range(-400.0..400.0), rng.random_range(-400.0..400.0), 100.0),
        direction: -Vec3::z(),
        momentum: 3000.0,
        time_offset: 0.0,
    }
}

fn median_abs(mut v: Vec<f64>) -> f64 {
    v.iter_mut().for_each(|x| *x = x.abs());
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Projected exit angles for `n` vertical 3 GeV muons.
fn projected(n: u64, step: f64, key: u64) -> Vec<f64> {
    let scene = full_scene();
    let opts = TransportOptions { step, ..TransportOptions::default() };
    let mut out = Vec::with_capacity(2 * n as usize);
    for i in 0..n {
        let mut rng = stream(key, &[i]);
        let d = propagate(&vertical(&mut rng), &scene, &mut rng, &opts).unwrap().exit.unwrap().direction;
        out.push((d.x / -d.z).atan());
        out.push((d.y / -d.z).atan());
    }
    out
}

#[test]
fn projected_width_matches_rossi() {
    // median |θ| of a zero-mean Gaussian is 0.6745σ
    let sigma = median_abs(projected(20_000, 2.0, 11)) / 0.674_489_750_196_081_7;
    let expected = 15.0 / 3000.0 * (200.0f64 / 116.7).sqrt();
    assert!((sigma / expected - 1.0).abs() < 0.05, "{sigma} vs {expected}");
}

#[test]
fn halving_the_step_keeps_the_width() {
    let coarse = median_abs(projected(100_000, 2.0, 21));
    let fine = median_abs(projected(100_000, 1.0, 22));
    assert!((coarse / fine - 1.0).abs() < 0.02, "{coarse} vs {fine}");
}

fn spread_of_means(grid: &VoxelGrid, voxels: usize) -> f64 {
    let m: Vec<f64> = (0..voxels).map(|i| grid.mean_mrad(i)).collect();
    let mu = m.iter().sum::<f64>() / m.len() as f64;
    (m.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (m.len() - 1) as f64).sqrt()
}

#[test]
fn doubling_exposure_shrinks_error_by_root_two() {
    let scene = full_scene();
    let opts = TransportOptions::default();
    let voxels = 1000;
    let mut grid = VoxelGrid::for_slab(&Slab::FULL).unwrap();
    let deposit = |grid: &mut VoxelGrid, round: u64| {
        for v in 0..voxels {
            for k in 0..50u64 {
                let mut rng = stream(31, &[round, v as u64, k]);
                let m = vertical(&mut rng);
                let d = propagate(&m, &scene, &mut rng, &opts).unwrap().exit.unwrap().direction;
                let angle = d.angle(&m.direction);
                grid.deposit(Deposit { voxel: v as u32, angle: quantize_angle(angle) }).unwrap();
            }
        }
    };
    deposit(&mut grid, 0);
    let single = spread_of_means(&grid, voxels);
    deposit(&mut grid, 1);
    let double = spread_of_means(&grid, voxels);
    let ratio = double / single;
    assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.1, "ratio {ratio}");
}
