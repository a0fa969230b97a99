use qkm_core::systems::{gray_scott_initial, gray_scott_trajectory, GrayScottParams};
use qkm_core::{read_trajectory, write_trajectory, Error};

const CELLS: usize = 64 * 64;

fn maze_run() -> qkm_core::TrajectoryDataset {
    let params = GrayScottParams::new(0.029, 0.057, 64, 64);
    let (a, b) = gray_scott_initial(&params, 42);
    gray_scott_trajectory(&params, &a, &b, 200.0, 10).unwrap()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
    (mean, var.sqrt())
}

#[test]
fn pinned_pattern_checksum() {
    let ds = maze_run();
    let (a, b) = ds.snapshot(ds.steps()).split_at(CELLS);
    let (sum_a, sum_b) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    assert!((sum_a - 3.882130825968306e3).abs() <= 1e-9 * sum_a, "sum Y_A = {sum_a:.15e}");
    assert!((sum_b - 7.211846645826131e1).abs() <= 1e-9 * sum_b, "sum Y_B = {sum_b:.15e}");
    // patterned, not relaxed to the uniform state
    let (_, std_b) = mean_std(b);
    assert!(std_b > 0.05, "std Y_B = {std_b}");
}

#[test]
fn bounded_over_horizon() {
    let ds = maze_run();
    assert!(ds.data().iter().all(|v| v.abs() <= 2.0));
}

#[test]
fn metadata_and_shape() {
    let ds = maze_run();
    assert_eq!(ds.shape(), &[2, 64, 64]);
    assert_eq!(ds.meta("system"), Some("grayscott"));
    assert_eq!(ds.meta("F").unwrap().parse::<f64>().unwrap(), 0.029);
    assert_eq!(ds.meta("K").unwrap().parse::<f64>().unwrap(), 0.057);
    let tau: f64 = ds.meta("time_scale_tau").unwrap().parse().unwrap();
    assert!((tau - 1.0 / 0.029).abs() < 1e-12);
}

#[test]
fn deterministic_and_file_round_trip() {
    let ds = maze_run();
    assert_eq!(ds, maze_run());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gs.qktraj");
    write_trajectory(&path, &ds).unwrap();
    let back = read_trajectory(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(
        back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        ds.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn out_of_range_initial_values_are_rejected() {
    let params = GrayScottParams::new(0.029, 0.057, 8, 8);
    let mut a = vec![1.0; 64];
    a[3] = 1.6;
    let err = gray_scott_trajectory(&params, &a, &[0.0; 64], 1.0, 1).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}
