use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qkm_core::bench::{complexity_table, to_csv, BenchConfig};
use qkm_core::encoders::load_latent_trajectory;
use qkm_core::metrics::{
    energy_spectrum, percentile, pdf_estimate, structure_functions, Boundary, LossReport,
};
use qkm_core::report::{write_errors_csv, write_gnuplot, write_pdf_csv, write_spectra_csv, write_structure_csv};
use qkm_core::systems::{
    advection_trajectory, gray_scott_initial, gray_scott_trajectory, random_periodic_field,
    torus_rotation_trajectory, GrayScottParams,
};
use qkm_core::unitary::DiagonalHamiltonian;
use qkm_core::{
    encode_trajectory, fit_latent, predict_state, read_trajectory, relative_l2, write_trajectory, ErrorMode,
    FourierEncoder, IdentityPhaseEncoder, KoopmanModel, LatentTrajectory, ObservableEncoder, PayloadKind,
    SubsystemLayout, TrajectoryDataset,
};

use crate::{BenchArgs, BoundaryKind, CliError, EncoderKind, EvaluateArgs, FitArgs, GenerateArgs, PredictArgs, SystemKind};

type CliResult<T> = Result<T, CliError>;

/// Per-trajectory seed: SplitMix64 finalizer applied to `seed ^ index`.
pub fn subseed(seed: u64, index: u64) -> u64 {
    let mut z = (seed ^ index).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Core errors raised while validating user parameters are usage errors.
fn as_usage(e: qkm_core::Error) -> CliError {
    match e {
        qkm_core::Error::Integration { .. } => CliError::from(e),
        other => CliError::Usage(other.to_string()),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| usage(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn read_input(path: &Path) -> CliResult<TrajectoryDataset> {
    read_trajectory(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn indexed_path(out: &Path, index: usize, count: usize) -> PathBuf {
    if count == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map_or("trajectory".into(), |s| s.to_string_lossy().into_owned());
    let name = match out.extension() {
        Some(ext) => format!("{stem}_{index:03}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{index:03}"),
    };
    out.with_file_name(name)
}

fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| usage(format!("not a number: {s:?}"))))
        .collect()
}

// ---------------------------------------------------------------- generate

pub fn generate(a: &GenerateArgs) -> CliResult<()> {
    if a.trajectories == 0 {
        return Err(usage("--trajectories must be at least 1"));
    }
    let dt = a.dt.unwrap_or(match a.system {
        SystemKind::Torus => 0.1,
        SystemKind::Advection => 0.01,
        SystemKind::Grayscott => 10.0,
    });
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(usage(format!("--dt must be positive, got {dt}")));
    }
    for i in 0..a.trajectories {
        let seed = subseed(a.seed, i as u64);
        let ds = match a.system {
            SystemKind::Torus => torus(a, dt, seed)?,
            SystemKind::Advection => {
                let d = a.d.unwrap_or(256);
                if d < 4 || !d.is_power_of_two() {
                    return Err(usage(format!("--d must be a power of two >= 4, got {d}")));
                }
                advection_trajectory(a.c_wave, &random_periodic_field(d, seed), dt, a.steps)
                    .map_err(as_usage)?
                    .with_metadata("c_wave", a.c_wave)
            }
            SystemKind::Grayscott => {
                let mut params = GrayScottParams::new(a.feed, a.kill, a.grid, a.grid);
                if let Some(h) = a.dt_int {
                    params.dt_int = h;
                }
                params.validate().map_err(as_usage)?;
                let (ya, yb) = gray_scott_initial(&params, seed);
                gray_scott_trajectory(&params, &ya, &yb, dt, a.steps).map_err(as_usage)?
            }
        }
        .with_metadata("seed", a.seed)
        .with_metadata("trajectory_index", i)
        .with_metadata("subseed", seed);
        let path = indexed_path(&a.out, i, a.trajectories);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| usage(format!("cannot create {}: {e}", parent.display())))?;
        }
        write_trajectory(&path, &ds)?;
        println!("wrote {} ({} snapshots)", path.display(), ds.steps() + 1);
    }
    Ok(())
}

fn torus(a: &GenerateArgs, dt: f64, seed: u64) -> CliResult<TrajectoryDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (omega, alphas) = match &a.omega {
        Some(text) => {
            let omega = parse_list(text)?;
            if a.d.is_some_and(|d| d != omega.len()) {
                return Err(usage("--omega length does not match --d"));
            }
            (omega, None)
        }
        None => {
            let d = a.d.unwrap_or(8);
            if d < 2 || !d.is_power_of_two() {
                return Err(usage(format!("--d must be a power of two >= 2, got {d}")));
            }
            let n = d.trailing_zeros();
            let bound = 0.1 / dt;
            let alphas: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
            let h = DiagonalHamiltonian::new(SubsystemLayout::single(d).map_err(as_usage)?, vec![alphas.clone()])?;
            (h.eigenvalues(0)?, Some(alphas))
        }
    };
    let phi0: Vec<f64> = (0..omega.len())
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    let mut ds = torus_rotation_trajectory(&omega, &phi0, dt, a.steps).map_err(as_usage)?;
    if let Some(alphas) = alphas {
        let text: Vec<String> = alphas.iter().map(|v| format!("{v:.16e}")).collect();
        ds.insert_metadata("alpha", text.join(","));
    }
    Ok(ds)
}

// ---------------------------------------------------------------- encoders

fn parse_layout(text: &str) -> CliResult<(usize, usize, usize)> {
    let parts: Vec<usize> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| usage(format!("bad layout entry {s:?}"))))
        .collect::<CliResult<_>>()?;
    match parts[..] {
        [d, c, h] => Ok((d, c, h)),
        _ => Err(usage(format!("layout must be `d,c,h`, got {text:?}"))),
    }
}

fn state_encoder(kind: EncoderKind, ds: &TrajectoryDataset) -> CliResult<Box<dyn ObservableEncoder>> {
    if ds.kind() != PayloadKind::State {
        return Err(usage("this encoder needs a state trajectory, got a latent container"));
    }
    let d = ds.snapshot_len();
    Ok(match kind {
        EncoderKind::Identity => {
            if ds.shape().len() != 1 {
                return Err(CliError::Numerical(format!(
                    "layout error: identity encoder needs 1D angle snapshots, got shape {:?}",
                    ds.shape()
                )));
            }
            Box::new(IdentityPhaseEncoder::new(d)?)
        }
        EncoderKind::Fourier => Box::new(FourierEncoder::lenient(d)?),
        EncoderKind::Latent => unreachable!("latent inputs are not re-encoded"),
    })
}

fn to_latent(kind: EncoderKind, ds: &TrajectoryDataset) -> CliResult<LatentTrajectory> {
    match kind {
        EncoderKind::Latent => Ok(load_latent_trajectory(ds)?),
        _ => Ok(encode_trajectory(state_encoder(kind, ds)?.as_ref(), ds)?),
    }
}

// ---------------------------------------------------------------- fit

pub fn fit(a: &FitArgs) -> CliResult<()> {
    let datasets = a.input.iter().map(|p| read_input(p)).collect::<CliResult<Vec<_>>>()?;
    let latents = datasets
        .iter()
        .map(|ds| to_latent(a.encoder, ds))
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(text) = &a.layout {
        let (d, c, h) = parse_layout(text)?;
        let layout = latents[0].layout();
        if (layout.state_dim(), layout.channels(), layout.subsystem_count()) != (d, c, h) {
            return Err(CliError::from(qkm_core::Error::Layout(format!(
                "requested layout ({d}, {c}, {h}) does not match the data layout ({}, {}, {})",
                layout.state_dim(),
                layout.channels(),
                layout.subsystem_count()
            ))));
        }
    }
    let fit = fit_latent(&latents, a.global_phase, a.mask_threshold)?;
    write_text(&a.out, &fit.model.to_qkham())?;
    let mut report = String::new();
    writeln!(report, "encoder {:?}", a.encoder).unwrap();
    writeln!(report, "trajectories {}", latents.len()).unwrap();
    writeln!(report, "global_phase {}", a.global_phase).unwrap();
    writeln!(
        report,
        "mask_threshold {}",
        a.mask_threshold.map_or("none".into(), |t| t.to_string())
    )
    .unwrap();
    writeln!(report, "max_modulus_drift {:.16e}", latents.iter().map(|l| l.modulus_drift()).fold(0.0, f64::max)).unwrap();
    writeln!(report, "max_residual_rms {:.16e}", fit.max_residual_rms()).unwrap();
    report.push_str(&fit.to_report());
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".report");
        PathBuf::from(p)
    });
    write_text(&report_path, &report)?;
    println!("residual_rms {:.3e}", fit.max_residual_rms());
    println!("wrote {} and {}", a.out.display(), report_path.display());
    Ok(())
}

// ---------------------------------------------------------------- predict

fn parse_steps(text: &str) -> CliResult<(usize, usize)> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| usage(format!("--steps must be `a..b`, got {text:?}")))?;
    let lo: usize = lo.trim().parse().map_err(|_| usage(format!("bad step {lo:?}")))?;
    let hi: usize = hi.trim().parse().map_err(|_| usage(format!("bad step {hi:?}")))?;
    if lo > hi {
        return Err(usage(format!("empty step range {text:?}")));
    }
    Ok((lo, hi))
}

fn load_model(path: &Path) -> CliResult<KoopmanModel> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read model {}: {e}", path.display())))?;
    KoopmanModel::from_qkham(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn complex_parts(modulus: &[f64], phase: &[f64]) -> Vec<f64> {
    let re = modulus.iter().zip(phase).map(|(r, p)| r * p.cos());
    let im = modulus.iter().zip(phase).map(|(r, p)| r * p.sin());
    re.chain(im).collect()
}

pub fn predict(a: &PredictArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let input = read_input(&a.input)?;
    let truth = match &a.truth {
        Some(p) => read_input(p)?,
        None => input.clone(),
    };
    let (lo, hi) = match &a.steps {
        Some(s) => parse_steps(s)?,
        None => (1.min(input.steps()), input.steps()),
    };
    let mode = if a.squared { ErrorMode::Squared } else { ErrorMode::Rooted };
    let dt = input.dt();
    let steps: Vec<usize> = (lo..=hi).collect();

    let (predicted, errors): (TrajectoryDataset, Vec<(usize, Option<f64>)>) = if a.encoder == EncoderKind::Latent {
        let latent = load_latent_trajectory(&input)?;
        if latent.layout() != model.layout() {
            return Err(CliError::from(qkm_core::Error::Layout("model layout does not match the latent data".into())));
        }
        let truth_latent = load_latent_trajectory(&truth)?;
        let obs0 = latent.observable(0)?;
        let rows = steps
            .par_iter()
            .map(|&k| {
                let obs = model.evolve(&obs0, k as f64 * dt)?;
                let err = (k <= truth_latent.steps())
                    .then(|| {
                        let t = truth_latent.observable(k)?;
                        relative_l2(
                            &complex_parts(obs.modulus(), obs.phase()),
                            &complex_parts(t.modulus(), t.phase()),
                            mode,
                        )
                    })
                    .transpose()?;
                Ok((obs, err))
            })
            .collect::<qkm_core::Result<Vec<_>>>()?;
        let errors = steps.iter().zip(&rows).map(|(&k, (_, e))| (k, *e)).collect();
        let (modulus, phase) = rows
            .into_iter()
            .map(|(o, _)| {
                let (_, r, p) = o.into_parts();
                (r, p)
            })
            .unzip();
        let ds = LatentTrajectory::new(model.layout().clone(), dt, modulus, phase)?.to_dataset()?;
        (ds, errors)
    } else {
        let encoder = state_encoder(a.encoder, &input)?;
        if encoder.layout() != model.layout() {
            return Err(CliError::from(qkm_core::Error::Layout(format!(
                "model has {} observables, the encoder produces {}",
                model.layout().total(),
                encoder.layout().total()
            ))));
        }
        if truth.shape() != input.shape() {
            return Err(usage("truth and input shapes differ"));
        }
        let x0 = input.snapshot(0);
        let rows = steps
            .par_iter()
            .map(|&k| {
                let pred = predict_state(encoder.as_ref(), &model, x0, k as f64 * dt)?;
                let err = (k <= truth.steps())
                    .then(|| relative_l2(&pred, truth.snapshot(k), mode))
                    .transpose()?;
                Ok((pred, err))
            })
            .collect::<qkm_core::Result<Vec<_>>>()?;
        let errors = steps.iter().zip(&rows).map(|(&k, (_, e))| (k, *e)).collect();
        let ds = TrajectoryDataset::new(
            PayloadKind::State,
            input.shape().to_vec(),
            dt,
            rows.into_iter().map(|(p, _)| p).collect(),
        )?;
        (ds, errors)
    };
    let predicted = predicted
        .with_metadata("first_step", lo)
        .with_metadata("prediction", "one-shot")
        .with_metadata("error_mode", mode.name());
    write_trajectory(&a.out, &predicted)?;
    if let Some(path) = &a.errors {
        write_errors_csv(path, &errors)?;
    }
    let known: Vec<f64> = errors.iter().filter_map(|e| e.1).collect();
    if let Some(max) = known.iter().copied().reduce(f64::max) {
        println!("max_relative_error ({}) {max:.6e} over {} steps", mode.name(), known.len());
    }
    let beyond = errors.iter().filter(|e| e.1.is_none()).count();
    if beyond > 0 {
        println!("{beyond} steps beyond the ground-truth horizon (no error reported)");
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- evaluate

fn field_geometry(shape: &[usize], channel: usize) -> CliResult<(usize, usize, usize)> {
    // (offset, nx, ny)
    match *shape {
        [n] if channel == 0 => Ok((0, n, 1)),
        [ny, nx] if channel == 0 => Ok((0, nx, ny)),
        [c, ny, nx] if channel < c => Ok((channel * nx * ny, nx, ny)),
        _ => Err(usage(format!("channel {channel} not available in snapshot shape {shape:?}"))),
    }
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let pred = read_input(&a.pred)?;
    let truth = read_input(&a.truth)?;
    if pred.kind() != PayloadKind::State || truth.kind() != PayloadKind::State {
        return Err(usage("evaluate needs state trajectories"));
    }
    if pred.shape() != truth.shape() {
        return Err(usage(format!(
            "shape mismatch: prediction {:?}, truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let first: usize = pred
        .meta("first_step")
        .map(|s| s.parse().map_err(|_| usage(format!("bad first_step metadata {s:?}"))))
        .transpose()?
        .unwrap_or(0);
    let pairs: Vec<(usize, usize)> = (0..=pred.steps())
        .map(|i| (i, first + i))
        .filter(|&(_, k)| k <= truth.steps())
        .collect();
    if pairs.is_empty() {
        return Err(usage("prediction and truth share no time steps"));
    }
    let mode = if a.squared { ErrorMode::Squared } else { ErrorMode::Rooted };
    fs::create_dir_all(&a.out).map_err(|e| usage(format!("cannot create {}: {e}", a.out.display())))?;

    let errors: Vec<(usize, Option<f64>)> = pairs
        .iter()
        .map(|&(i, k)| Ok((k, Some(relative_l2(pred.snapshot(i), truth.snapshot(k), mode)?))))
        .collect::<qkm_core::Result<_>>()?;
    write_errors_csv(&a.out.join("errors.csv"), &errors)?;

    let (offset, nx, ny) = field_geometry(truth.shape(), a.channel)?;
    let cells = nx * ny;
    let (last_i, last_k) = *pairs.last().unwrap();
    let pred_field = &pred.snapshot(last_i)[offset..offset + cells];
    let truth_field = &truth.snapshot(last_k)[offset..offset + cells];

    let sp_pred = energy_spectrum(pred_field, nx, ny)?;
    let sp_truth = energy_spectrum(truth_field, nx, ny)?;
    write_spectra_csv(&a.out.join("spectra.csv"), &[("pred", &sp_pred), ("truth", &sp_truth)])?;

    let gather = |ds: &TrajectoryDataset, idx: &dyn Fn(&(usize, usize)) -> usize| -> Vec<f64> {
        pairs
            .iter()
            .flat_map(|p| ds.snapshot(idx(p))[offset..offset + cells].to_vec())
            .collect()
    };
    let pdf_pred = pdf_estimate(&gather(&pred, &|p| p.0), a.bins, true)?;
    let pdf_truth = pdf_estimate(&gather(&truth, &|p| p.1), a.bins, true)?;
    write_pdf_csv(&a.out.join("pdf_pred.csv"), "pred", &pdf_pred)?;
    write_pdf_csv(&a.out.join("pdf_truth.csv"), "truth", &pdf_truth)?;

    let boundary = match a.boundary {
        BoundaryKind::Periodic => Boundary::Periodic,
        BoundaryKind::Interior => Boundary::Interior,
    };
    let sf_pred = structure_functions(pred_field, nx, ny, &a.orders, &a.separations, boundary)?;
    let sf_truth = structure_functions(truth_field, nx, ny, &a.orders, &a.separations, boundary)?;
    write_structure_csv(&a.out.join("structure.csv"), &[("pred", &sf_pred), ("truth", &sf_truth)])?;

    let values: Vec<f64> = errors.iter().filter_map(|e| e.1).collect();
    let spectrum_gap = sp_pred
        .energy
        .iter()
        .zip(&sp_truth.energy)
        .map(|(p, t)| (p - t).abs())
        .fold(0.0, f64::max);
    let mut summary = String::new();
    writeln!(summary, "error_mode {}", mode.name()).unwrap();
    writeln!(summary, "steps_compared {}", values.len()).unwrap();
    writeln!(summary, "max_error {:.16e}", values.iter().copied().fold(0.0, f64::max)).unwrap();
    writeln!(summary, "mean_error {:.16e}", values.iter().sum::<f64>() / values.len() as f64).unwrap();
    writeln!(summary, "p10_error {:.16e}", percentile(&values, 10.0).unwrap()).unwrap();
    writeln!(summary, "p90_error {:.16e}", percentile(&values, 90.0).unwrap()).unwrap();
    writeln!(summary, "spectrum_max_abs_diff {spectrum_gap:.16e}").unwrap();
    writeln!(summary, "pdf_mean pred {:.16e} truth {:.16e}", pdf_pred.mean, pdf_truth.mean).unwrap();
    writeln!(summary, "pdf_std pred {:.16e} truth {:.16e}", pdf_pred.std_dev, pdf_truth.std_dev).unwrap();
    if let Some(model_path) = &a.model {
        let model = load_model(model_path)?;
        let encoder = state_encoder(a.encoder, &truth)?;
        if encoder.layout() != model.layout() {
            return Err(CliError::from(qkm_core::Error::Layout("model and encoder layouts differ".into())));
        }
        summary.push_str(&LossReport::compute(encoder.as_ref(), &model, std::slice::from_ref(&truth))?.to_summary());
    }
    write_text(&a.out.join("summary.txt"), &summary)?;
    if a.plot {
        write_gnuplot(&a.out, &["errors.csv", "spectra.csv", "pdf_pred.csv", "pdf_truth.csv", "structure.csv"])?;
    }
    print!("{summary}");
    Ok(())
}

// ---------------------------------------------------------------- bench

pub fn bench(a: &BenchArgs) -> CliResult<()> {
    if a.min_qubits == 0 || a.min_qubits > a.max_qubits || a.max_qubits > 30 {
        return Err(usage("need 1 <= --min-qubits <= --max-qubits <= 30"));
    }
    let rows = complexity_table(&BenchConfig {
        min_qubits: a.min_qubits,
        max_qubits: a.max_qubits,
        repetitions: a.reps,
        dense_cap: a.dense_cap,
        lazy_queries: a.queries.max(1),
        seed: a.seed,
    })?;
    let csv = to_csv(&rows);
    match &a.out {
        Some(path) => {
            write_text(path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subseeds_differ_and_are_stable() {
        assert_ne!(subseed(0, 0), subseed(0, 1));
        assert_ne!(subseed(1, 0), subseed(0, 1) ^ 1);
        assert_eq!(subseed(42, 7), subseed(42, 7));
    }

    #[test]
    fn step_ranges() {
        assert_eq!(parse_steps("61..70").unwrap(), (61, 70));
        assert_eq!(parse_steps("0..0").unwrap(), (0, 0));
        assert!(parse_steps("5..2").is_err());
        assert!(parse_steps("5").is_err());
    }

    #[test]
    fn layouts() {
        assert_eq!(parse_layout("8,1,1").unwrap(), (8, 1, 1));
        assert_eq!(parse_layout("8 2 3").unwrap(), (8, 2, 3));
        assert!(parse_layout("8,1").is_err());
    }

    #[test]
    fn indexed_names() {
        assert_eq!(indexed_path(Path::new("a/b.qktraj"), 3, 1), PathBuf::from("a/b.qktraj"));
        assert_eq!(indexed_path(Path::new("a/b.qktraj"), 3, 5), PathBuf::from("a/b_003.qktraj"));
    }
}
