//! Reference systems: ergodic torus rotation, periodic linear advection and
//! Gray-Scott reaction-diffusion.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{PayloadKind, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::spectral::{wavenumber, Dft};

/// Angles `phi0 + omega * k * dt` for `k = 0..=T`, stored unwrapped.
pub fn torus_rotation_trajectory(omega: &[f64], phi0: &[f64], dt: f64, steps: usize) -> Result<TrajectoryDataset> {
    if omega.is_empty() || omega.len() != phi0.len() {
        return Err(Error::Shape(format!(
            "need matching nonempty rates and angles, got {} and {}",
            omega.len(),
            phi0.len()
        )));
    }
    let snapshots = (0..=steps)
        .map(|k| {
            let t = k as f64 * dt;
            phi0.iter().zip(omega).map(|(p, w)| p + w * t).collect()
        })
        .collect();
    Ok(TrajectoryDataset::new(PayloadKind::State, vec![omega.len()], dt, snapshots)?
        .with_metadata("system", "torus")
        .with_metadata("omega", join(omega)))
}

/// Exact periodic solution of `u_t + c u_x = 0` on `[0, 2*pi)`.
///
/// Mode `m` is rotated by `-c * kappa_m * t` with integer wavenumbers in DFT
/// order and the Nyquist bin at `+d/2`; the real part of the inverse
/// transform is kept, so any Nyquist content oscillates in amplitude rather
/// than translating.
pub fn advection_trajectory(speed: f64, u0: &[f64], dt: f64, steps: usize) -> Result<TrajectoryDataset> {
    let d = u0.len();
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::Shape(format!("grid size {d} is not a power of two >= 2")));
    }
    let dft = Dft::new(d);
    let mut spectrum: Vec<Complex64> = u0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft.forward(&mut spectrum);
    let scale = 1.0 / d as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); d];
    let snapshots = (0..=steps)
        .map(|k| {
            let t = k as f64 * dt;
            for (m, (b, s)) in buf.iter_mut().zip(&spectrum).enumerate() {
                *b = s * Complex64::cis(-speed * wavenumber(m, d) as f64 * t);
            }
            dft.inverse(&mut buf);
            buf.iter().map(|z| z.re * scale).collect()
        })
        .collect();
    Ok(TrajectoryDataset::new(PayloadKind::State, vec![d], dt, snapshots)?
        .with_metadata("system", "advection")
        .with_metadata("wave_speed", speed))
}

/// Smooth random periodic field with zero Nyquist content: modes
/// `1..d/2` with amplitudes decaying like `1/m` and random phases, plus a
/// random mean.
pub fn random_periodic_field(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = rng.random_range(-0.5..0.5);
    let modes: Vec<(f64, f64, f64)> = (1..d / 2)
        .map(|m| {
            (
                m as f64,
                rng.random_range(0.5..1.0) / m as f64,
                rng.random_range(-PI..PI),
            )
        })
        .collect();
    (0..d)
        .map(|i| {
            let x = 2.0 * PI * i as f64 / d as f64;
            mean + modes
                .iter()
                .map(|(m, a, p)| a * (m * x + p).cos())
                .sum::<f64>()
        })
        .collect()
}

/// Parameters of the Gray-Scott system on a periodic rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayScottParams {
    pub diffusion_a: f64,
    pub diffusion_b: f64,
    pub feed: f64,
    pub kill: f64,
    pub nx: usize,
    pub ny: usize,
    /// `(x_min, x_max, y_min, y_max)`.
    pub domain: (f64, f64, f64, f64),
    /// Upper bound on the explicit Euler substep.
    pub dt_int: f64,
}

impl GrayScottParams {
    pub const DEFAULT_DIFFUSION_A: f64 = 2.1e-5;
    pub const DEFAULT_DIFFUSION_B: f64 = 1.1e-5;

    /// Default diffusivities on `[-1, 1]^2`, with the substep set to half
    /// the explicit stability bound.
    pub fn new(feed: f64, kill: f64, nx: usize, ny: usize) -> Self {
        let mut p = Self {
            diffusion_a: Self::DEFAULT_DIFFUSION_A,
            diffusion_b: Self::DEFAULT_DIFFUSION_B,
            feed,
            kill,
            nx,
            ny,
            domain: (-1.0, 1.0, -1.0, 1.0),
            dt_int: 0.0,
        };
        p.dt_int = 0.5 * p.stability_bound();
        p
    }

    pub fn spacing(&self) -> (f64, f64) {
        (
            (self.domain.1 - self.domain.0) / self.nx as f64,
            (self.domain.3 - self.domain.2) / self.ny as f64,
        )
    }

    /// `min(dx, dy)^2 / (4 * max(D_A, D_B))`.
    pub fn stability_bound(&self) -> f64 {
        let (dx, dy) = self.spacing();
        dx.min(dy).powi(2) / (4.0 * self.diffusion_a.max(self.diffusion_b))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("D_A", self.diffusion_a),
            ("D_B", self.diffusion_b),
            ("F", self.feed),
            ("K", self.kill),
            ("dt_int", self.dt_int),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::Shape(format!("grid {}x{} too small", self.nx, self.ny)));
        }
        let (dx, dy) = self.spacing();
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::Domain("domain bounds must be increasing".into()));
        }
        if self.dt_int > self.stability_bound() {
            return Err(Error::Domain(format!(
                "dt_int = {} exceeds the stability bound {}",
                self.dt_int,
                self.stability_bound()
            )));
        }
        Ok(())
    }
}

/// Seeded initial condition: `Y_A = 1, Y_B = 0` with a few random square
/// patches of `Y_A = 0.5, Y_B = 0.25`, plus 1% noise.
pub fn gray_scott_initial(params: &GrayScottParams, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny) = (params.nx, params.ny);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = vec![1.0; nx * ny];
    let mut b = vec![0.0; nx * ny];
    let side = (nx.min(ny) / 8).max(1);
    for _ in 0..6 {
        let cx = rng.random_range(0..nx);
        let cy = rng.random_range(0..ny);
        for dy in 0..side {
            for dx in 0..side {
                let i = ((cy + dy) % ny) * nx + (cx + dx) % nx;
                a[i] = 0.5;
                b[i] = 0.25;
            }
        }
    }
    for v in a.iter_mut().chain(b.iter_mut()) {
        *v = (*v + rng.random_range(-0.01f64..0.01)).clamp(0.0, 1.0);
    }
    (a, b)
}

/// Integrates Gray-Scott with periodic boundaries, a 5-point Laplacian and
/// explicit Euler substeps, emitting a `[2, ny, nx]` snapshot every `dt`.
///
/// Each output interval is split into `ceil(dt / dt_int)` equal substeps.
pub fn gray_scott_trajectory(
    params: &GrayScottParams,
    ya0: &[f64],
    yb0: &[f64],
    dt: f64,
    steps: usize,
) -> Result<TrajectoryDataset> {
    params.validate()?;
    let cells = params.nx * params.ny;
    if ya0.len() != cells || yb0.len() != cells {
        return Err(Error::Shape(format!(
            "fields must have {cells} values, got {} and {}",
            ya0.len(),
            yb0.len()
        )));
    }
    if ya0.iter().chain(yb0).any(|v| !(0.0..=1.5).contains(v)) {
        return Err(Error::Domain("initial concentrations must lie in [0, 1.5]".into()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("output step must be positive, got {dt}")));
    }
    let substeps = (dt / params.dt_int - 1e-9).ceil().max(1.0) as u64;
    let h = dt / substeps as f64;

    let mut a = ya0.to_vec();
    let mut b = yb0.to_vec();
    let mut next_a = vec![0.0; cells];
    let mut next_b = vec![0.0; cells];
    let mut snapshots = Vec::with_capacity(steps + 1);
    snapshots.push([a.as_slice(), b.as_slice()].concat());
    let mut counter = 0u64;
    for _ in 0..steps {
        for _ in 0..substeps {
            euler_substep(params, h, &a, &b, &mut next_a, &mut next_b);
            counter += 1;
            if next_a.iter().chain(&next_b).any(|v| !v.is_finite()) {
                return Err(Error::Integration {
                    step: counter,
                    time: counter as f64 * h,
                });
            }
            std::mem::swap(&mut a, &mut next_a);
            std::mem::swap(&mut b, &mut next_b);
        }
        snapshots.push([a.as_slice(), b.as_slice()].concat());
    }
    let ds = TrajectoryDataset::new(PayloadKind::State, vec![2, params.ny, params.nx], dt, snapshots)?;
    Ok(ds
        .with_metadata("system", "grayscott")
        .with_metadata("fields", "Y_A,Y_B")
        .with_metadata("F", params.feed)
        .with_metadata("K", params.kill)
        .with_metadata("D_A", params.diffusion_a)
        .with_metadata("D_B", params.diffusion_b)
        .with_metadata("dt_int", params.dt_int)
        .with_metadata("substep", h)
        .with_metadata("time_scale_tau", 1.0 / params.feed)
        .with_metadata("t_star_per_step", dt * params.feed)
        .with_metadata(
            "domain",
            join(&[params.domain.0, params.domain.1, params.domain.2, params.domain.3]),
        ))
}

fn euler_substep(p: &GrayScottParams, h: f64, a: &[f64], b: &[f64], out_a: &mut [f64], out_b: &mut [f64]) {
    let (nx, ny) = (p.nx, p.ny);
    let (dx, dy) = p.spacing();
    let (cx, cy) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    for y in 0..ny {
        let up = ((y + ny - 1) % ny) * nx;
        let down = ((y + 1) % ny) * nx;
        let row = y * nx;
        for x in 0..nx {
            let left = (x + nx - 1) % nx;
            let right = (x + 1) % nx;
            let i = row + x;
            let lap = |f: &[f64]| {
                cx * (f[row + left] - 2.0 * f[i] + f[row + right])
                    + cy * (f[up + x] - 2.0 * f[i] + f[down + x])
            };
            let reaction = a[i] * b[i] * b[i];
            out_a[i] = a[i] + h * (p.diffusion_a * lap(a) - reaction + p.feed * (1.0 - a[i]));
            out_b[i] = b[i] + h * (p.diffusion_b * lap(b) + reaction - (p.feed + p.kill) * b[i]);
        }
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_examples() {
        let ds = torus_rotation_trajectory(&[0.0, 0.0], &[0.3, -1.0], 0.1, 5).unwrap();
        assert!(ds.snapshots().all(|s| s == [0.3, -1.0]));
        let ds = torus_rotation_trajectory(&[1.0], &[0.25], 0.5, 4).unwrap();
        let got: Vec<f64> = ds.snapshots().map(|s| s[0]).collect();
        assert_eq!(got, vec![0.25, 0.75, 1.25, 1.75, 2.25]);
        assert_eq!(ds.steps(), 4);
        assert!(torus_rotation_trajectory(&[1.0], &[0.0, 1.0], 0.1, 2).is_err());
    }

    #[test]
    fn advection_examples() {
        let d = 64;
        let x: Vec<f64> = (0..d).map(|i| 2.0 * PI * i as f64 / d as f64).collect();
        let u0: Vec<f64> = x.iter().map(|v| v.cos()).collect();
        let ds = advection_trajectory(1.0, &u0, PI / 2.0, 1).unwrap();
        for (u, xi) in ds.snapshot(1).iter().zip(&x) {
            assert!((u - xi.sin()).abs() < 1e-12);
        }
        let still = advection_trajectory(0.0, &u0, 0.1, 3).unwrap();
        for s in still.snapshots() {
            for (a, b) in s.iter().zip(&u0) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        let u0 = random_periodic_field(d, 3);
        let ds = advection_trajectory(1.3, &u0, 0.02, 40).unwrap();
        let e0: f64 = u0.iter().map(|v| v * v).sum();
        for s in ds.snapshots() {
            let e: f64 = s.iter().map(|v| v * v).sum();
            assert!((e - e0).abs() < 1e-10 * e0.max(1.0));
        }
        assert!(advection_trajectory(1.0, &[0.0; 12], 0.1, 2).is_err());
    }

    #[test]
    fn gray_scott_fixed_point() {
        let p = GrayScottParams::new(0.029, 0.057, 16, 16);
        let n = p.nx * p.ny;
        let ds = gray_scott_trajectory(&p, &vec![1.0; n], &vec![0.0; n], 10.0, 5).unwrap();
        let last = ds.snapshot(5);
        assert!(last[..n].iter().all(|&v| v == 1.0));
        assert!(last[n..].iter().all(|&v| v == 0.0));
        assert_eq!(ds.meta("F"), Some("0.029"));
        assert_eq!(ds.shape(), &[2, 16, 16]);
    }

    #[test]
    fn gray_scott_rejects_unstable_substep() {
        let mut p = GrayScottParams::new(0.029, 0.057, 16, 16);
        p.dt_int = 2.0 * p.stability_bound();
        let n = p.nx * p.ny;
        assert!(matches!(
            gray_scott_trajectory(&p, &vec![1.0; n], &vec![0.0; n], 10.0, 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gray_scott_reports_blow_up() {
        let mut p = GrayScottParams::new(0.029, 0.057, 8, 8);
        p.feed = 1e300;
        let n = p.nx * p.ny;
        let err = gray_scott_trajectory(&p, &vec![0.5; n], &vec![0.5; n], 10.0, 3).unwrap_err();
        assert!(matches!(err, Error::Integration { step: 2, .. }), "{err:?}");
    }

    #[test]
    fn gray_scott_defaults() {
        let p = GrayScottParams::new(0.029, 0.057, 128, 128);
        assert_eq!(p.diffusion_a, 2.1e-5);
        assert_eq!(p.diffusion_b, 1.1e-5);
        assert!((p.dt_int - 0.5 * (2.0f64 / 128.0).powi(2) / (4.0 * 2.1e-5)).abs() < 1e-12);
    }
}
