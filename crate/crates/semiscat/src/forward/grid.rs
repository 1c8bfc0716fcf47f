//! Uniform Cartesian grids with FFT-based Fourier multipliers.
//!
//! Grid functions store samples over a periodized box; their discrete
//! Fourier transforms are normalized as samples of the continuous
//! transform (the box offset phase is kept), so radial frequency
//! cutoffs can be applied literally and Parseval holds with the
//! continuous constants.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::Arc;

/// Cube grid: n points per axis, spacing 2*half_width/n, covering
/// [center - half_width, center + half_width) per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierGrid {
    pub n: usize,
    pub center: [f64; 3],
    pub half_width: f64,
}

impl FourierGrid {
    pub fn new(n: usize, center: [f64; 3], half_width: f64) -> Self {
        assert!(n >= 2 && n % 2 == 0, "grid size must be even and >= 2");
        assert!(half_width > 0.0);
        FourierGrid {
            n,
            center,
            half_width,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    /// Spatial node along one axis.
    pub fn axis_point(&self, axis: usize, i: usize) -> f64 {
        self.center[axis] - self.half_width + i as f64 * self.spacing()
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.axis_point(0, i),
            self.axis_point(1, j),
            self.axis_point(2, k),
        ]
    }

    /// Frequency node along one axis for FFT bin m (signed wrap).
    pub fn axis_freq(&self, m: usize) -> f64 {
        let half = self.n / 2;
        let signed = if m < half {
            m as isize
        } else {
            m as isize - self.n as isize
        };
        signed as f64 * PI / self.half_width
    }

    pub fn freq(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.axis_freq(i), self.axis_freq(j), self.axis_freq(k)]
    }

    /// Largest frequency magnitude representable per axis.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// Samples a real function on the grid.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> GridFunction {
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    values.push(Complex64::new(f(self.point(i, j, k)), 0.0));
                }
            }
        }
        GridFunction {
            grid: *self,
            values,
        }
    }
}

/// Complex samples on a grid, in x-space.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: FourierGrid,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    /// Continuous L2 norm of the sampled function (Riemann sum).
    pub fn l2_norm(&self) -> f64 {
        let cell = self.grid.spacing().powi(3);
        (self
            .values
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            * cell)
            .sqrt()
    }

    /// Samples of the continuous Fourier transform at the grid's
    /// frequency nodes (forward DFT scaled by the cell volume, with
    /// the box-offset phase).
    pub fn fourier(&self) -> FourierFunction {
        let mut data = self.values.clone();
        fft3(&mut data, self.grid.n, false);
        let cell = self.grid.spacing().powi(3);
        let n = self.grid.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let eta = self.grid.freq(i, j, k);
                    let x0 = [
                        self.grid.axis_point(0, 0),
                        self.grid.axis_point(1, 0),
                        self.grid.axis_point(2, 0),
                    ];
                    let phase = -(eta[0] * x0[0] + eta[1] * x0[1] + eta[2] * x0[2]);
                    data[self.grid.index(i, j, k)] *=
                        Complex64::from_polar(cell, phase);
                }
            }
        }
        FourierFunction {
            grid: self.grid,
            values: data,
        }
    }
}

/// Samples of a continuous Fourier transform on the frequency nodes of
/// a grid.
#[derive(Debug, Clone)]
pub struct FourierFunction {
    pub grid: FourierGrid,
    pub values: Vec<Complex64>,
}

impl FourierFunction {
    /// Applies a frequency multiplier in place.
    pub fn multiply(&mut self, m: impl Fn([f64; 3]) -> f64) {
        let n = self.grid.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let idx = self.grid.index(i, j, k);
                    self.values[idx] *= m(self.grid.freq(i, j, k));
                }
            }
        }
    }

    /// Continuous L2 norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        let dfreq = (PI / self.grid.half_width).powi(3);
        (self
            .values
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            * dfreq
            / (2.0 * PI).powi(3))
        .sqrt()
    }

    /// Embeds the spectrum into a finer grid over the same box.
    /// Inverse-transforming the result evaluates the trigonometric
    /// interpolant of the original samples on the refined nodes.
    pub fn zero_pad(&self, n: usize) -> FourierFunction {
        assert!(n >= self.grid.n && n % 2 == 0, "padding must refine the grid");
        let grid = FourierGrid::new(n, self.grid.center, self.grid.half_width);
        let old = self.grid.n;
        let half_old = (old / 2) as isize;
        let signed = |m: usize| -> isize {
            if m < n / 2 {
                m as isize
            } else {
                m as isize - n as isize
            }
        };
        let old_index = |s: isize| -> Option<usize> {
            if (-half_old..half_old).contains(&s) {
                Some(if s >= 0 { s as usize } else { (s + old as isize) as usize })
            } else {
                None
            }
        };
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if let (Some(a), Some(b), Some(c)) =
                        (old_index(signed(i)), old_index(signed(j)), old_index(signed(k)))
                    {
                        values[grid.index(i, j, k)] =
                            self.values[self.grid.index(a, b, c)];
                    }
                }
            }
        }
        FourierFunction { grid, values }
    }

    /// Inverse transform back to x-space samples.
    pub fn inverse(&self) -> GridFunction {
        let n = self.grid.n;
        let mut data = self.values.clone();
        // Undo the continuous normalization and offset phase first.
        let cell = self.grid.spacing().powi(3);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let eta = self.grid.freq(i, j, k);
                    let x0 = [
                        self.grid.axis_point(0, 0),
                        self.grid.axis_point(1, 0),
                        self.grid.axis_point(2, 0),
                    ];
                    let phase = eta[0] * x0[0] + eta[1] * x0[1] + eta[2] * x0[2];
                    data[self.grid.index(i, j, k)] *=
                        Complex64::from_polar(1.0 / cell, phase);
                }
            }
        }
        fft3(&mut data, n, true);
        let scale = 1.0 / (n * n * n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
        GridFunction {
            grid: self.grid,
            values: data,
        }
    }
}

/// In-place 3-D FFT by three passes of 1-D transforms.
fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft: Arc<dyn rustfft::Fft<f64>> = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    // Axis 2 (contiguous).
    for i in 0..n {
        for j in 0..n {
            let base = idx(i, j, 0);
            fft.process(&mut data[base..base + n]);
        }
    }
    // Axis 1.
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                line[j] = data[idx(i, j, k)];
            }
            fft.process(&mut line);
            for j in 0..n {
                data[idx(i, j, k)] = line[j];
            }
        }
    }
    // Axis 0.
    for j in 0..n {
        for k in 0..n {
            for i in 0..n {
                line[i] = data[idx(i, j, k)];
            }
            fft.process(&mut line);
            for i in 0..n {
                data[idx(i, j, k)] = line[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::Bump;
    use approx::assert_relative_eq;

    #[test]
    fn forward_inverse_round_trips() {
        let grid = FourierGrid::new(16, [0.4, -0.2, 1.0], 1.3);
        let bump = Bump::new([0.4, -0.2, 1.0], 0.8, 1.0);
        let g = grid.sample(|x| bump.eval(x));
        let back = g.fourier().inverse();
        let err: f64 = g
            .values
            .iter()
            .zip(&back.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn fourier_matches_direct_dft_with_continuous_normalization() {
        // Independent O(N^2) DFT against the FFT path, including the
        // offset phase and cell-volume scaling.
        let grid = FourierGrid::new(8, [0.5, 0.0, -0.3], 1.0);
        let bump = Bump::new([0.5, 0.0, -0.3], 0.7, 1.0);
        let g = grid.sample(|x| bump.eval(x));
        let f = g.fourier();
        let cell = grid.spacing().powi(3);
        for &(i, j, k) in &[(0usize, 0usize, 0usize), (1, 2, 3), (7, 6, 5), (4, 0, 2)] {
            let eta = grid.freq(i, j, k);
            let mut direct = Complex64::new(0.0, 0.0);
            for a in 0..8 {
                for b in 0..8 {
                    for c in 0..8 {
                        let x = grid.point(a, b, c);
                        let phase = -(eta[0] * x[0] + eta[1] * x[1] + eta[2] * x[2]);
                        direct += g.values[grid.index(a, b, c)]
                            * Complex64::from_polar(1.0, phase);
                    }
                }
            }
            direct *= cell;
            let got = f.values[grid.index(i, j, k)];
            assert!((got - direct).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn zero_padding_interpolates_through_the_original_samples() {
        let grid = FourierGrid::new(8, [0.2, 0.0, -0.5], 1.1);
        let bump = Bump::new([0.2, 0.1, -0.5], 0.7, 1.0);
        let g = grid.sample(|x| bump.eval(x));
        let fine = g.fourier().zero_pad(16).inverse();
        // Every second fine node coincides with an original node.
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    let got = fine.values[fine.grid.index(2 * i, 2 * j, 2 * k)];
                    let want = g.values[grid.index(i, j, k)];
                    assert!((got - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn parseval_holds_on_the_grid() {
        let grid = FourierGrid::new(16, [1.5, 0.0, 0.0], 1.0);
        let bump = Bump::new([1.5, 0.1, -0.1], 0.6, 0.9);
        let g = grid.sample(|x| bump.eval(x));
        let f = g.fourier();
        assert_relative_eq!(g.l2_norm(), f.l2_norm(), max_relative = 1e-12);
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        // exp(-|x|^2 / 2s^2) has transform (2 pi s^2)^{3/2}
        // exp(-s^2 |eta|^2 / 2); the box is wide enough that
        // truncation sits below the tolerance.
        let s: f64 = 0.35;
        let grid = FourierGrid::new(32, [0.0, 0.0, 0.0], 3.0);
        let g = grid.sample(|x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            (-r2 / (2.0 * s * s)).exp()
        });
        let f = g.fourier();
        for &(i, j, k) in &[(0usize, 0usize, 0usize), (1, 0, 0), (2, 1, 0), (3, 2, 1)] {
            let eta = grid.freq(i, j, k);
            let e2 = eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2];
            let expect = (2.0 * PI * s * s).powf(1.5) * (-s * s * e2 / 2.0).exp();
            let got = f.values[grid.index(i, j, k)];
            assert_relative_eq!(got.re, expect, max_relative = 1e-8);
            assert!(got.im.abs() < 1e-12);
        }
    }
}
