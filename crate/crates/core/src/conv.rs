//! FFT convolution and the matrix-free system operator `H X̃`.
//!
//! The operator maps stacked spot filters `g` (ordered loudspeaker-major,
//! then user, then tap) to stacked receptions `y` (ordered by user). Neither
//! the Toeplitz blocks nor their products are ever formed; all products are
//! pointwise multiplications of cached spectra.

use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{dim, Result};
use crate::room::RirSet;
use crate::signal::DesignSignalSet;
use crate::solver::FilterSet;

struct RealFft {
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl RealFft {
    fn new(len: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    fn bins(&self) -> usize {
        self.len / 2 + 1
    }

    /// Spectrum of `x` zero-padded to the transform length.
    fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![0.0; self.len];
        buf[..x.len()].copy_from_slice(x);
        let mut out = self.forward.make_output_vec();
        self.forward
            .process(&mut buf, &mut out)
            .expect("buffer sizes match the plan");
        out
    }

    /// Inverse transform, scaled, keeping the first `keep` samples.
    fn time(&self, spec: &mut [Complex64], keep: usize) -> Vec<f64> {
        spec[0].im = 0.0;
        let last = spec.len() - 1;
        if self.len % 2 == 0 {
            spec[last].im = 0.0;
        }
        let mut buf = vec![0.0; self.len];
        self.inverse
            .process(spec, &mut buf)
            .expect("buffer sizes match the plan");
        let scale = 1.0 / self.len as f64;
        buf.truncate(keep);
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }
}

fn fft_len_for(len: usize) -> usize {
    len.next_power_of_two().max(2)
}

/// Linear convolution of `a` and `b` via zero-padded real FFTs.
pub fn fft_conv(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(dim("convolution inputs must be nonempty"));
    }
    let out_len = a.len() + b.len() - 1;
    let fft = RealFft::new(fft_len_for(out_len));
    let fa = fft.spectrum(a);
    let mut fb = fft.spectrum(b);
    fb.iter_mut().zip(&fa).for_each(|(y, x)| *y *= x);
    Ok(fft.time(&mut fb, out_len))
}

/// Cross-correlation `a ⊛ reverse(b)`; output index `i` is lag `i − (|b| − 1)`.
pub fn fft_corr(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let rev: Vec<f64> = b.iter().rev().copied().collect();
    fft_conv(a, &rev)
}

/// O(nm) linear convolution.
pub fn direct_conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvDims {
    /// N: design-signal length.
    pub signal_len: usize,
    /// M: filter length.
    pub filter_len: usize,
    /// P: RIR length.
    pub rir_len: usize,
    /// K
    pub users: usize,
    /// L
    pub loudspeakers: usize,
}

impl ConvDims {
    pub fn new(
        signal_len: usize,
        filter_len: usize,
        rir_len: usize,
        users: usize,
        loudspeakers: usize,
    ) -> Result<Self> {
        if signal_len == 0 || filter_len == 0 || rir_len == 0 || users == 0 || loudspeakers == 0 {
            return Err(dim("all dimensions must be positive"));
        }
        Ok(Self {
            signal_len,
            filter_len,
            rir_len,
            users,
            loudspeakers,
        })
    }

    /// Length of each driving signal s_ℓ: N + M − 1.
    pub fn driving_len(&self) -> usize {
        self.signal_len + self.filter_len - 1
    }

    /// Length of each reception y_k: N + M + P − 2.
    pub fn reception_len(&self) -> usize {
        self.signal_len + self.filter_len + self.rir_len - 2
    }

    pub fn rows(&self) -> usize {
        self.users * self.reception_len()
    }

    pub fn cols(&self) -> usize {
        self.users * self.loudspeakers * self.filter_len
    }

    /// Offset of filter (k, ℓ) in the stacked vector.
    pub fn filter_offset(&self, k: usize, l: usize) -> usize {
        (l * self.users + k) * self.filter_len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feasibility {
    pub is_overdetermined: bool,
    /// M(L − 1) − (P + N − 2)
    pub slack: i64,
}

/// Compares filter count against reception length. This is a counting
/// argument only; it does not certify rank.
pub fn rank_feasibility(dims: &ConvDims) -> Feasibility {
    let slack = dims.filter_len as i64 * (dims.loudspeakers as i64 - 1)
        - (dims.rir_len as i64 + dims.signal_len as i64 - 2);
    Feasibility {
        is_overdetermined: slack < 0,
        slack,
    }
}

/// Output of one forward application.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    /// L driving signals, each N + M − 1 samples.
    pub driving: Vec<Vec<f64>>,
    /// K receptions, each N + M + P − 2 samples.
    pub receptions: Vec<Vec<f64>>,
}

pub struct SystemOperator {
    dims: ConvDims,
    fft: RealFft,
    design: DesignSignalSet,
    rirs: RirSet,
    design_spectra: Vec<Vec<Vec<Complex64>>>,
    rir_spectra: Vec<Vec<Vec<Complex64>>>,
}

impl std::fmt::Debug for SystemOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemOperator")
            .field("dims", &self.dims)
            .field("fft_len", &self.fft.len)
            .finish_non_exhaustive()
    }
}

impl SystemOperator {
    pub fn new(design: &DesignSignalSet, rirs: &RirSet, filter_len: usize) -> Result<Self> {
        if rirs.rows() != design.users() {
            return Err(dim(format!(
                "RIR set has {} rows for {} users",
                rirs.rows(),
                design.users()
            )));
        }
        if rirs.loudspeakers() != design.loudspeakers() {
            return Err(dim(format!(
                "RIR set has {} loudspeakers, design has {}",
                rirs.loudspeakers(),
                design.loudspeakers()
            )));
        }
        let dims = ConvDims::new(
            design.len(),
            filter_len,
            rirs.len(),
            design.users(),
            design.loudspeakers(),
        )?;
        let fft = RealFft::new(fft_len_for(dims.reception_len()));
        let design_spectra = (0..dims.users)
            .map(|k| {
                (0..dims.loudspeakers)
                    .map(|l| fft.spectrum(design.signal(k, l)))
                    .collect()
            })
            .collect();
        let rir_spectra = (0..dims.users)
            .map(|k| {
                (0..dims.loudspeakers)
                    .map(|l| fft.spectrum(rirs.rir(k, l)))
                    .collect()
            })
            .collect();
        Ok(Self {
            dims,
            fft,
            design: design.clone(),
            rirs: rirs.clone(),
            design_spectra,
            rir_spectra,
        })
    }

    pub fn dims(&self) -> &ConvDims {
        &self.dims
    }

    pub fn design(&self) -> &DesignSignalSet {
        &self.design
    }

    pub fn rirs(&self) -> &RirSet {
        &self.rirs
    }

    pub fn fft_len(&self) -> usize {
        self.fft.len
    }

    /// Spectra of the driving signals for stacked filters `g`.
    fn driving_spectra(&self, g: &[f64]) -> Vec<Vec<Complex64>> {
        let d = &self.dims;
        (0..d.loudspeakers)
            .map(|l| {
                let mut acc = vec![Complex64::new(0.0, 0.0); self.fft.bins()];
                for k in 0..d.users {
                    let off = d.filter_offset(k, l);
                    let gf = self.fft.spectrum(&g[off..off + d.filter_len]);
                    for ((a, x), gv) in acc.iter_mut().zip(&self.design_spectra[k][l]).zip(&gf) {
                        *a += x * gv;
                    }
                }
                acc
            })
            .collect()
    }

    fn reception_spectra(&self, driving: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let d = &self.dims;
        (0..d.users)
            .map(|k| {
                let mut acc = vec![Complex64::new(0.0, 0.0); self.fft.bins()];
                for (l, s) in driving.iter().enumerate() {
                    for ((a, h), sv) in acc.iter_mut().zip(&self.rir_spectra[k][l]).zip(s) {
                        *a += h * sv;
                    }
                }
                acc
            })
            .collect()
    }

    fn check_filters(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.dims.cols() {
            return Err(dim(format!(
                "stacked filter vector has {} entries, expected {}",
                g.len(),
                self.dims.cols()
            )));
        }
        Ok(())
    }

    /// y = H X̃ g on stacked vectors.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check_filters(g)?;
        let driving = self.driving_spectra(g);
        let mut out = Vec::with_capacity(self.dims.rows());
        for mut spec in self.reception_spectra(&driving) {
            out.extend(self.fft.time(&mut spec, self.dims.reception_len()));
        }
        Ok(out)
    }

    /// g = X̃ᵀ Hᵀ y on stacked vectors.
    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = &self.dims;
        if y.len() != d.rows() {
            return Err(dim(format!(
                "stacked reception vector has {} entries, expected {}",
                y.len(),
                d.rows()
            )));
        }
        let rl = d.reception_len();
        let yf: Vec<Vec<Complex64>> = (0..d.users)
            .map(|k| self.fft.spectrum(&y[k * rl..(k + 1) * rl]))
            .collect();
        let mut out = vec![0.0; d.cols()];
        for l in 0..d.loudspeakers {
            // correlate with h_kℓ and sum over receiving users
            let mut back = vec![Complex64::new(0.0, 0.0); self.fft.bins()];
            for (k, yk) in yf.iter().enumerate() {
                for ((b, h), v) in back.iter_mut().zip(&self.rir_spectra[k][l]).zip(yk) {
                    *b += h.conj() * v;
                }
            }
            for k in 0..d.users {
                let mut spec: Vec<Complex64> = back
                    .iter()
                    .zip(&self.design_spectra[k][l])
                    .map(|(b, x)| x.conj() * b)
                    .collect();
                let taps = self.fft.time(&mut spec, d.filter_len);
                let off = d.filter_offset(k, l);
                out[off..off + d.filter_len].copy_from_slice(&taps);
            }
        }
        Ok(out)
    }

    /// Driving signals s_ℓ and receptions y_k for a filter set.
    pub fn forward(&self, g: &FilterSet) -> Result<Rendered> {
        if g.users() != self.dims.users
            || g.loudspeakers() != self.dims.loudspeakers
            || g.len() != self.dims.filter_len
        {
            return Err(dim(format!(
                "filter set is {}x{}x{}, operator expects {}x{}x{}",
                g.users(),
                g.loudspeakers(),
                g.len(),
                self.dims.users,
                self.dims.loudspeakers,
                self.dims.filter_len
            )));
        }
        let stacked = g.to_stacked();
        let spectra = self.driving_spectra(&stacked);
        let receptions = self
            .reception_spectra(&spectra)
            .into_iter()
            .map(|mut s| self.fft.time(&mut s, self.dims.reception_len()))
            .collect();
        let driving = spectra
            .into_iter()
            .map(|mut s| self.fft.time(&mut s, self.dims.driving_len()))
            .collect();
        Ok(Rendered {
            driving,
            receptions,
        })
    }

    /// Gradient-shaped adjoint of a stacked reception vector.
    pub fn adjoint(&self, y: &[f64]) -> Result<FilterSet> {
        let g = self.apply_adjoint(y)?;
        FilterSet::from_stacked(&g, &self.dims)
    }

    /// Column `j` of `H X̃` as a stacked reception vector.
    pub fn column(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.dims.cols() {
            return Err(dim(format!("column {j} out of range")));
        }
        let mut e = vec![0.0; self.dims.cols()];
        e[j] = 1.0;
        self.apply(&e)
    }
}
