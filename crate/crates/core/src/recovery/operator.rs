use num_complex::Complex64;

use crate::dft::UnitaryDft;
use crate::error::{check_len, Result};
use crate::linalg::{mul_rows, mul_rows_gram, mul_rows_transpose, RowBlock};
use crate::par::{self, Execution};

/// Below this many matrix entries the row loops stay on one thread.
const PARALLEL_MIN_ENTRIES: usize = 1 << 20;

/// A = Φ·F⁻¹ applied without forming the product: an inverse FFT followed by
/// the real row block, and Aᴴ = F·Φᵀ the other way round.
#[derive(Debug, Clone)]
pub struct SensingOperator<'a> {
    rows: RowBlock<'a>,
    dft: UnitaryDft,
    exec: Execution,
}

/// Scratch buffers reused across operator applications.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    time: Vec<Complex64>,
    re: Vec<f64>,
    im: Vec<f64>,
    acc_re: Vec<f64>,
    acc_im: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(cols: usize) -> Self {
        Self {
            time: vec![Complex64::default(); cols],
            re: vec![0.0; cols],
            im: vec![0.0; cols],
            acc_re: vec![0.0; cols],
            acc_im: vec![0.0; cols],
        }
    }
}

impl<'a> SensingOperator<'a> {
    pub fn new(rows: RowBlock<'a>) -> Result<Self> {
        Self::with_execution(rows, Execution::default())
    }

    pub fn with_execution(rows: RowBlock<'a>, exec: Execution) -> Result<Self> {
        Ok(Self {
            dft: UnitaryDft::new(rows.cols())?,
            rows,
            exec,
        })
    }

    /// Number of measurements (rows of Φ).
    pub fn rows(&self) -> usize {
        self.rows.rows()
    }

    /// Spectrum length N.
    pub fn cols(&self) -> usize {
        self.rows.cols()
    }

    fn row_exec(&self) -> Execution {
        if self.rows.as_slice().len() >= PARALLEL_MIN_ENTRIES && par::current_threads() > 1 {
            self.exec
        } else {
            Execution::Sequential
        }
    }

    /// A·X.
    pub fn apply(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("operator input", self.cols(), spectrum.len())?;
        let mut ws = Workspace::new(self.cols());
        let mut out = vec![Complex64::default(); self.rows()];
        self.apply_into(spectrum, &mut ws, &mut out);
        Ok(out)
    }

    /// Aᴴ·u.
    pub fn adjoint(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("adjoint input", self.rows(), u.len())?;
        let mut ws = Workspace::new(self.cols());
        let mut out = vec![Complex64::default(); self.cols()];
        self.adjoint_into(u, &mut ws, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, spectrum: &[Complex64], ws: &mut Workspace, out: &mut [Complex64]) {
        ws.time.copy_from_slice(spectrum);
        self.dft.inverse_in_place(&mut ws.time);
        for (k, c) in ws.time.iter().enumerate() {
            ws.re[k] = c.re;
            ws.im[k] = c.im;
        }
        let (re, im, rows) = (&ws.re, &ws.im, self.rows);
        let exec = self.row_exec();
        let chunk = chunk_size(rows.rows(), exec);
        par::for_each_chunk_mut(out, chunk, exec, |start, block| {
            let end = start + block.len();
            mul_rows(rows.slice(start, end), re, im, block);
        });
    }

    pub(crate) fn adjoint_into(&self, u: &[Complex64], ws: &mut Workspace, out: &mut [Complex64]) {
        let exec = self.row_exec();
        let rows = self.rows;
        let cols = rows.cols();
        if exec.is_parallel() {
            let chunk = chunk_size(rows.rows(), exec);
            let parts = rows.rows().div_ceil(chunk);
            let partials = par::map_range(parts, exec, |p| {
                let mut re = vec![0.0; cols];
                let mut im = vec![0.0; cols];
                let end = ((p + 1) * chunk).min(rows.rows());
                mul_rows_transpose(rows.slice(p * chunk, end), &u[p * chunk..end], &mut re, &mut im);
                (re, im)
            });
            ws.re.iter_mut().for_each(|v| *v = 0.0);
            ws.im.iter_mut().for_each(|v| *v = 0.0);
            for (re, im) in partials {
                ws.re.iter_mut().zip(&re).for_each(|(a, b)| *a += b);
                ws.im.iter_mut().zip(&im).for_each(|(a, b)| *a += b);
            }
        } else {
            ws.re.iter_mut().for_each(|v| *v = 0.0);
            ws.im.iter_mut().for_each(|v| *v = 0.0);
            mul_rows_transpose(rows, u, &mut ws.re, &mut ws.im);
        }
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = Complex64::new(ws.re[k], ws.im[k]);
        }
        self.dft.forward_in_place(out);
    }
}

impl SensingOperator<'_> {
    /// A·X into `out` and Aᴴ·A·X into `gram`, reading each row of Φ once.
    pub(crate) fn gram_into(&self, spectrum: &[Complex64], ws: &mut Workspace, out: &mut [Complex64], gram: &mut [Complex64]) {
        ws.time.copy_from_slice(spectrum);
        self.dft.inverse_in_place(&mut ws.time);
        for (k, c) in ws.time.iter().enumerate() {
            ws.re[k] = c.re;
            ws.im[k] = c.im;
        }
        let exec = self.row_exec();
        let (rows, cols) = (self.rows, self.rows.cols());
        let (re, im) = (&ws.re, &ws.im);
        ws.acc_re.iter_mut().for_each(|v| *v = 0.0);
        ws.acc_im.iter_mut().for_each(|v| *v = 0.0);
        if exec.is_parallel() {
            let chunk = chunk_size(rows.rows(), exec);
            let parts = rows.rows().div_ceil(chunk);
            let partials = par::map_range(parts, exec, |p| {
                let mut acc_re = vec![0.0; cols];
                let mut acc_im = vec![0.0; cols];
                let end = ((p + 1) * chunk).min(rows.rows());
                let mut values = vec![Complex64::default(); end - p * chunk];
                mul_rows_gram(rows.slice(p * chunk, end), re, im, &mut values, &mut acc_re, &mut acc_im);
                (values, acc_re, acc_im)
            });
            let mut i = 0;
            for (values, acc_re, acc_im) in partials {
                for c in values {
                    out[i] = c;
                    i += 1;
                }
                ws.acc_re.iter_mut().zip(&acc_re).for_each(|(a, b)| *a += b);
                ws.acc_im.iter_mut().zip(&acc_im).for_each(|(a, b)| *a += b);
            }
        } else {
            mul_rows_gram(rows, re, im, out, &mut ws.acc_re, &mut ws.acc_im);
        }
        for (k, slot) in gram.iter_mut().enumerate() {
            *slot = Complex64::new(ws.acc_re[k], ws.acc_im[k]);
        }
        self.dft.forward_in_place(gram);
    }
}

fn chunk_size(rows: usize, exec: Execution) -> usize {
    if exec.is_parallel() {
        rows.div_ceil(par::current_threads() * 4).max(1)
    } else {
        rows.max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn complex_gaussian(len: usize, seed: u64) -> Vec<Complex64> {
        let g = gaussian(2 * len, seed);
        g.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
    }

    fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
    }

    #[test]
    fn zero_maps_to_zero() {
        let data = gaussian(8 * 32, 1);
        let op = SensingOperator::new(RowBlock::new(&data, 32)).unwrap();
        let out = op.apply(&vec![Complex64::default(); 32]).unwrap();
        assert!(out.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn adjoint_dot_product_test() {
        let (r, n) = (8, 32);
        let data = gaussian(r * n, 2);
        let op = SensingOperator::new(RowBlock::new(&data, n)).unwrap();
        for seed in 0..10 {
            let v = complex_gaussian(n, 100 + seed);
            let u = complex_gaussian(r, 200 + seed);
            let lhs = inner(&op.apply(&v).unwrap(), &u);
            let rhs = inner(&v, &op.adjoint(&u).unwrap());
            assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn delta_spectrum_gives_dense_column() {
        let (r, n) = (6, 32);
        let data = gaussian(r * n, 3);
        let rows = RowBlock::new(&data, n);
        let op = SensingOperator::new(rows).unwrap();
        for k in [0, 5, 31] {
            let mut delta = vec![Complex64::default(); n];
            delta[k] = Complex64::new(1.0, 0.0);
            let got = op.apply(&delta).unwrap();
            // column k of Φ·F⁻¹: Σ_t Φ[i,t]·exp(+2πi k t/N)/√N
            for i in 0..r {
                let expected: Complex64 = (0..n)
                    .map(|t| {
                        let angle = 2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                        Complex64::from_polar(rows.row(i)[t], angle)
                    })
                    .sum::<Complex64>()
                    / (n as f64).sqrt();
                assert!((got[i] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn execution_modes_agree() {
        let (r, n) = (300, 4096);
        let data = gaussian(r * n, 4);
        let rows = RowBlock::new(&data, n);
        let seq = SensingOperator::with_execution(rows, Execution::Sequential).unwrap();
        let par = SensingOperator::with_execution(rows, Execution::Parallel).unwrap();
        let v = complex_gaussian(n, 5);
        let u = complex_gaussian(r, 6);
        let (a, b) = (seq.apply(&v).unwrap(), par.apply(&v).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-9));
        let (a, b) = (seq.adjoint(&u).unwrap(), par.adjoint(&u).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-9));
    }

    #[test]
    fn fused_gram_matches_apply_then_adjoint() {
        let (r, n) = (300, 4096);
        let data = gaussian(r * n, 7);
        let rows = RowBlock::new(&data, n);
        for exec in [Execution::Sequential, Execution::Parallel] {
            let op = SensingOperator::with_execution(rows, exec).unwrap();
            let v = complex_gaussian(n, 8);
            let av = op.apply(&v).unwrap();
            let expected = op.adjoint(&av).unwrap();
            let mut ws = Workspace::new(n);
            let mut out = vec![Complex64::default(); r];
            let mut gram = vec![Complex64::default(); n];
            op.gram_into(&v, &mut ws, &mut out, &mut gram);
            assert!(out.iter().zip(&av).all(|(x, y)| (x - y).norm() < 1e-9));
            assert!(gram.iter().zip(&expected).all(|(x, y)| (x - y).norm() < 1e-9 * (1.0 + y.norm())));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let data = gaussian(4 * 8, 1);
        let op = SensingOperator::new(RowBlock::new(&data, 8)).unwrap();
        assert!(op.apply(&vec![Complex64::default(); 7]).is_err());
        assert!(op.adjoint(&vec![Complex64::default(); 5]).is_err());
    }
}
