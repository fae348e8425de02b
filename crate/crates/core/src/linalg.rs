//! Dense real-row kernels applied to split complex vectors.

use num_complex::Complex64;

/// Row-major view of a real matrix.
#[derive(Clone, Copy, Debug)]
pub struct RowBlock<'a> {
    data: &'a [f64],
    cols: usize,
}

impl<'a> RowBlock<'a> {
    pub fn new(data: &'a [f64], cols: usize) -> Self {
        assert!(cols > 0 && data.len() % cols == 0, "row block shape");
        Self { data, cols }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &'a [f64] {
        self.data
    }

    /// First `rows` rows.
    pub fn prefix(&self, rows: usize) -> RowBlock<'a> {
        RowBlock::new(&self.data[..rows * self.cols], self.cols)
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> RowBlock<'a> {
        RowBlock::new(&self.data[start * self.cols..end * self.cols], self.cols)
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'a, f64> {
        self.data.chunks_exact(self.cols)
    }

    /// Φ·v for a complex v, straightforwardly.
    pub fn mul_complex(&self, v: &[Complex64]) -> Vec<Complex64> {
        let (re, im) = split(v);
        self.iter_rows()
            .map(|row| {
                let (a, b) = dot2(row, &re, &im);
                Complex64::new(a, b)
            })
            .collect()
    }
}

pub fn split(v: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|c| c.re).collect(), v.iter().map(|c| c.im).collect())
}

/// (row·re, row·im) with independent accumulators so the loop vectorizes.
#[inline]
pub fn dot2(row: &[f64], re: &[f64], im: &[f64]) -> (f64, f64) {
    const LANES: usize = 8;
    debug_assert!(re.len() == row.len() && im.len() == row.len());
    let mut acc_re = [0.0f64; LANES];
    let mut acc_im = [0.0f64; LANES];
    let (r_chunks, a_chunks, b_chunks) = (row.chunks_exact(LANES), re.chunks_exact(LANES), im.chunks_exact(LANES));
    let (r_tail, a_tail, b_tail) = (r_chunks.remainder(), a_chunks.remainder(), b_chunks.remainder());
    for ((r, a), b) in r_chunks.zip(a_chunks).zip(b_chunks) {
        for l in 0..LANES {
            acc_re[l] = r[l].mul_add(a[l], acc_re[l]);
            acc_im[l] = r[l].mul_add(b[l], acc_im[l]);
        }
    }
    let mut sum_re: f64 = acc_re.iter().sum();
    let mut sum_im: f64 = acc_im.iter().sum();
    for ((r, a), b) in r_tail.iter().zip(a_tail).zip(b_tail) {
        sum_re += r * a;
        sum_im += r * b;
    }
    (sum_re, sum_im)
}

/// out += coef·row, for the real and imaginary parts of `coef`.
#[inline]
pub fn axpy2(row: &[f64], coef: Complex64, out_re: &mut [f64], out_im: &mut [f64]) {
    debug_assert!(out_re.len() == row.len() && out_im.len() == row.len());
    for ((r, a), b) in row.iter().zip(out_re.iter_mut()).zip(out_im.iter_mut()) {
        *a = coef.re.mul_add(*r, *a);
        *b = coef.im.mul_add(*r, *b);
    }
}

/// Rows handled together by the blocked kernels.
pub const BLOCK: usize = 4;

/// `dot2` for `BLOCK` rows at once, loading `re` and `im` a single time.
#[inline]
pub fn dot2_block(rows: [&[f64]; BLOCK], re: &[f64], im: &[f64]) -> [Complex64; BLOCK] {
    const LANES: usize = 4;
    let n = re.len();
    debug_assert!(im.len() == n && rows.iter().all(|r| r.len() == n));
    let mut acc_re = [[0.0f64; LANES]; BLOCK];
    let mut acc_im = [[0.0f64; LANES]; BLOCK];
    let full = n / LANES * LANES;
    let mut k = 0;
    while k < full {
        let a = &re[k..k + LANES];
        let b = &im[k..k + LANES];
        for (r, row) in rows.iter().enumerate() {
            let x = &row[k..k + LANES];
            for l in 0..LANES {
                acc_re[r][l] = x[l].mul_add(a[l], acc_re[r][l]);
                acc_im[r][l] = x[l].mul_add(b[l], acc_im[r][l]);
            }
        }
        k += LANES;
    }
    let mut out = [Complex64::default(); BLOCK];
    for r in 0..BLOCK {
        let mut c = Complex64::new(acc_re[r].iter().sum(), acc_im[r].iter().sum());
        for j in full..n {
            c.re += rows[r][j] * re[j];
            c.im += rows[r][j] * im[j];
        }
        out[r] = c;
    }
    out
}

/// `axpy2` for `BLOCK` rows at once, touching the outputs a single time.
#[inline]
pub fn axpy2_block(rows: [&[f64]; BLOCK], coefs: [Complex64; BLOCK], out_re: &mut [f64], out_im: &mut [f64]) {
    let n = out_re.len();
    debug_assert!(out_im.len() == n && rows.iter().all(|r| r.len() == n));
    let [r0, r1, r2, r3] = rows;
    let (r0, r1, r2, r3) = (&r0[..n], &r1[..n], &r2[..n], &r3[..n]);
    let out_im = &mut out_im[..n];
    for k in 0..n {
        let mut a = out_re[k];
        let mut b = out_im[k];
        a = coefs[0].re.mul_add(r0[k], a);
        b = coefs[0].im.mul_add(r0[k], b);
        a = coefs[1].re.mul_add(r1[k], a);
        b = coefs[1].im.mul_add(r1[k], b);
        a = coefs[2].re.mul_add(r2[k], a);
        b = coefs[2].im.mul_add(r2[k], b);
        a = coefs[3].re.mul_add(r3[k], a);
        b = coefs[3].im.mul_add(r3[k], b);
        out_re[k] = a;
        out_im[k] = b;
    }
}

/// Φ·(re + i·im) for every row of `rows`, written to `out`.
pub fn mul_rows(rows: RowBlock<'_>, re: &[f64], im: &[f64], out: &mut [Complex64]) {
    debug_assert_eq!(out.len(), rows.rows());
    let blocks = rows.rows() / BLOCK;
    for q in 0..blocks {
        let i = q * BLOCK;
        let got = dot2_block([rows.row(i), rows.row(i + 1), rows.row(i + 2), rows.row(i + 3)], re, im);
        out[i..i + BLOCK].copy_from_slice(&got);
    }
    for i in blocks * BLOCK..rows.rows() {
        let (a, b) = dot2(rows.row(i), re, im);
        out[i] = Complex64::new(a, b);
    }
}

/// (out_re + i·out_im) += Φᵀ·u.
pub fn mul_rows_transpose(rows: RowBlock<'_>, u: &[Complex64], out_re: &mut [f64], out_im: &mut [f64]) {
    debug_assert_eq!(u.len(), rows.rows());
    let blocks = rows.rows() / BLOCK;
    for q in 0..blocks {
        let i = q * BLOCK;
        axpy2_block(
            [rows.row(i), rows.row(i + 1), rows.row(i + 2), rows.row(i + 3)],
            [u[i], u[i + 1], u[i + 2], u[i + 3]],
            out_re,
            out_im,
        );
    }
    for i in blocks * BLOCK..rows.rows() {
        axpy2(rows.row(i), u[i], out_re, out_im);
    }
}

/// Both of the above in one sweep over the rows: `out` = Φ·v and
/// (acc_re + i·acc_im) += Φᵀ·out.
pub fn mul_rows_gram(rows: RowBlock<'_>, re: &[f64], im: &[f64], out: &mut [Complex64], acc_re: &mut [f64], acc_im: &mut [f64]) {
    debug_assert_eq!(out.len(), rows.rows());
    let blocks = rows.rows() / BLOCK;
    for q in 0..blocks {
        let i = q * BLOCK;
        let block = [rows.row(i), rows.row(i + 1), rows.row(i + 2), rows.row(i + 3)];
        let got = dot2_block(block, re, im);
        axpy2_block(block, got, acc_re, acc_im);
        out[i..i + BLOCK].copy_from_slice(&got);
    }
    for i in blocks * BLOCK..rows.rows() {
        let (a, b) = dot2(rows.row(i), re, im);
        out[i] = Complex64::new(a, b);
        axpy2(rows.row(i), out[i], acc_re, acc_im);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot2_matches_naive() {
        let n = 37;
        let row: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
        let re: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
        let im: Vec<f64> = (0..n).map(|k| 1.0 - k as f64 * 0.05).collect();
        let (a, b) = dot2(&row, &re, &im);
        let na: f64 = (0..n).map(|k| row[k] * re[k]).sum();
        let nb: f64 = (0..n).map(|k| row[k] * im[k]).sum();
        assert!((a - na).abs() < 1e-12 && (b - nb).abs() < 1e-12);
    }

    #[test]
    fn blocked_kernels_match_row_kernels() {
        let (r, n) = (7, 29);
        let data: Vec<f64> = (0..r * n).map(|k| (k as f64 * 0.13).cos()).collect();
        let rows = RowBlock::new(&data, n);
        let re: Vec<f64> = (0..n).map(|k| k as f64 * 0.2 - 1.0).collect();
        let im: Vec<f64> = (0..n).map(|k| (k as f64).sqrt()).collect();
        let mut out = vec![Complex64::default(); r];
        mul_rows(rows, &re, &im, &mut out);
        let (mut acc_re, mut acc_im) = (vec![0.0; n], vec![0.0; n]);
        mul_rows_transpose(rows, &out, &mut acc_re, &mut acc_im);
        let mut out2 = vec![Complex64::default(); r];
        let (mut g_re, mut g_im) = (vec![0.0; n], vec![0.0; n]);
        mul_rows_gram(rows, &re, &im, &mut out2, &mut g_re, &mut g_im);
        for i in 0..r {
            let (a, b) = dot2(rows.row(i), &re, &im);
            assert!((out[i] - Complex64::new(a, b)).norm() < 1e-12);
            assert!((out2[i] - out[i]).norm() < 1e-12);
        }
        for k in 0..n {
            let (a, b) = (0..r).fold((0.0, 0.0), |(a, b), i| (a + rows.row(i)[k] * out[i].re, b + rows.row(i)[k] * out[i].im));
            assert!((acc_re[k] - a).abs() < 1e-10 && (acc_im[k] - b).abs() < 1e-10);
            assert!((g_re[k] - a).abs() < 1e-10 && (g_im[k] - b).abs() < 1e-10);
        }
    }

    #[test]
    fn prefix_rows() {
        let data: Vec<f64> = (0..12).map(f64::from).collect();
        let block = RowBlock::new(&data, 4);
        assert_eq!(block.rows(), 3);
        assert_eq!(block.prefix(2).rows(), 2);
        assert_eq!(block.row(2), &[8.0, 9.0, 10.0, 11.0]);
    }
}
