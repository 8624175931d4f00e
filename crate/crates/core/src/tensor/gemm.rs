//! Thin bounds-checked wrapper over `matrixmultiply::dgemm`.

/// Row and column stride of a strided matrix view, in elements.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Strides {
    pub rs: usize,
    pub cs: usize,
}

impl Strides {
    /// Contiguous row-major matrix with `cols` columns.
    pub const fn row_major(cols: usize) -> Self {
        Strides { rs: cols, cs: 1 }
    }

    /// Transposed view of a row-major matrix with `cols` columns.
    pub const fn transposed(cols: usize) -> Self {
        Strides { rs: 1, cs: cols }
    }

    fn last_index(self, rows: usize, cols: usize) -> usize {
        (rows - 1) * self.rs + (cols - 1) * self.cs
    }
}

/// `c[m×n] = a[m×k] · b[k×n] + beta · c`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    sa: Strides,
    b: &[f64],
    sb: Strides,
    beta: f64,
    c: &mut [f64],
    sc: Strides,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(sc.last_index(m, n) < c.len(), "gemm: output view out of bounds");
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                c[i * sc.rs + j * sc.cs] *= beta;
            }
        }
        return;
    }
    assert!(sa.last_index(m, k) < a.len(), "gemm: lhs view out of bounds");
    assert!(sb.last_index(k, n) < b.len(), "gemm: rhs view out of bounds");
    // SAFETY: every element addressed through the three views lies inside
    // its slice (checked above), and `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.rs as isize,
            sa.cs as isize,
            b.as_ptr(),
            sb.rs as isize,
            sb.cs as isize,
            beta,
            c.as_mut_ptr(),
            sc.rs as isize,
            sc.cs as isize,
        );
    }
}
