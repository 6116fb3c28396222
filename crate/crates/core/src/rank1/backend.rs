use nalgebra::DMatrix;

/// Dense product strategy used when composing low-rank factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MatmulBackend {
    /// Column-blocked triple loop.
    #[default]
    Naive,
    /// Strassen recursion down to `leaf`-sized blocks, then the naive kernel.
    Strassen { leaf: usize },
}

const BLOCK: usize = 64;

impl MatmulBackend {
    pub fn strassen() -> Self {
        MatmulBackend::Strassen { leaf: 64 }
    }

    /// Exponent ω used in work estimates.
    pub fn omega(&self) -> f64 {
        match self {
            MatmulBackend::Naive => 3.0,
            MatmulBackend::Strassen { .. } => 7f64.log2(),
        }
    }

    /// a · b
    pub fn matmul(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
        match *self {
            MatmulBackend::Naive => naive(a, b),
            MatmulBackend::Strassen { leaf } => strassen(a, b, leaf.max(1)),
        }
    }

    /// aᵀ · b
    pub fn matmul_tn(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), b.nrows(), "inner dimensions differ");
        match *self {
            MatmulBackend::Naive => naive_tn(a, b),
            MatmulBackend::Strassen { leaf } => strassen(&a.transpose(), b, leaf.max(1)),
        }
    }
}

fn naive(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = DMatrix::zeros(m, n);
    let (av, bv) = (a.as_slice(), b.as_slice());
    let cv = c.as_mut_slice();
    for k0 in (0..k).step_by(BLOCK) {
        let k1 = (k0 + BLOCK).min(k);
        for j in 0..n {
            let cj = &mut cv[j * m..(j + 1) * m];
            for p in k0..k1 {
                let bpj = bv[j * k + p];
                if bpj == 0.0 {
                    continue;
                }
                let ap = &av[p * m..(p + 1) * m];
                for (ci, ai) in cj.iter_mut().zip(ap) {
                    *ci += ai * bpj;
                }
            }
        }
    }
    c
}

fn naive_tn(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, m, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = DMatrix::zeros(m, n);
    let (av, bv) = (a.as_slice(), b.as_slice());
    for j in 0..n {
        let bj = &bv[j * k..(j + 1) * k];
        for i in 0..m {
            let ai = &av[i * k..(i + 1) * k];
            c[(i, j)] = ai.iter().zip(bj).map(|(x, y)| x * y).sum();
        }
    }
    c
}

fn padded(m: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    if m.nrows() == rows && m.ncols() == cols {
        return m.clone();
    }
    let mut p = DMatrix::zeros(rows, cols);
    p.view_mut((0, 0), m.shape()).copy_from(m);
    p
}

fn strassen(a: &DMatrix<f64>, b: &DMatrix<f64>, leaf: usize) -> DMatrix<f64> {
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    if m.min(k).min(n) <= leaf {
        return naive(a, b);
    }
    let (m2, k2, n2) = (m.div_ceil(2), k.div_ceil(2), n.div_ceil(2));
    let a = padded(a, 2 * m2, 2 * k2);
    let b = padded(b, 2 * k2, 2 * n2);
    let q = |x: &DMatrix<f64>, r: usize, c: usize, h: usize, w: usize| x.view((r * h, c * w), (h, w)).into_owned();
    let (a11, a12, a21, a22) = (q(&a, 0, 0, m2, k2), q(&a, 0, 1, m2, k2), q(&a, 1, 0, m2, k2), q(&a, 1, 1, m2, k2));
    let (b11, b12, b21, b22) = (q(&b, 0, 0, k2, n2), q(&b, 0, 1, k2, n2), q(&b, 1, 0, k2, n2), q(&b, 1, 1, k2, n2));
    let m1 = strassen(&(&a11 + &a22), &(&b11 + &b22), leaf);
    let m2_ = strassen(&(&a21 + &a22), &b11, leaf);
    let m3 = strassen(&a11, &(&b12 - &b22), leaf);
    let m4 = strassen(&a22, &(&b21 - &b11), leaf);
    let m5 = strassen(&(&a11 + &a12), &b22, leaf);
    let m6 = strassen(&(&a21 - &a11), &(&b11 + &b12), leaf);
    let m7 = strassen(&(&a12 - &a22), &(&b21 + &b22), leaf);
    let mut c = DMatrix::zeros(2 * m2, 2 * n2);
    c.view_mut((0, 0), (m2, n2)).copy_from(&(&m1 + &m4 - &m5 + &m7));
    c.view_mut((0, n2), (m2, n2)).copy_from(&(&m3 + &m5));
    c.view_mut((m2, 0), (m2, n2)).copy_from(&(&m2_ + &m4));
    c.view_mut((m2, n2), (m2, n2)).copy_from(&(&m1 - &m2_ + &m3 + &m6));
    c.view((0, 0), (m, n)).into_owned()
}
