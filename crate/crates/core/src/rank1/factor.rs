use nalgebra::{DMatrix, DVector};

use super::backend::MatmulBackend;
use crate::error::{Error, Result};

/// A real number stored as mantissa · 2^exponent so that long products of
/// step scalars neither overflow nor underflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scale {
    mant: f64,
    exp: i64,
}

fn frexp(x: f64) -> (f64, i64) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let (x, adjust) = if x.abs() < f64::MIN_POSITIVE {
        (x * 2f64.powi(64), -64)
    } else {
        (x, 0)
    };
    let bits = x.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i64 - 1022;
    let m = f64::from_bits((bits & !(0x7ff << 52)) | (1022 << 52));
    (m, e + adjust)
}

fn ldexp(m: f64, e: i64) -> f64 {
    let e = e.clamp(-2200, 2200) as i32;
    let half = e / 2;
    m * 2f64.powi(half) * 2f64.powi(e - half)
}

impl Scale {
    pub const ONE: Scale = Scale { mant: 0.5, exp: 1 };

    pub fn new(x: f64) -> Self {
        let (mant, exp) = frexp(x);
        Self { mant, exp }
    }

    pub fn mul(self, other: Scale) -> Scale {
        let (m, e) = frexp(self.mant * other.mant);
        Scale {
            mant: m,
            exp: e + self.exp + other.exp,
        }
    }

    pub fn value(self) -> f64 {
        ldexp(self.mant, self.exp)
    }

    pub fn is_zero(self) -> bool {
        self.mant == 0.0
    }

    pub fn signum(self) -> f64 {
        if self.mant == 0.0 {
            0.0
        } else {
            self.mant.signum()
        }
    }

    /// ln |value|, finite even when the value is not representable.
    pub fn ln_abs(self) -> f64 {
        self.mant.abs().ln() + self.exp as f64 * std::f64::consts::LN_2
    }
}

/// The matrix I − A Bᵀ with A, B of shape d × r.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankFactor {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LowRankFactor {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(Error::DimensionMismatch {
                expected: a.ncols(),
                got: b.ncols(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            a: DMatrix::zeros(d, 0),
            b: DMatrix::zeros(d, 0),
        }
    }

    /// I − u vᵀ
    pub fn rank_one(u: &DVector<f64>, v: &DVector<f64>) -> Self {
        Self {
            a: DMatrix::from_column_slice(u.len(), 1, u.as_slice()),
            b: DMatrix::from_column_slice(v.len(), 1, v.as_slice()),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    /// (I − A Bᵀ) x
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.rank() == 0 {
            return x.clone();
        }
        let coef = self.b.tr_mul(x);
        let mut out = x.clone();
        out.gemv(-1.0, &self.a, &coef, 1.0);
        out
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::identity(d, d) - &self.a * self.b.transpose()
    }

    /// Factor of the product (I − A₀B₀ᵀ)(I − A₁B₁ᵀ):
    /// A = (A₀ | A₁ − A₀B₀ᵀA₁), B = (B₀ | B₁).
    pub fn compose(f0: &LowRankFactor, f1: &LowRankFactor, backend: MatmulBackend) -> Result<LowRankFactor> {
        if f0.dim() != f1.dim() {
            return Err(Error::DimensionMismatch {
                expected: f0.dim(),
                got: f1.dim(),
            });
        }
        let (d, r0, r1) = (f0.dim(), f0.rank(), f1.rank());
        let mut a = DMatrix::zeros(d, r0 + r1);
        let mut b = DMatrix::zeros(d, r0 + r1);
        a.columns_mut(0, r0).copy_from(&f0.a);
        b.columns_mut(0, r0).copy_from(&f0.b);
        b.columns_mut(r0, r1).copy_from(&f1.b);
        let mut tail = f1.a.clone();
        if r0 > 0 && r1 > 0 {
            let inner = backend.matmul_tn(&f0.b, &f1.a);
            tail -= backend.matmul(&f0.a, &inner);
        }
        a.columns_mut(r0, r1).copy_from(&tail);
        Ok(LowRankFactor { a, b })
    }

    /// Re-expresses a factor of rank above d as A = I − M, B = I (rank d).
    pub fn compressed(self) -> LowRankFactor {
        let d = self.dim();
        if self.rank() <= d {
            return self;
        }
        let a = &self.a * self.b.transpose();
        LowRankFactor {
            a,
            b: DMatrix::identity(d, d),
        }
    }
}
