//! Floating-point scalar abstraction shared by the model, loss and selection code.
//!
//! Training runs in `f32`; gradient and recurrence checks run the same code in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Strided read-only matrix view: element `(i, j)` lives at `data[i * row_stride + j * col_stride]`.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a, T> MatRef<'a, T> {
    /// Row-major contiguous view.
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        MatRef { data, rows, cols, row_stride: cols, col_stride: 1 }
    }

    pub fn t(self) -> Self {
        MatRef {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }

    fn max_offset(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride
        }
    }
}

/// Row-major contiguous mutable matrix.
#[derive(Debug)]
pub struct MatMut<'a, T> {
    pub data: &'a mut [T],
    pub rows: usize,
    pub cols: usize,
}

impl<'a, T> MatMut<'a, T> {
    pub fn new(data: &'a mut [T], rows: usize, cols: usize) -> Self {
        MatMut { data, rows, cols }
    }
}

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Width tag used in diagnostics.
    const NAME: &'static str;
    /// Storage width in bits (32 or 64).
    const BITS: u32;

    fn to_raw_bits(self) -> u64;
    fn from_raw_bits(bits: u64) -> Self;

    /// `c ← alpha·a·b + beta·c`.
    ///
    /// Panics when the views are inconsistent with each other or with their buffers.
    fn gemm(alpha: Self, a: MatRef<'_, Self>, b: MatRef<'_, Self>, beta: Self, c: MatMut<'_, Self>);

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in scalar type")
    }
}

fn check_gemm<T>(a: &MatRef<'_, T>, b: &MatRef<'_, T>, c: &MatMut<'_, T>) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!(a.rows, c.rows, "gemm output rows");
    assert_eq!(b.cols, c.cols, "gemm output cols");
    assert!(a.rows * a.cols == 0 || a.max_offset() < a.data.len(), "gemm lhs out of bounds");
    assert!(b.rows * b.cols == 0 || b.max_offset() < b.data.len(), "gemm rhs out of bounds");
    assert!(c.rows * c.cols <= c.data.len(), "gemm output out of bounds");
}

macro_rules! impl_scalar {
    ($t:ty, $name:literal, $bits:literal, $raw:ty, $kernel:path) => {
        impl Scalar for $t {
            const NAME: &'static str = $name;
            const BITS: u32 = $bits;

            fn to_raw_bits(self) -> u64 {
                self.to_bits() as u64
            }

            fn from_raw_bits(bits: u64) -> Self {
                <$t>::from_bits(bits as $raw)
            }

            fn gemm(alpha: Self, a: MatRef<'_, Self>, b: MatRef<'_, Self>, beta: Self, c: MatMut<'_, Self>) {
                check_gemm(&a, &b, &c);
                if c.rows == 0 || c.cols == 0 {
                    return;
                }
                if a.cols == 0 {
                    for v in c.data[..c.rows * c.cols].iter_mut() {
                        *v *= beta;
                    }
                    return;
                }
                // SAFETY: check_gemm bounds every strided access inside its buffer,
                // and `c` is an exclusive contiguous borrow.
                unsafe {
                    $kernel(
                        a.rows,
                        a.cols,
                        b.cols,
                        alpha,
                        a.data.as_ptr(),
                        a.row_stride as isize,
                        a.col_stride as isize,
                        b.data.as_ptr(),
                        b.row_stride as isize,
                        b.col_stride as isize,
                        beta,
                        c.data.as_mut_ptr(),
                        c.cols as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, "f32", 32, u32, matrixmultiply::sgemm);
impl_scalar!(f64, "f64", 64, u64, matrixmultiply::dgemm);
