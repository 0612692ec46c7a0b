//! Compressed sparse row matrices built by accumulating triplets.

use std::io::{self, Write};

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Unsorted `(row, col, value)` entries; duplicates are summed on finalization.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sums duplicates in insertion order and drops exact zeros.
    pub fn build(mut self, nrows: usize, ncols: usize) -> SparseMatrix {
        // Stable sort keeps the summation order of duplicates deterministic.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut iter = self.entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            assert!(r < nrows && c < ncols, "entry ({r}, {c}) outside {nrows}x{ncols}");
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if (r2, c2) != (r, c) {
                    break;
                }
                v += v2;
                iter.next();
            }
            if v != 0.0 {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix { nrows, ncols, row_ptr, col_idx, values }
    }
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new().build(nrows, ncols)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (r, self.col_idx[p], self.values[p]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[span.clone()].binary_search(&col) {
            Ok(p) => self.values[span.start + p],
            Err(_) => 0.0,
        }
    }

    /// `y += scale * A x`
    pub fn mul_add(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            *yr += scale * acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_add(x, 1.0, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::new();
        for (r, c, v) in self.iter() {
            b.push(c, r, v);
        }
        b.build(self.ncols, self.nrows)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T| <= rel_tol * max |A|`
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let tol = rel_tol * self.max_abs();
        self.iter().all(|(r, c, v)| (v - self.get(c, r)).abs() <= tol)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            d[(r, c)] = v;
        }
        d
    }

    /// Plain-text dump, one `row col value` line per stored entry.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (r, c, v) in self.iter() {
            writeln!(out, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}
