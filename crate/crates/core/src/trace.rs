//! Trigonometric trace basis `{1, cos(j t), sin(j t)}` on the domain-curve
//! parametrization, with Gram-corrected projection under the surface measure.
//! Traces expanded here feed every Dirichlet-to-Neumann pairing.

use crate::basis::Field;
use crate::geometry::BoundaryGrid;
use crate::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub struct TraceBasis {
    /// Maximum trigonometric order `J`; dimension is `2J + 1`.
    pub order: usize,
    /// Nodal values of every basis function: `m x (2J+1)`.
    pub nodal: DMatrix<f64>,
    grid_weights: Vec<f64>,
    gram: Cholesky<f64, Dyn>,
}

impl TraceBasis {
    pub fn new(grid: &BoundaryGrid, order: usize) -> Result<Self> {
        let dim = 2 * order + 1;
        if grid.m < 2 * dim {
            return Err(Error::Config(format!(
                "trace order {order} needs at least {} boundary nodes, grid has {}",
                2 * dim,
                grid.m
            )));
        }
        let mut nodal = DMatrix::zeros(grid.m, dim);
        for (i, &t) in grid.params.iter().enumerate() {
            nodal[(i, 0)] = 1.0;
            for j in 1..=order {
                nodal[(i, 2 * j - 1)] = (j as f64 * t).cos();
                nodal[(i, 2 * j)] = (j as f64 * t).sin();
            }
        }
        // Gram matrix under the surface measure: E^T diag(w) E
        let mut weighted = nodal.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= grid.weights[i];
        }
        let gram = nodal.transpose() * &weighted;
        let gram = Cholesky::new(gram)
            .ok_or_else(|| Error::Config("trace Gram matrix not positive definite".into()))?;
        Ok(TraceBasis {
            order,
            nodal,
            grid_weights: grid.weights.clone(),
            gram,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.order + 1
    }

    /// Expansion coefficients of nodal boundary values (least-squares under
    /// the surface measure).
    pub fn project_values(&self, values: &[f64]) -> DVector<f64> {
        let weighted: DVector<f64> = DVector::from_iterator(
            values.len(),
            values
                .iter()
                .zip(&self.grid_weights)
                .map(|(v, w)| v * w),
        );
        let rhs = self.nodal.transpose() * weighted;
        self.gram.solve(&rhs)
    }

    /// Expansion coefficients of a field's trace on the grid.
    pub fn project_field(&self, grid: &BoundaryGrid, field: &dyn Field) -> DVector<f64> {
        let values: Vec<f64> = grid.nodes.iter().map(|&p| field.value(p)).collect();
        self.project_values(&values)
    }

    /// Evaluate an expansion at parameter `t`.
    pub fn eval(&self, coeffs: &DVector<f64>, t: f64) -> f64 {
        let mut v = coeffs[0];
        for j in 1..=self.order {
            v += coeffs[2 * j - 1] * (j as f64 * t).cos() + coeffs[2 * j] * (j as f64 * t).sin();
        }
        v
    }

    /// Nodal values of an expansion on the grid.
    pub fn nodal_values(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.nodal * coeffs
    }
}
