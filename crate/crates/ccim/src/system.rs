//! Global assembly and the end-to-end solve: classify every grid point, run
//! the local coupling at interface points, stack the rows into a sparse
//! system, and solve it with preconditioned BiCGSTAB.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::coupling::{assemble_pde_row, discretize_point, PointDiscretization};
use crate::mesh::{classify, Grid, PointClass, SignField};
use crate::problems::Problem;
use crate::sparse::{bicgstab, ilu0, CsrMatrix, SolveReport};
use crate::Result;

/// The assembled global system plus everything retained for postprocessing.
pub struct Assembly {
    pub grid: Grid,
    pub signs: SignField,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Interface-point discretizations in grid (row) order.
    pub interface: Vec<PointDiscretization>,
    /// How often each cross-derivative scheme was chosen (three entries per
    /// interface point, one per axis pair).
    pub scheme_counts: BTreeMap<&'static str, usize>,
    pub assemble_seconds: f64,
}

/// A solved problem: the assembly, the nodal solution, and the solver report.
pub struct Solution {
    pub assembly: Assembly,
    pub u: Vec<f64>,
    pub report: SolveReport,
}

pub fn assemble(problem: &Problem, n: usize) -> Result<Assembly> {
    let start = Instant::now();
    let grid = Grid::new(n)?;
    let signs = SignField::build(&grid, problem.surface.as_ref());
    let np = grid.num_points();
    type Row = (Vec<(usize, f64)>, f64, Option<PointDiscretization>);
    let rows: Result<Vec<Row>> = (0..np)
        .into_par_iter()
        .map(|lin| {
            let m = grid.multi(lin);
            match classify(&grid, &signs, m) {
                PointClass::Interface => {
                    let disc = discretize_point(
                        &grid,
                        &signs,
                        problem.surface.as_ref(),
                        &problem.data,
                        m,
                    )?;
                    let (cols, b) = assemble_pde_row(
                        &grid,
                        &signs,
                        &problem.data,
                        &problem.boundary,
                        m,
                        Some(&disc),
                    );
                    Ok((cols, b, Some(disc)))
                }
                _ => {
                    let (cols, b) = assemble_pde_row(
                        &grid,
                        &signs,
                        &problem.data,
                        &problem.boundary,
                        m,
                        None,
                    );
                    Ok((cols, b, None))
                }
            }
        })
        .collect();
    let rows = rows?;

    let mut row_entries = Vec::with_capacity(np);
    let mut rhs = Vec::with_capacity(np);
    let mut interface = Vec::new();
    let mut scheme_counts = BTreeMap::new();
    for (cols, b, disc) in rows {
        row_entries.push(cols);
        rhs.push(b);
        if let Some(d) = disc {
            for kind in d.schemes {
                *scheme_counts.entry(kind.label()).or_insert(0) += 1;
            }
            interface.push(d);
        }
    }
    let matrix = CsrMatrix::from_rows(&row_entries);
    Ok(Assembly {
        grid,
        signs,
        matrix,
        rhs,
        interface,
        scheme_counts,
        assemble_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn solve_problem(problem: &Problem, n: usize, tol: f64, max_iter: usize) -> Result<Solution> {
    let assembly = assemble(problem, n)?;
    let pre = ilu0(&assembly.matrix);
    let (u, report) = bicgstab(&assembly.matrix, &assembly.rhs, tol, max_iter, Some(&pre))?;
    Ok(Solution {
        assembly,
        u,
        report,
    })
}
