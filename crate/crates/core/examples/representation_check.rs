//! Validating hand-written group representations.

use nalgebra::DMatrix;
use symlab::group_rep::{validate_representation, GroupRepresentation};

fn main() -> symlab::Result<()> {
    let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let c2 = GroupRepresentation::from_matrices(vec![DMatrix::identity(2, 2), swap])?;
    println!("swap group: {}", validate_representation(&c2)?);

    // Same Cayley table, but the second matrix is a scaling.
    let bad = GroupRepresentation::from_parts(
        vec![DMatrix::identity(2, 2), DMatrix::from_diagonal(&nalgebra::dvector![2.0, 1.0])],
        vec![vec![0, 1], vec![1, 0]],
    )?;
    print!("scaled element:\n{}", validate_representation(&bad)?);
    Ok(())
}
