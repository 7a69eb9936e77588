//! Matching cluster ids to classes with the Hungarian method.

use tempoproj::evaluation::{clustering_accuracy, hungarian};

fn main() -> tempoproj::Result<()> {
    let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
    let (assignment, total) = hungarian(&cost)?;
    println!("assignment {assignment:?}, cost {total}");

    // the clustering is right up to a renaming of the ids
    let pred = [2, 2, 0, 0, 1, 1, 1];
    let truth = [0, 0, 1, 1, 2, 2, 0];
    println!("accuracy {:.3}", clustering_accuracy(&pred, &truth)?);
    Ok(())
}
