//! The covering recursion on a hand-made two-pair problem.

use query_design::afptas::{backtrack, DpProblem};

fn main() -> query_design::Result<()> {
    // two models, rounded weights per pair, cap of 10 on each pair
    let problem = DpProblem::new(vec![1.0, 2.5], vec![vec![2, 1], vec![1, 5]], 10)?;
    let table = problem.solve_dense(1 << 20)?;
    for target in [[4, 4], [10, 2], [3, 10]] {
        let plan = backtrack(&table, &target)?;
        println!(
            "reach {target:?}: cost {:?} with plan {plan}",
            table.value(&target).unwrap()
        );
    }
    Ok(())
}
