//! Independent oracle for the queue's stationary distribution: set up the
//! global balance equations plus normalization as a dense linear system and
//! solve it by Gaussian elimination with partial pivoting. No geometric
//! series, no closed forms, so it cross-checks the analytics module from a
//! different direction.

/// Stationary probabilities of the birth-death chain with constant birth
/// rate `lambda` on states 0..capacity-1 and death rate `mu` on states
/// 1..capacity. Rows are the balance equations of states 0..capacity-1;
/// the last row is the normalization constraint.
pub fn solve_balance_system(lambda: f64, mu: f64, capacity: usize) -> Vec<f64> {
    let size = capacity + 1;
    let mut m = vec![vec![0.0; size + 1]; size];
    if capacity >= 1 {
        m[0][0] = -lambda;
        m[0][1] = mu;
        for state in 1..capacity {
            m[state][state - 1] = lambda;
            m[state][state] = -(lambda + mu);
            m[state][state + 1] = mu;
        }
    }
    m[capacity].fill(1.0);

    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("column range is nonempty");
        m.swap(col, pivot);
        assert!(m[col][col] != 0.0, "balance system is singular");
        let (upper, lower) = m.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for row in lower.iter_mut() {
            let factor = row[col] / pivot_row[col];
            if factor == 0.0 {
                continue;
            }
            for (cell, pivot_cell) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *cell -= factor * pivot_cell;
            }
        }
    }

    let mut x = vec![0.0; size];
    for row in (0..size).rev() {
        let mut acc = m[row][size];
        for k in row + 1..size {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}
