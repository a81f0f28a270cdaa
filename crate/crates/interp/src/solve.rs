use crate::{InterpError, Result};

/// Solves `A X = B` for a dense square `A` (row-major, `n*n`) and `m`
/// right-hand sides (`B` is `n*m`, row-major), by LU factorization with
/// partial pivoting. `A` and `B` are consumed as scratch space.
///
/// The thin-plate system is symmetric but indefinite with a zero trailing
/// block, so an unpivoted symmetric factorization has no usable pivots;
/// row-pivoted LU handles it at the sizes this crate sees (a few hundred).
pub fn solve_lu(mut a: Vec<f64>, n: usize, mut b: Vec<f64>, m: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * m);
    let scale = a
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        // pivot
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best <= scale * 1e-13 {
            return Err(InterpError::Singular(format!(
                "pivot {best:.3e} at column {col} (matrix scale {scale:.3e})"
            )));
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            for j in 0..m {
                b.swap(col * m + j, piv * m + j);
            }
        }
        let inv = 1.0 / a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            a[row * n + col] = 0.0;
            for j in col + 1..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            for j in 0..m {
                b[row * m + j] -= f * b[col * m + j];
            }
        }
    }
    // back substitution
    for col in (0..n).rev() {
        let inv = 1.0 / a[col * n + col];
        for j in 0..m {
            let mut acc = b[col * m + j];
            for k in col + 1..n {
                acc -= a[col * n + k] * b[k * m + j];
            }
            b[col * m + j] = acc * inv;
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // A = [[2,1],[1,3]], b = [5, 10] -> x = [1, 3]
        let a = vec![2.0, 1.0, 1.0, 3.0];
        let b = vec![5.0, 10.0];
        let x = solve_lu(a, 2, b, 1).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn detects_singularity() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(solve_lu(a, 2, vec![1.0, 2.0], 1).is_err());
    }

    #[test]
    fn saddle_point_system_with_zero_diagonal() {
        // [[0,1],[1,0]] x = [3, 7] -> x = [7, 3]; requires pivoting
        let a = vec![0.0, 1.0, 1.0, 0.0];
        let x = solve_lu(a, 2, vec![3.0, 7.0], 1).unwrap();
        assert_eq!(x, vec![7.0, 3.0]);
    }
}
