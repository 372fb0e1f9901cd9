//! Linear systems `x = b + P x` arising from absorbing Markov chains.

use crate::graph::tarjan_scc;
use crate::{Error, Scalar};

/// Solves `x = rhs + P x` where `rows[i]` lists `(j, P[i][j])` over the
/// unknowns. Entries towards states with known value zero are simply left
/// out. `I - P` must be nonsingular (every unknown leaves the system with
/// positive probability).
///
/// Works component by component in reverse topological order so that
/// acyclic parts cost one pass and only cyclic blocks pay for elimination.
pub fn solve_transient<T: Scalar>(rows: &[Vec<(usize, T)>], rhs: &[T]) -> Result<Vec<T>, Error> {
    let n = rows.len();
    let adj: Vec<Vec<usize>> = rows.iter().map(|r| r.iter().map(|(j, _)| *j).collect()).collect();
    let comps = tarjan_scc(&adj);
    let mut x: Vec<Option<T>> = vec![None; n];
    let mut pos = vec![usize::MAX; n];
    for comp in comps {
        if comp.len() == 1 {
            let i = comp[0];
            let mut acc = rhs[i].clone();
            let mut self_p = T::zero();
            for (j, p) in &rows[i] {
                if *j == i {
                    self_p += p;
                } else {
                    let xj = x[*j].as_ref().ok_or_else(|| Error::Internal("scc order".into()))?;
                    acc += p.clone() * xj;
                }
            }
            let denom = T::one() - self_p;
            if denom.is_zero() {
                return Err(Error::Internal(format!("singular system at unknown {i}")));
            }
            x[i] = Some(acc / denom);
            continue;
        }
        for (k, &i) in comp.iter().enumerate() {
            pos[i] = k;
        }
        let size = comp.len();
        // Dense block: (I - P_cc) y = rhs + P_out x_out.
        let mut a: Vec<Vec<T>> = vec![vec![T::zero(); size + 1]; size];
        for (k, &i) in comp.iter().enumerate() {
            a[k][k] = T::one();
            let mut b = rhs[i].clone();
            for (j, p) in &rows[i] {
                if let Some(xj) = &x[*j] {
                    b += p.clone() * xj;
                } else if pos[*j] != usize::MAX && comp.binary_search(j).is_ok() {
                    a[k][pos[*j]] -= p;
                } else {
                    return Err(Error::Internal("scc order".into()));
                }
            }
            a[k][size] = b;
        }
        let y = gauss(a)?;
        for (k, &i) in comp.iter().enumerate() {
            x[i] = Some(y[k].clone());
        }
        for &i in &comp {
            pos[i] = usize::MAX;
        }
    }
    Ok(x.into_iter().map(|v| v.expect("all unknowns solved")).collect())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss<T: Scalar>(mut a: Vec<Vec<T>>) -> Result<Vec<T>, Error> {
    let n = a.len();
    for col in 0..n {
        let mut piv = None;
        let mut best = T::zero();
        for (r, row) in a.iter().enumerate().skip(col) {
            let v = row[col].abs_value();
            if !v.is_zero() && (piv.is_none() || v > best) {
                best = v;
                piv = Some(r);
                if T::EXACT {
                    break;
                }
            }
        }
        let piv = piv.ok_or_else(|| Error::Internal("singular linear system".into()))?;
        a.swap(col, piv);
        let inv = T::one() / a[col][col].clone();
        for k in col..=n {
            let v = a[col][k].clone() * &inv;
            a[col][k] = v;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for k in col..=n {
                let delta = f.clone() * &a[col][k];
                a[r][k] -= delta;
            }
        }
    }
    Ok(a.into_iter().map(|mut row| row.pop().expect("augmented")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, Rational};

    #[test]
    fn solves_cycle_exactly() {
        // x0 = 1/2 x1 + 1/4 ; x1 = 1/2 x0
        let rows = vec![vec![(1, rat(1, 2))], vec![(0, rat(1, 2))]];
        let rhs = vec![rat(1, 4), rat(0, 1)];
        let x = solve_transient::<Rational>(&rows, &rhs).unwrap();
        assert_eq!(x, vec![rat(1, 3), rat(1, 6)]);
    }

    #[test]
    fn solves_chain_with_self_loop() {
        let rows = vec![vec![(0, rat(1, 2)), (1, rat(1, 4))], vec![]];
        let rhs = vec![rat(0, 1), rat(1, 1)];
        let x = solve_transient::<Rational>(&rows, &rhs).unwrap();
        assert_eq!(x, vec![rat(1, 2), rat(1, 1)]);
        let xf = solve_transient::<f64>(&[vec![(0, 0.5), (1, 0.25)], vec![]], &[0.0, 1.0]).unwrap();
        assert!((xf[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_detected() {
        let rows = vec![vec![(0, rat(1, 1))]];
        assert!(solve_transient::<Rational>(&rows, &[rat(0, 1)]).is_err());
        let rows = vec![vec![(1, rat(1, 1))], vec![(0, rat(1, 1))]];
        assert!(solve_transient::<Rational>(&rows, &[rat(0, 1), rat(0, 1)]).is_err());
    }
}
