//! Textbook LOESS: for each target pixel, solve the weighted normal
//! equations of a local polynomial with a dense LU factorization.

use nalgebra::{DMatrix, DVector};

pub fn dense_loess(rows: usize, cols: usize, y: &[f64], degree: u8, span: f64) -> Vec<f64> {
    let n = rows * cols;
    let k = ((span * n as f64).ceil() as usize).clamp(1, n);
    let basis = |dr: f64, dc: f64| -> Vec<f64> {
        match degree {
            0 => vec![1.0],
            1 => vec![1.0, dr, dc],
            _ => vec![1.0, dr, dc, dr * dr, dr * dc, dc * dc],
        }
    };
    let p = basis(0.0, 0.0).len();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let (tr, tc) = ((t / cols) as f64, (t % cols) as f64);
        let d: Vec<f64> = (0..n)
            .map(|j| ((j / cols) as f64 - tr).hypot((j % cols) as f64 - tc))
            .collect();
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        let h = sorted[k - 1];
        let mut x = DMatrix::zeros(n, p);
        let mut w = DVector::zeros(n);
        for j in 0..n {
            let b = basis((j / cols) as f64 - tr, (j % cols) as f64 - tc);
            for (a, v) in b.into_iter().enumerate() {
                x[(j, a)] = v;
            }
            w[j] = if h == 0.0 {
                f64::from(d[j] == 0.0)
            } else if d[j] < h {
                (1.0 - (d[j] / h).powi(3)).powi(3)
            } else {
                0.0
            };
        }
        let xtw = x.transpose() * DMatrix::from_diagonal(&w);
        let beta = (&xtw * &x)
            .lu()
            .solve(&(&xtw * DVector::from_column_slice(y)))
            .expect("full rank");
        out.push(beta[0]);
    }
    out
}
