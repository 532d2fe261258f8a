//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13 (Higham, 2005).

use nalgebra::DMatrix;

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `U` (odd part) and `V` (even part) of a low-order Padé numerator.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut power = DMatrix::identity(n, n);
    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for k in (0..b.len()).step_by(2) {
        v += &power * b[k];
        u += &power * b[k + 1];
        power = &power * &a2;
    }
    (a * u, v)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

fn solve_pade(u: DMatrix<f64>, v: DMatrix<f64>) -> DMatrix<f64> {
    let p = &v + &u;
    let q = v - u;
    q.lu().solve(&p).expect("Padé denominator is nonsingular within the theta bounds")
}

/// `exp(a)` for a square matrix.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    for (theta, b) in [(THETA_3, &B3[..]), (THETA_5, &B5[..]), (THETA_7, &B7[..]), (THETA_9, &B9[..])] {
        if norm <= theta {
            let (u, v) = pade_low(a, b);
            return solve_pade(u, v);
        }
    }
    let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let scaled = a / 2f64.powi(s);
    let (u, v) = pade13(&scaled);
    let mut r = solve_pade(u, v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(a: &DMatrix<f64>) -> f64 {
        a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn skew(w: [f64; 3]) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0])
    }

    fn rodrigues(w: [f64; 3]) -> DMatrix<f64> {
        let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        let k = skew(w) / theta;
        DMatrix::identity(3, 3) + &k * theta.sin() + &k * &k * (1.0 - theta.cos())
    }

    #[test]
    fn zero_maps_to_identity() {
        assert_eq!(expm(&DMatrix::zeros(3, 3)), DMatrix::identity(3, 3));
    }

    #[test]
    fn scalar_exponential() {
        for &x in &[-3.0, -0.1, 1e-3, 0.5, 1.0, 2.0, 7.5, 20.0] {
            let e = expm(&DMatrix::from_element(1, 1, x))[(0, 0)];
            assert!((e - f64::exp(x)).abs() <= 1e-13 * f64::exp(x), "{x}: {e}");
        }
    }

    #[test]
    fn rotations_match_rodrigues() {
        for w in [[0.1, -0.2, 0.05], [1.0, 2.0, -0.5], [3.0, 0.0, 0.0], [-4.0, 5.0, 6.0]] {
            let r = expm(&skew(w));
            assert!(max_abs(&(&r - rodrigues(w))) <= 1e-13 * 10.0, "{w:?}");
            let defect = &r.transpose() * &r - DMatrix::identity(3, 3);
            assert!(max_abs(&defect) <= 1e-13, "{w:?}");
        }
    }

    #[test]
    fn nilpotent_series_terminates() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 3.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0]);
        let exact = DMatrix::identity(3, 3) + &a + &a * &a / 2.0;
        assert!(max_abs(&(expm(&a) - exact)) <= 1e-13 * 10.0);
    }

    #[test]
    fn inverse_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[0.3, -1.7, 2.2, -0.4]);
        let p = expm(&a) * expm(&(-&a));
        assert!(max_abs(&(p - DMatrix::identity(2, 2))) <= 1e-12);
    }
}
