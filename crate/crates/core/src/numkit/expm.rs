use super::{Lu, Matrix, NumError};

// [13/13] Padé coefficients of the exponential.
const PADE13: [f64; 14] = [
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

// Largest 1-norm for which the degree-13 approximant meets double precision.
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(m: &Matrix) -> Result<Matrix, NumError> {
    if !m.is_square() {
        return Err(NumError::Dimension(format!(
            "expm needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(NumError::NonFinite);
    }
    let n = m.rows();
    let norm = m.norm1();
    if norm == 0.0 {
        return Ok(Matrix::identity(n));
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = m.scale(0.5f64.powi(s));

    let ident = Matrix::identity(n);
    let a2 = a.mul(&a);
    let a4 = a2.mul(&a2);
    let a6 = a4.mul(&a2);
    let b = &PADE13;

    let mut inner = a6.scale(b[13]);
    inner.add_scaled(b[11], &a4);
    inner.add_scaled(b[9], &a2);
    let mut u = a6.mul(&inner);
    u.add_scaled(b[7], &a6);
    u.add_scaled(b[5], &a4);
    u.add_scaled(b[3], &a2);
    u.add_scaled(b[1], &ident);
    let u = a.mul(&u);

    let mut inner = a6.scale(b[12]);
    inner.add_scaled(b[10], &a4);
    inner.add_scaled(b[8], &a2);
    let mut v = a6.mul(&inner);
    v.add_scaled(b[6], &a6);
    v.add_scaled(b[4], &a4);
    v.add_scaled(b[2], &a2);
    v.add_scaled(b[0], &ident);

    let mut r = Lu::factor(&v.sub(&u))?.solve(&v.add(&u))?;
    for _ in 0..s {
        r = r.mul(&r);
    }
    Ok(r)
}
