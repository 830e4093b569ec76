use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::PlantError;

/// Reduced linear tank model
///
/// ```text
/// ḣ = A h + B1 u + B2 d_a
/// p_out = C_p h + D_p u + p0
/// ```
///
/// together with its zero-order-hold discretization at `dt`. The offset
/// `p0` carries the static head of the pumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPlantModel {
    #[serde(with = "rows")]
    pub a: DMatrix<f64>,
    #[serde(with = "rows")]
    pub b1: DMatrix<f64>,
    #[serde(with = "rows")]
    pub b2: DMatrix<f64>,
    #[serde(with = "rows")]
    pub ad: DMatrix<f64>,
    #[serde(with = "rows")]
    pub bd1: DMatrix<f64>,
    #[serde(with = "rows")]
    pub bd2: DMatrix<f64>,
    #[serde(with = "rows")]
    pub cp: DMatrix<f64>,
    #[serde(with = "rows")]
    pub dp: DMatrix<f64>,
    pub p_offset: Vec<f64>,
    pub p_in: Vec<f64>,
    pub dt: f64,
    /// kW per (flow unit × metre of head).
    pub power_factor: f64,
}

mod rows {
    use nalgebra::DMatrix;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("matrix rows have different lengths"));
        }
        Ok(DMatrix::from_row_iterator(
            rows.len(),
            ncols,
            rows.into_iter().flatten(),
        ))
    }
}

impl LinearPlantModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        cp: DMatrix<f64>,
        dp: DMatrix<f64>,
        p_offset: Vec<f64>,
        p_in: Vec<f64>,
        dt: f64,
        power_factor: f64,
    ) -> Result<Self, PlantError> {
        let n = a.nrows();
        let m = b1.ncols();
        let dim_ok = a.is_square()
            && b1.nrows() == n
            && b2.shape() == (n, 1)
            && cp.shape() == (m, n)
            && dp.shape() == (m, m)
            && p_offset.len() == m
            && p_in.len() == m;
        if !dim_ok {
            return Err(PlantError::Dimension(format!(
                "inconsistent model shapes for {n} states and {m} inputs"
            )));
        }
        let (ad, bd1, bd2) = discretize(&a, &b1, &b2, dt)?;
        Ok(Self {
            a,
            b1,
            b2,
            ad,
            bd1,
            bd2,
            cp,
            dp,
            p_offset,
            p_in,
            dt,
            power_factor,
        })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b1.ncols()
    }

    /// One discrete step `h⁺ = A_d h + B_d1 u + B_d2 d_a`.
    pub fn step(&self, h: &[f64], u: &[f64], d_a: f64) -> Vec<f64> {
        let next = &self.ad * DVector::from_column_slice(h)
            + &self.bd1 * DVector::from_column_slice(u)
            + self.bd2.column(0) * d_a;
        next.iter().copied().collect()
    }

    /// States `h_0..h_N` under the input and demand sequences.
    pub fn simulate(&self, h0: &[f64], inputs: &[Vec<f64>], demand: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(inputs.len() + 1);
        out.push(h0.to_vec());
        for (u, d) in inputs.iter().zip(demand) {
            let next = self.step(out.last().expect("non-empty"), u, *d);
            out.push(next);
        }
        out
    }

    pub fn outlet_pressure(&self, h: &[f64], u: &[f64]) -> Vec<f64> {
        let p = &self.cp * DVector::from_column_slice(h) + &self.dp * DVector::from_column_slice(u);
        p.iter().zip(&self.p_offset).map(|(a, b)| a + b).collect()
    }

    /// Pump power (kW) predicted by the output model.
    pub fn pump_power_kw(&self, h: &[f64], u: &[f64]) -> f64 {
        let p_out = self.outlet_pressure(h, u);
        self.power_factor * super::pump_power(u, &p_out, &self.p_in)
    }
}

/// Discrete state, input and disturbance matrices.
pub type Discretized = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>);

/// Exact zero-order-hold discretization through the exponential of the
/// augmented matrix `[[A, B], [0, 0]]·dt`.
pub fn discretize(
    a: &DMatrix<f64>,
    b1: &DMatrix<f64>,
    b2: &DMatrix<f64>,
    dt: f64,
) -> Result<Discretized, PlantError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(PlantError::InvalidInput(format!(
            "sampling interval {dt} must be positive"
        )));
    }
    let n = a.nrows();
    let m = b1.ncols();
    let k = b2.ncols();
    let mut aug = DMatrix::zeros(n + m + k, n + m + k);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, m)).copy_from(b1);
    aug.view_mut((0, n + m), (n, k)).copy_from(b2);
    let e = (aug * dt).exp();
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
        e.view((0, n + m), (n, k)).into_owned(),
    ))
}

fn sqrtm(x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = x.nrows();
    let mut y = x.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse()?;
        let zi = z.clone().try_inverse()?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let change = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if change <= 1e-15 * y.norm() {
            return Some(y);
        }
    }
    None
}

/// Principal matrix logarithm by inverse scaling and squaring. Returns
/// `None` when the iteration breaks down (e.g. eigenvalues on the negative
/// real axis).
pub fn matrix_log(x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = x.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut r = x.clone();
    let mut halvings = 0;
    while (&r - &id).norm() > 0.25 {
        if halvings >= 40 {
            return None;
        }
        r = sqrtm(&r)?;
        halvings += 1;
    }
    let e = &r - &id;
    let mut power = e.clone();
    let mut sum = DMatrix::zeros(n, n);
    for k in 1..=80 {
        let term = &power / k as f64;
        if k % 2 == 1 {
            sum += &term;
        } else {
            sum -= &term;
        }
        if term.norm() <= 1e-18 * sum.norm().max(1e-300) {
            break;
        }
        power = &power * &e;
    }
    let log = sum * 2f64.powi(halvings);
    log.iter().all(|v| v.is_finite()).then_some(log)
}
