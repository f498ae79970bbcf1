//! Adaptive Dormand-Prince 5(4) for small autonomous systems.

use crate::error::{Error, Result};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates `y' = f(y)` from `0` to `t_end` with mixed absolute/relative
/// tolerance `tol` per component.
pub fn dopri5(f: impl Fn(&[f64], &mut [f64]), y0: &[f64], t_end: f64, tol: f64) -> Result<Vec<f64>> {
    let m = y0.len();
    let mut y = y0.to_vec();
    if t_end == 0.0 {
        return Ok(y);
    }
    let mut k = vec![vec![0.0; m]; 7];
    let mut tmp = vec![0.0; m];
    let mut t = 0.0;
    let mut h = (t_end * 0.01).min(0.1);
    f(&y, &mut k[0]);
    for _ in 0..1_000_000 {
        if t >= t_end {
            return Ok(y);
        }
        h = h.min(t_end - t);
        for s in 1..7 {
            for i in 0..m {
                tmp[i] = y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            f(&tmp, &mut k[s]);
        }
        // tmp now holds the 5th-order solution (FSAL row)
        let mut err: f64 = 0.0;
        for i in 0..m {
            let e = h * (0..7).map(|j| (B5[j] - B4[j]) * k[j][i]).sum::<f64>();
            let sc = tol * (1.0 + y[i].abs().max(tmp[i].abs()));
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&tmp);
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t_end {
            return Err(Error::Construction("step size underflow in trajectory integration".into()));
        }
    }
    Err(Error::Construction("trajectory integration did not finish".into()))
}
