//! Reference computations shared by the integration suites. Nothing here
//! calls into the library's numerics.
#![allow(dead_code)]

use num_complex::Complex64;

pub type Mat = Vec<Vec<f64>>;

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// Double-double number `hi + lo` (about 32 significant digits), enough to
/// make the brute-force exponential below an oracle for stiff symbols.
#[derive(Clone, Copy, Debug, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Self { hi: s, lo: lo - (s - hi) }
    }

    pub fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let t = Self::two_sum(self.lo, o.lo);
        let r = Self::renorm(s.hi, s.lo + t.hi);
        Self::renorm(r.hi, r.lo + t.lo)
    }

    pub fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Self::renorm(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    pub fn div_f64(self, d: f64) -> Self {
        let q1 = self.hi / d;
        let r = self.add(Dd::new(q1).mul(Dd::new(-d)));
        let q2 = r.hi / d;
        Self::renorm(q1, q2)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

fn matmul_dd(a: &[Vec<Dd>], b: &[Vec<Dd>]) -> Vec<Vec<Dd>> {
    let n = a.len();
    let mut c = vec![vec![Dd::default(); n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i][j] = c[i][j].add(a[i][k].mul(b[k][j]));
            }
        }
    }
    c
}

/// `exp(A)` by scaling and squaring in double-double arithmetic: scale until
/// the 1-norm is below 1/2, sum 40 Taylor terms, square back.
pub fn expm_dd(a: &[Vec<Dd>]) -> Mat {
    let n = a.len();
    let norm = (0..n).map(|j| (0..n).map(|i| a[i][j].hi.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let scale = Dd::new(2f64.powi(-s));
    let b: Vec<Vec<Dd>> = a.iter().map(|row| row.iter().map(|x| x.mul(scale)).collect()).collect();
    let eye = |i: usize, j: usize| Dd::new(if i == j { 1.0 } else { 0.0 });
    let mut result: Vec<Vec<Dd>> = (0..n).map(|i| (0..n).map(|j| eye(i, j)).collect()).collect();
    let mut term = result.clone();
    for k in 1..=40 {
        term = matmul_dd(&term, &b);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x = x.div_f64(k as f64);
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] = result[i][j].add(term[i][j]);
            }
        }
    }
    for _ in 0..s {
        result = matmul_dd(&result, &result);
    }
    result.iter().map(|row| row.iter().map(|x| x.to_f64()).collect()).collect()
}

/// `exp(t A)` for the per-mode symbol `A = [[-mu r^2, r], [-r, 0]]`, with the
/// entries of `t A` formed in double-double.
pub fn symbol_exp(t: f64, mu: f64, r: f64) -> Mat {
    let (t, mu, r) = (Dd::new(t), Dd::new(mu), Dd::new(r));
    let rt = r.mul(t);
    let a11 = mu.mul(r).mul(rt);
    let neg = |x: Dd| Dd { hi: -x.hi, lo: -x.lo };
    expm_dd(&[vec![neg(a11), rt], vec![neg(rt), Dd::default()]])
}

/// `exp(A)` of a double-precision matrix, evaluated in double-double.
pub fn expm(a: &Mat) -> Mat {
    let dd: Vec<Vec<Dd>> = a.iter().map(|row| row.iter().map(|&x| Dd::new(x)).collect()).collect();
    expm_dd(&dd)
}

/// Classical fourth-order Runge-Kutta with a fixed number of steps.
pub fn rk4<F: Fn(&[Complex64]) -> Vec<Complex64>>(f: F, y0: &[Complex64], t: f64, steps: usize) -> Vec<Complex64> {
    let h = t / steps as f64;
    let mut y = y0.to_vec();
    let shift = |y: &[Complex64], k: &[Complex64], c: f64| -> Vec<Complex64> {
        y.iter().zip(k).map(|(a, b)| a + b * c).collect()
    };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&shift(&y, &k1, h / 2.0));
        let k3 = f(&shift(&y, &k2, h / 2.0));
        let k4 = f(&shift(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Right-hand side of the linearised system at one wavevector, unknowns
/// `(u_1..u_d, E_11, E_12, .., E_dd)`:
///
/// `u' = -mu |xi|^2 u + P(i xi_j E_ij)`, `E_ij' = i xi_j u_i`.
pub fn linear_mode_rhs(xi: [f64; 3], dim: usize, mu: f64) -> impl Fn(&[Complex64]) -> Vec<Complex64> {
    let r2: f64 = xi[..dim].iter().map(|x| x * x).sum();
    move |y: &[Complex64]| {
        let i = Complex64::i();
        let mut out = vec![Complex64::new(0.0, 0.0); dim + dim * dim];
        let mut div = [Complex64::new(0.0, 0.0); 3];
        for a in 0..dim {
            for b in 0..dim {
                div[a] += i * xi[b] * y[dim + a * dim + b];
            }
        }
        let along: Complex64 = (0..dim).map(|a| div[a] * xi[a]).sum::<Complex64>() / r2;
        for a in 0..dim {
            out[a] = -mu * r2 * y[a] + div[a] - along * xi[a];
            for b in 0..dim {
                out[dim + a * dim + b] = i * xi[b] * y[a];
            }
        }
        out
    }
}

/// Ordinary least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
