/// The constant capacitance matrix C_g·I + C_J·(2I − S − Sᵀ), factored once.
///
/// Open chains lose the C_J link beyond each end; rings close it and are solved by
/// Sherman–Morrison on top of the open factorization.
#[derive(Debug, Clone)]
pub(super) struct MassMatrix {
    off: f64,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
    cyclic: Option<Cyclic>,
}

#[derive(Debug, Clone)]
struct Cyclic {
    gamma: f64,
    corner: f64,
    z: Vec<f64>,
    factor_denom: f64,
}

impl MassMatrix {
    pub(super) fn new(n: usize, cg: f64, cj: f64, periodic: bool) -> Self {
        let off = -cj;
        let mut diag = vec![cg + 2.0 * cj; n];
        if !periodic {
            diag[0] = cg + cj;
            diag[n - 1] = cg + cj;
        }
        let cyclic_on = periodic && cj != 0.0;
        let gamma = -diag[0];
        if cyclic_on {
            diag[0] -= gamma;
            diag[n - 1] -= off * off / gamma;
        }
        let (c_prime, inv_denom) = factor(&diag, off);
        let mut m = MassMatrix { off, c_prime, inv_denom, cyclic: None };
        if cyclic_on {
            let mut z = vec![0.0; n];
            z[0] = gamma;
            z[n - 1] = off;
            m.substitute(&mut z);
            let factor_denom = 1.0 + z[0] + off * z[n - 1] / gamma;
            m.cyclic = Some(Cyclic { gamma, corner: off, z, factor_denom });
        }
        m
    }

    fn substitute(&self, r: &mut [f64]) {
        let n = r.len();
        r[0] *= self.inv_denom[0];
        for i in 1..n {
            r[i] = (r[i] - self.off * r[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            r[i] -= self.c_prime[i] * r[i + 1];
        }
    }

    /// Overwrites `r` with M⁻¹r.
    pub(super) fn solve(&self, r: &mut [f64]) {
        self.substitute(r);
        if let Some(c) = &self.cyclic {
            let n = r.len();
            let f = (r[0] + c.corner * r[n - 1] / c.gamma) / c.factor_denom;
            for (x, z) in r.iter_mut().zip(&c.z) {
                *x -= f * z;
            }
        }
    }
}

fn factor(diag: &[f64], off: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut c_prime = vec![0.0; n];
    let mut inv_denom = vec![0.0; n];
    let mut prev_c = 0.0;
    for i in 0..n {
        let denom = diag[i] - if i > 0 { off * prev_c } else { 0.0 };
        inv_denom[i] = 1.0 / denom;
        c_prime[i] = off * inv_denom[i];
        prev_c = c_prime[i];
    }
    (c_prime, inv_denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(n: usize, cg: f64, cj: f64, periodic: bool, x: &[f64]) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut y = cg * x[i];
                let left = if i > 0 {
                    Some(i - 1)
                } else if periodic {
                    Some(n - 1)
                } else {
                    None
                };
                let right = if i + 1 < n {
                    Some(i + 1)
                } else if periodic {
                    Some(0)
                } else {
                    None
                };
                for nb in [left, right].into_iter().flatten() {
                    y += cj * (x[i] - x[nb]);
                }
                y
            })
            .collect()
    }

    #[test]
    fn inverts_open_and_cyclic() {
        for periodic in [false, true] {
            for cj in [0.0, 0.3, 50.0] {
                let n = 17;
                let x: Vec<f64> = (0..n).map(|i| (1.3 * i as f64).sin() + 0.1).collect();
                let mut r = apply(n, 1.0, cj, periodic, &x);
                MassMatrix::new(n, 1.0, cj, periodic).solve(&mut r);
                for (a, b) in r.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-10, "periodic {periodic} cj {cj}: {a} vs {b}");
                }
            }
        }
    }
}
