/// Fixed-step classical RK4 over `substeps` equal substeps of `h / substeps`.
/// `project` runs after every substep (used to enforce physical bounds).
pub(crate) fn rk4<const N: usize>(
    mut x: [f64; N],
    h: f64,
    substeps: usize,
    f: impl Fn(&[f64; N]) -> [f64; N],
    project: impl Fn(&mut [f64; N]),
) -> [f64; N] {
    let dt = h / substeps as f64;
    let axpy = |x: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] {
        let mut out = *x;
        for i in 0..N {
            out[i] += s * k[i];
        }
        out
    };
    for _ in 0..substeps {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, dt / 2.0));
        let k3 = f(&axpy(&x, &k2, dt / 2.0));
        let k4 = f(&axpy(&x, &k3, dt));
        for i in 0..N {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        project(&mut x);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let x = rk4([1.0], 1.0, 10, |x| [-x[0]], |_| {});
        // RK4 on x' = -x multiplies by the degree-4 Taylor polynomial per substep.
        let h = 0.1f64;
        let g = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((x[0] - g.powi(10)).abs() < 1e-14);
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-6);
    }
}
