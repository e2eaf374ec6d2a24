/// Classical fixed-step fourth-order Runge-Kutta with reusable stage buffers.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `state` from `t` to `t + dt` in place. `rhs(t, x, dx)` writes
    /// the vector field at `(t, x)` into `dx`.
    pub(crate) fn step<F>(&mut self, state: &mut [f64], t: f64, dt: f64, mut rhs: F)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * dt;
        rhs(t, state, &mut self.k1);
        for i in 0..state.len() {
            self.tmp[i] = state[i] + half * self.k1[i];
        }
        rhs(t + half, &self.tmp, &mut self.k2);
        for i in 0..state.len() {
            self.tmp[i] = state[i] + half * self.k2[i];
        }
        rhs(t + half, &self.tmp, &mut self.k3);
        for i in 0..state.len() {
            self.tmp[i] = state[i] + dt * self.k3[i];
        }
        rhs(t + dt, &self.tmp, &mut self.k4);
        let sixth = dt / 6.0;
        for i in 0..state.len() {
            state[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let mut rk = Rk4::new(1);
        let mut x = [1.0];
        let dt = 0.01;
        for n in 0..100 {
            rk.step(&mut x, n as f64 * dt, dt, |_, s, d| d[0] = -2.0 * s[0]);
        }
        assert!((x[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn time_dependent_rhs_is_integrated_exactly_for_cubics() {
        // x' = 3t^2 has x(t) = t^3; RK4 is exact for polynomial integrands up to degree 3.
        let mut rk = Rk4::new(1);
        let mut x = [0.0];
        let dt = 0.1;
        for n in 0..10 {
            rk.step(&mut x, n as f64 * dt, dt, |t, _, d| d[0] = 3.0 * t * t);
        }
        assert!((x[0] - 1.0).abs() < 1e-12);
    }
}
