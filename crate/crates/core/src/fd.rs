//! Small finite-difference helpers over spacetime fields.
//!
//! Fields are closures of the event `(t, x)` with `x` rectangular. All
//! stencils are centered; `step` is the absolute spacing.

/// A spacetime event in rectangular coordinates.
pub type Event = (f64, [f64; 3]);

#[inline]
pub fn shift(p: Event, dir: [f64; 4], s: f64) -> Event {
    (
        p.0 + s * dir[0],
        [
            p.1[0] + s * dir[1],
            p.1[1] + s * dir[2],
            p.1[2] + s * dir[3],
        ],
    )
}

#[inline]
fn axis(k: usize) -> [f64; 4] {
    let mut d = [0.0; 4];
    d[k] = 1.0;
    d
}

/// Second-order centered directional derivative of `f` along `dir` at `p`.
pub fn directional<F: Fn(Event) -> f64>(f: &F, p: Event, dir: [f64; 4], step: f64) -> f64 {
    (f(shift(p, dir, step)) - f(shift(p, dir, -step))) / (2.0 * step)
}

/// Fourth-order centered directional derivative.
pub fn directional4<F: Fn(Event) -> f64>(f: &F, p: Event, dir: [f64; 4], step: f64) -> f64 {
    (-f(shift(p, dir, 2.0 * step)) + 8.0 * f(shift(p, dir, step))
        - 8.0 * f(shift(p, dir, -step))
        + f(shift(p, dir, -2.0 * step)))
        / (12.0 * step)
}

/// Second directional derivative along a frozen direction.
pub fn directional2nd<F: Fn(Event) -> f64>(f: &F, p: Event, dir: [f64; 4], step: f64) -> f64 {
    (f(shift(p, dir, step)) - 2.0 * f(p) + f(shift(p, dir, -step))) / (step * step)
}

/// Partial derivative along coordinate axis `k` (0 = t).
pub fn partial<F: Fn(Event) -> f64>(f: &F, p: Event, k: usize, step: f64) -> f64 {
    directional(f, p, axis(k), step)
}

/// Full gradient `(∂_t f, ∂_i f)`.
pub fn gradient<F: Fn(Event) -> f64>(f: &F, p: Event, step: f64) -> [f64; 4] {
    [
        partial(f, p, 0, step),
        partial(f, p, 1, step),
        partial(f, p, 2, step),
        partial(f, p, 3, step),
    ]
}

/// Coordinate Hessian `∂_α ∂_β f` by centered stencils.
pub fn hessian<F: Fn(Event) -> f64>(f: &F, p: Event, step: f64) -> [[f64; 4]; 4] {
    let mut h = [[0.0; 4]; 4];
    let f0 = f(p);
    for a in 0..4 {
        let ea = axis(a);
        h[a][a] = (f(shift(p, ea, step)) - 2.0 * f0 + f(shift(p, ea, -step))) / (step * step);
        for b in (a + 1)..4 {
            let eb = axis(b);
            let pp = f(shift(shift(p, ea, step), eb, step));
            let pm = f(shift(shift(p, ea, step), eb, -step));
            let mp = f(shift(shift(p, ea, -step), eb, step));
            let mm = f(shift(shift(p, ea, -step), eb, -step));
            let v = (pp - pm - mp + mm) / (4.0 * step * step);
            h[a][b] = v;
            h[b][a] = v;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directional_matches_analytic_gradient() {
        let f = |p: Event| p.0 * p.0 + 2.0 * p.1[0] * p.1[2];
        let p = (1.3, [0.4, -0.2, 2.0]);
        let d = directional(&f, p, [1.0, 1.0, 0.0, 0.0], 1e-5);
        // ∂_t + ∂_x of f = 2t + 2z
        assert!((d - (2.0 * 1.3 + 2.0 * 2.0)).abs() < 1e-8);
    }

    #[test]
    fn hessian_of_quadratic_is_exact() {
        let f = |p: Event| 3.0 * p.0 * p.1[1] + p.1[0] * p.1[0];
        let h = hessian(&f, (0.7, [1.0, 2.0, 3.0]), 0.1);
        assert!((h[0][2] - 3.0).abs() < 1e-10);
        assert!((h[1][1] - 2.0).abs() < 1e-10);
        assert!((h[3][3]).abs() < 1e-10);
    }
}
