//! Verlet position recurrence shared by the model head and the baselines.

/// Roll positions forward from the last two observed points:
/// `x[t+1] = 2 x[t] - x[t-1] + a[t] dt²`. Returns one position per
/// acceleration.
pub fn verlet_positions(prev: [f64; 3], last: [f64; 3], accel: &[[f64; 3]], dt: f64) -> Vec<[f64; 3]> {
    let dt2 = dt * dt;
    let mut out = Vec::with_capacity(accel.len());
    let (mut before, mut current) = (prev, last);
    for a in accel {
        let next = [
            2.0 * current[0] - before[0] + a[0] * dt2,
            2.0 * current[1] - before[1] + a[1] * dt2,
            2.0 * current[2] - before[2] + a[2] * dt2,
        ];
        out.push(next);
        before = current;
        current = next;
    }
    out
}

/// Zero-acceleration rollout.
pub fn constant_velocity(prev: [f64; 3], last: [f64; 3], steps: usize, dt: f64) -> Vec<[f64; 3]> {
    verlet_positions(prev, last, &vec![[0.0; 3]; steps], dt)
}
