use super::grid::Torus;
use super::metric::{MetricDelta, StaticMetricFamily, Sym2};
use super::split::Split;

/// Coefficients of `L u = p div(A grad u)` with `p = V / sqrt(det h)` and
/// `A = V sqrt(det h) h^-1`, so that `d_t^2 u = L u` is the static wave equation.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub p: Vec<f64>,
    pub a: Vec<Sym2>,
}

pub fn coefficients(metric: &StaticMetricFamily, k: usize) -> Coefficients {
    let (p, a) = metric
        .lapse(k)
        .iter()
        .zip(metric.spatial(k))
        .map(|(&v, h)| {
            let root = h.det().sqrt();
            (v / root, h.inverse().scale(v * root))
        })
        .unzip();
    Coefficients { p, a }
}

/// Base coefficients, perturbed coefficients, and their exact differences.
#[derive(Debug, Clone)]
pub struct SplitCoefficients {
    pub base: Coefficients,
    pub hat: Coefficients,
    pub delta: Coefficients,
}

pub fn split_coefficients(metric: &StaticMetricFamily, delta: &MetricDelta, k: usize) -> SplitCoefficients {
    let n = metric.torus().len();
    let mut base = Coefficients { p: Vec::with_capacity(n), a: Vec::with_capacity(n) };
    let mut hat = base.clone();
    let mut diff = base.clone();
    for i in 0..n {
        let h = metric.spatial(k)[i];
        let dh = delta.spatial[k][i];
        let v = Split::new(metric.lapse(k)[i], delta.lapse[k][i]);
        let xx = Split::new(h.xx, dh.xx);
        let xy = Split::new(h.xy, dh.xy);
        let yy = Split::new(h.yy, dh.yy);
        let det = xx * yy - xy * xy;
        let root = det.sqrt();
        let p = v / root;
        let scale = v * root;
        let ixx = scale * yy / det;
        let ixy = -(scale * xy / det);
        let iyy = scale * xx / det;
        base.p.push(p.base);
        base.a.push(Sym2::new(ixx.base, ixy.base, iyy.base));
        diff.p.push(p.delta);
        diff.a.push(Sym2::new(ixx.delta, ixy.delta, iyy.delta));
        hat.p.push(p.perturbed());
        hat.a.push(Sym2::new(ixx.perturbed(), ixy.perturbed(), iyy.perturbed()));
    }
    SplitCoefficients { base, hat, delta: diff }
}

/// Flux-form `div(A grad u)`: staggered averages for the diagonal terms and
/// centered differences for the mixed term.
pub fn div_flux(torus: &Torus, a: &[Sym2], u: &[f64]) -> Vec<f64> {
    let dim = torus.dim();
    let dx2 = torus.dx() * torus.dx();
    let two_dx = 2.0 * torus.dx();
    (0..torus.len())
        .map(|p| {
            let mut s = 0.0;
            for axis in 0..dim {
                let plus = torus.shift(p, axis, 1);
                let minus = torus.shift(p, axis, -1);
                let aa = |q: usize| a[q].get(axis, axis);
                let right = 0.5 * (aa(p) + aa(plus)) * (u[plus] - u[p]);
                let left = 0.5 * (aa(p) + aa(minus)) * (u[p] - u[minus]);
                s += (right - left) / dx2;
            }
            if dim == 2 {
                for (outer, inner) in [(0, 1), (1, 0)] {
                    let plus = torus.shift(p, outer, 1);
                    let minus = torus.shift(p, outer, -1);
                    s += (a[plus].xy * torus.d1(u, plus, inner) - a[minus].xy * torus.d1(u, minus, inner)) / two_dx;
                }
            }
            s
        })
        .collect()
}

/// `L u` per point.
pub fn apply(torus: &Torus, c: &Coefficients, u: &[f64]) -> Vec<f64> {
    div_flux(torus, &c.a, u).into_iter().zip(&c.p).map(|(d, p)| d * p).collect()
}

/// `L^ u^ - L u` for `u^ = u + w`, written as
/// `p^ div(A^ grad w) + dp div(A^ grad u) + p div(dA grad u)`.
pub fn apply_difference(torus: &Torus, c: &SplitCoefficients, u: &[f64], w: &[f64]) -> Vec<f64> {
    let dw = div_flux(torus, &c.hat.a, w);
    let du_hat = div_flux(torus, &c.hat.a, u);
    let du_delta = div_flux(torus, &c.delta.a, u);
    (0..torus.len())
        .map(|i| c.hat.p[i] * dw[i] + c.delta.p[i] * du_hat[i] + c.base.p[i] * du_delta[i])
        .collect()
}

/// Discrete `box u = -V^-2 d_t^2 u + |g|^-1/2 d_a(|g|^1/2 h^ab d_b u)` from three
/// consecutive time levels `dt` apart.
pub fn dalembert_apply(metric: &StaticMetricFamily, k: usize, levels: [&[f64]; 3], dt: f64) -> Vec<f64> {
    let [prev, cur, next] = levels;
    let c = coefficients(metric, k);
    let lu = apply(metric.torus(), &c, cur);
    let v = metric.lapse(k);
    (0..cur.len())
        .map(|i| (lu[i] - (next[i] - 2.0 * cur[i] + prev[i]) / (dt * dt)) / (v[i] * v[i]))
        .collect()
}
