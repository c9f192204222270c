//! Adaptive Gauss-Kronrod (G7/K15) quadrature for scalar and vector integrands.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },
    #[error("quadrature did not reach tolerance {tol} after {intervals} subintervals (error estimate {estimate})")]
    NotConverged {
        tol: f64,
        intervals: usize,
        estimate: f64,
    },
    #[error("invalid integration bounds [{a}, {b}]")]
    InvalidBounds { a: f64, b: f64 },
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        QuadOptions {
            abs_tol: tol,
            rel_tol: tol,
            ..Default::default()
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    err: f64,
}

fn kronrod<F>(f: &mut F, a: f64, b: f64, dim: usize) -> Result<Panel, QuadError>
where
    F: FnMut(f64, &mut [f64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    let mut eval = |x: f64, buf: &mut [f64]| -> Result<(), QuadError> {
        f(x, buf);
        if buf.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(QuadError::NonFinite { at: x })
        }
    };
    eval(c, &mut buf)?;
    for d in 0..dim {
        k[d] += WGK[7] * buf[d];
        g[d] += WG[3] * buf[d];
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        for x in [c - dx, c + dx] {
            eval(x, &mut buf)?;
            for d in 0..dim {
                k[d] += WGK[i] * buf[d];
                if i % 2 == 1 {
                    g[d] += WG[i / 2] * buf[d];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for d in 0..dim {
        k[d] *= h;
        g[d] *= h;
        err = err.max((k[d] - g[d]).abs());
    }
    Ok(Panel {
        a,
        b,
        value: k,
        err,
    })
}

/// Integrate a vector-valued function over `[a, b]`; `f(x, out)` writes the
/// integrand into `out`. Reversed bounds give the negated integral.
pub fn integrate_vec<F>(
    mut f: F,
    a: f64,
    b: f64,
    dim: usize,
    opts: QuadOptions,
) -> Result<Vec<f64>, QuadError>
where
    F: FnMut(f64, &mut [f64]),
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(QuadError::InvalidBounds { a, b });
    }
    if a == b {
        return Ok(vec![0.0; dim]);
    }
    if a > b {
        let v = integrate_vec(f, b, a, dim, opts)?;
        return Ok(v.into_iter().map(|x| -x).collect());
    }
    let mut panels = vec![kronrod(&mut f, a, b, dim)?];
    loop {
        let mut total = vec![0.0; dim];
        let mut err = 0.0;
        for p in &panels {
            for (t, v) in total.iter_mut().zip(&p.value) {
                *t += v;
            }
            err += p.err;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = opts.abs_tol.max(opts.rel_tol * scale);
        if err <= target {
            return Ok(total);
        }
        if panels.len() >= opts.max_intervals {
            return Err(QuadError::NotConverged {
                tol: target,
                intervals: panels.len(),
                estimate: err,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if !(p.a < m && m < p.b) {
            return Err(QuadError::NotConverged {
                tol: target,
                intervals: panels.len() + 1,
                estimate: err,
            });
        }
        panels.push(kronrod(&mut f, p.a, m, dim)?);
        panels.push(kronrod(&mut f, m, p.b, dim)?);
    }
}

pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64, QuadError>
where
    F: FnMut(f64) -> f64,
{
    integrate_vec(|x, out| out[0] = f(x), a, b, 1, opts).map(|v| v[0])
}

/// Integrate over `[a, b]` with `0 < a < b` on geometrically spaced panels,
/// one per factor-of-ten. Suited to integrands with a singularity at zero.
pub fn integrate_log_panels<F>(
    mut f: F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<f64, QuadError>
where
    F: FnMut(f64) -> f64,
{
    if !(a > 0.0 && a <= b) {
        return Err(QuadError::InvalidBounds { a, b });
    }
    let mut total = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (lo * 10.0).min(b);
        total += integrate(&mut f, lo, hi, opts)?;
        lo = hi;
    }
    Ok(total)
}
