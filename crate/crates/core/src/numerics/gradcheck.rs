use crate::{Error, Result};

use super::{Graph, ParamStore, Real, Tensor, Var};

const DENOM_FLOOR: f64 = 1e-8;

fn scalar<F: Real>(g: &Graph<'_, F>, v: Var) -> Result<F> {
    let t = g.value(v);
    if t.len() != 1 {
        return Err(Error::Contract(format!(
            "gradient check needs a scalar function, got shape {:?}",
            t.shape()
        )));
    }
    Ok(t.item())
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + DENOM_FLOOR)
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Contract("finite difference step must be positive".into()))
    }
}

/// Fourth-order central difference
/// `(-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / 12h`.
fn central<E: FnMut(f64) -> Result<f64>>(mut at: E, h: f64) -> Result<f64> {
    let (p2, p1, m1, m2) = (at(2.0 * h)?, at(h)?, at(-h)?, at(-2.0 * h)?);
    Ok((-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h))
}

fn input_gradient<F, Fun>(f: &Fun, x: &Tensor<F>) -> Result<Vec<F>>
where
    F: Real,
    Fun: Fn(&mut Graph<'_, F>, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let xv = g.leaf(x.clone(), true);
    let y = f(&mut g, xv)?;
    scalar(&g, y)?;
    let grads = g.backward(y)?;
    Ok(grads
        .wrt(xv)
        .map(<[F]>::to_vec)
        .unwrap_or_else(|| vec![F::zero(); x.len()]))
}

fn worst_input_error<F, G, Fun>(f: &Fun, x: &Tensor<G>, analytic: &[F], h: f64) -> Result<f64>
where
    F: Real,
    G: Real,
    Fun: Fn(&mut Graph<'_, G>, Var) -> Result<Var>,
{
    let mut worst = 0.0f64;
    for (j, a) in analytic.iter().enumerate() {
        let numeric = central(
            |d| {
                let mut probe = x.clone();
                probe.data_mut()[j] = G::of(x.data()[j].f64() + d);
                let mut g = Graph::new();
                let v = g.constant(probe);
                let y = f(&mut g, v)?;
                Ok(scalar(&g, y)?.f64())
            },
            h,
        )?;
        worst = worst.max(rel_error(a.f64(), numeric));
    }
    Ok(worst)
}

/// Largest relative error between the analytic gradient of `f` at `x` and
/// a central difference with step `h`, both at precision `F`:
/// `|analytic - numeric| / (|analytic| + 1e-8)`.
pub fn finite_difference_check<F, Fun>(f: Fun, x: &Tensor<F>, h: F) -> Result<F>
where
    F: Real,
    Fun: Fn(&mut Graph<'_, F>, Var) -> Result<Var>,
{
    check_step(h.f64())?;
    let analytic = input_gradient(&f, x)?;
    worst_input_error(&f, x, &analytic, h.f64()).map(F::of)
}

/// A scalar function of one tensor that can be recorded at any precision.
pub trait ScalarFunction {
    fn record<G: Real>(&self, g: &mut Graph<'_, G>, x: Var) -> Result<Var>;
}

/// A scalar loss over a parameter store, recordable at any precision.
pub trait ParamFunction {
    fn record<G: Real>(&self, g: &mut Graph<'_, G>) -> Result<Var>;
}

/// Like [`finite_difference_check`], but the analytic gradient is taken at
/// precision `F` while the central difference is evaluated at 64-bit, so
/// 32-bit backpropagation is measured against a reference whose own
/// rounding is negligible.
pub fn reference_gradient_check<F: Real, S: ScalarFunction>(f: &S, x: &Tensor<F>, h: f64) -> Result<f64> {
    check_step(h)?;
    let analytic = input_gradient(&|g: &mut Graph<'_, F>, v| f.record(g, v), x)?;
    worst_input_error(
        &|g: &mut Graph<'_, f64>, v| f.record(g, v),
        &x.cast::<f64>(),
        &analytic,
        h,
    )
}

fn param_analytic<F: Real>(
    params: &ParamStore<F>,
    f: impl Fn(&mut Graph<'_, F>) -> Result<Var>,
) -> Result<Vec<(usize, Vec<F>)>> {
    let mut g = Graph::with_params(params);
    let y = f(&mut g)?;
    scalar(&g, y)?;
    let grads = g.backward(y)?;
    Ok(params
        .iter()
        .filter(|(_, p)| p.requires_grad)
        .map(|(id, p)| {
            let a = grads
                .param(id)
                .map(<[F]>::to_vec)
                .unwrap_or_else(|| vec![F::zero(); p.value.len()]);
            (id.index(), a)
        })
        .collect())
}

fn worst_param_error<F, G>(
    probe_base: &ParamStore<G>,
    analytic: &[(usize, Vec<F>)],
    h: f64,
    f: impl Fn(&mut Graph<'_, G>) -> Result<Var>,
) -> Result<f64>
where
    F: Real,
    G: Real,
{
    let mut probe = probe_base.clone();
    let ids: Vec<_> = probe_base.iter().map(|(id, _)| id).collect();
    let mut worst = 0.0f64;
    for (index, grad) in analytic {
        let id = ids[*index];
        for (j, a) in grad.iter().enumerate() {
            let orig = probe_base.value(id).data()[j];
            let numeric = central(
                |d| {
                    probe.value_mut(id).data_mut()[j] = G::of(orig.f64() + d);
                    let mut g = Graph::inference(&probe);
                    let y = f(&mut g)?;
                    let v = scalar(&g, y)?.f64();
                    probe.value_mut(id).data_mut()[j] = orig;
                    Ok(v)
                },
                h,
            )?;
            worst = worst.max(rel_error(a.f64(), numeric));
        }
    }
    Ok(worst)
}

/// The same check over every trainable coordinate of a parameter store,
/// for a scalar loss built by `f` on a graph bound to the store.
pub fn param_gradient_check<F, Fun>(params: &ParamStore<F>, h: F, f: Fun) -> Result<F>
where
    F: Real,
    Fun: Fn(&mut Graph<'_, F>) -> Result<Var>,
{
    check_step(h.f64())?;
    let analytic = param_analytic(params, &f)?;
    worst_param_error(params, &analytic, h.f64(), &f).map(F::of)
}

/// Parameter check with the analytic side at precision `F` and the central
/// difference evaluated on a 64-bit copy of the store.
pub fn reference_param_gradient_check<F: Real, P: ParamFunction>(params: &ParamStore<F>, h: f64, f: &P) -> Result<f64> {
    check_step(h)?;
    let analytic = param_analytic(params, |g| f.record(g))?;
    worst_param_error(&params.cast::<f64>(), &analytic, h, |g| f.record(g))
}
