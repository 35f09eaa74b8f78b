//! Central finite differences, used to check tape gradients independently of
//! the reverse pass.

use super::Tensor;

/// Numerical gradient of `f` with respect to every entry of every parameter,
/// by central differences with the given step.
pub fn central_difference<F>(f: F, params: &[Tensor], step: f64) -> Vec<Tensor>
where
    F: Fn(&[Tensor]) -> f64,
{
    let mut work: Vec<Tensor> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut grad = Tensor::zeros(params[p].rows(), params[p].cols());
        for i in 0..params[p].len() {
            let original = work[p].data()[i];
            work[p].data_mut()[i] = original + step;
            let plus = f(&work);
            work[p].data_mut()[i] = original - step;
            let minus = f(&work);
            work[p].data_mut()[i] = original;
            grad.data_mut()[i] = (plus - minus) / (2.0 * step);
        }
        out.push(grad);
    }
    out
}

/// Largest elementwise relative error between `analytic` and `numeric`.
///
/// Entries where both magnitudes are at most `floor` contribute their absolute
/// error instead.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor, floor: f64) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| {
            let scale = a.abs().max(n.abs());
            if scale <= floor {
                (a - n).abs()
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_difference_is_exact() {
        let x = Tensor::row_vector(vec![1.0, -2.0, 0.5]);
        let g = central_difference(|p| p[0].data().iter().map(|v| v * v).sum(), &[x], 1e-3);
        for (got, want) in g[0].data().iter().zip([2.0, -4.0, 1.0]) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn relative_error_ignores_tiny_entries() {
        let a = Tensor::row_vector(vec![1.0, 1e-9]);
        let n = Tensor::row_vector(vec![1.0 + 1e-6, 3e-9]);
        let err = max_relative_error(&a, &n, 1e-6);
        assert!(err < 2e-6, "{err}");
    }
}
