//! Central finite-difference gradient checking.

use super::ParamSet;
use crate::rng::Rng64;

/// Compares the analytic gradients stored in `ps.grad` against central
/// differences of `loss` over up to `samples` randomly chosen
/// coordinates (all coordinates when the set is small). Returns the
/// worst relative error.
///
/// `loss` must be a deterministic function of the parameter values:
/// fix any noise by seed before calling. The relative error denominator
/// is floored at 1e-3 so finite-difference round-off on near-zero
/// gradients does not read as failure.
pub fn gradient_check<F>(
    ps: &mut ParamSet,
    mut loss: F,
    eps: f64,
    samples: usize,
    rng: &mut Rng64,
) -> f64
where
    F: FnMut(&ParamSet) -> f64,
{
    // Flat index space over all parameters, in deterministic order.
    let names: Vec<String> = ps.iter().map(|(n, _)| n.clone()).collect();
    let sizes: Vec<usize> = names.iter().map(|n| ps.value(n).numel()).collect();
    let total: usize = sizes.iter().sum();

    let mut coords: Vec<usize> = (0..total).collect();
    if total > samples {
        rng.shuffle(&mut coords);
        coords.truncate(samples);
    }

    let mut worst = 0.0f64;
    for flat in coords {
        let (name, offset) = locate(&names, &sizes, flat);
        let analytic = ps.param_mut(&name).grad.data[offset];

        let original = ps.value(&name).data[offset];
        ps.param_mut(&name).value.data[offset] = original + eps;
        let plus = loss(ps);
        ps.param_mut(&name).value.data[offset] = original - eps;
        let minus = loss(ps);
        ps.param_mut(&name).value.data[offset] = original;

        let numeric = (plus - minus) / (2.0 * eps);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
        if rel > worst {
            worst = rel;
        }
    }
    worst
}

fn locate(names: &[String], sizes: &[usize], mut flat: usize) -> (String, usize) {
    for (name, &size) in names.iter().zip(sizes) {
        if flat < size {
            return (name.clone(), flat);
        }
        flat -= size;
    }
    unreachable!("flat index out of range")
}
