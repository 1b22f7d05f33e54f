use super::{ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of the scalar `f` against central finite
/// differences over every scalar in `store`. Returns the largest
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
///
/// Each scalar is probed with steps `10 eps`, `eps` and `eps / 10` and the
/// closest estimate counts. A step straddling a ReLU kink says nothing about
/// the derivative, and tiny gradients drown in rounding at small steps; a
/// wrong gradient disagrees at all three.
pub fn grad_check<F>(f: F, store: &ParamStore, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "eps {eps} outside [1e-7, 1e-3]"
        )));
    }
    let mut analytic = store.clone();
    analytic.zero_grad();
    let mut tape = Tape::new();
    let out = f(&mut tape, &analytic)?;
    if !tape.value(out).is_finite() {
        return Err(Error::NonFinite("grad_check objective".into()));
    }
    let grads = tape.backward(out)?;
    tape.accumulate_param_grads(&grads, &mut analytic);

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let o = f(&mut t, s)?;
        let v = t.value(o).item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("grad_check objective".into()))
        }
    };

    let mut probe = store.clone();
    let mut worst: f64 = 0.0;
    for id in store.ids() {
        for k in 0..store.get(id).value.len() {
            let orig = probe.get(id).value.data()[k];
            let a = analytic.get(id).grad.data()[k];
            let mut best = f64::INFINITY;
            for h in [10.0 * eps, eps, eps / 10.0] {
                probe.get_mut(id).value.data_mut()[k] = orig + h;
                let plus = eval(&probe)?;
                probe.get_mut(id).value.data_mut()[k] = orig - h;
                let minus = eval(&probe)?;
                let numeric = (plus - minus) / (2.0 * h);
                let denom = a.abs().max(numeric.abs()).max(1e-8);
                best = best.min((a - numeric).abs() / denom);
            }
            probe.get_mut(id).value.data_mut()[k] = orig;
            worst = worst.max(best);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::Rng;

    #[test]
    fn quadratic_is_exact() {
        let mut rng = crate::seed::rng(1);
        let mut s = ParamStore::new();
        let data = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w = s.add("w", Tensor::from_vec(2, 3, data).unwrap()).unwrap();
        let err = grad_check(
            |t, s| {
                let v = t.param(s, w);
                let sq = t.mul(v, v)?;
                Ok(t.sum(sq))
            },
            &s,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let mut s = ParamStore::new();
        let w = s
            .add("w", Tensor::from_vec(1, 2, vec![0.7, -1.3]).unwrap())
            .unwrap();
        // relu'(0) is taken as 0 on the tape; away from 0 any step agrees
        let err = grad_check(
            |t, s| {
                let v = t.param(s, w);
                let r = t.relu(v);
                let sq = t.mul(r, v)?;
                Ok(t.sum(sq))
            },
            &s,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-6, "{err}");
        // a deliberately broken objective: the tape sees v, the probe sees 2v
        let err = grad_check(
            |t, s| {
                let v = t.param(s, w);
                let c = t.constant(s.get(w).value.clone());
                let p = t.add(v, c)?;
                Ok(t.sum(p))
            },
            &s,
            1e-5,
        )
        .unwrap();
        assert!(err > 0.4, "{err}");
    }

    #[test]
    fn rejects_bad_eps() {
        let s = ParamStore::new();
        assert!(grad_check(|t, _| Ok(t.constant(Tensor::scalar(0.0))), &s, 1.0).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = ParamStore::new();
        let w = s.add("w", Tensor::scalar(f64::INFINITY)).unwrap();
        let r = grad_check(|t, s| Ok(t.param(s, w)), &s, 1e-5);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
