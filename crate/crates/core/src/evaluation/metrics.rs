use crate::error::{check_len, Error, Result};
use crate::models::BoltzmannMachine;

/// Root mean square error over all entries.
pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("rmse operand", y.len(), x.len())?;
    if x.is_empty() {
        return Err(Error::Undefined("rmse of empty input".into()));
    }
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sse / x.len() as f64).sqrt())
}

/// Pearson correlation over all entries, flattened.
pub fn pcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("pcc operand", y.len(), x.len())?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::Undefined("pcc needs non-zero variance in both inputs".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Deterministic mean-field reconstruction: hidden probabilities given `v`,
/// then the visible conditional means at those soft hidden states.
pub fn reconstruct(m: &BoltzmannMachine, v: &[f64]) -> Result<Vec<f64>> {
    let h = m.hidden_conditional(v)?;
    Ok(m.visible_conditional(&h)?.mean)
}

/// Reconstructs every row of a row-major matrix.
pub fn reconstruct_rows(m: &BoltzmannMachine, rows: &[f64]) -> Result<Vec<f64>> {
    let n_v = m.n_visible();
    if rows.len() % n_v != 0 {
        return Err(Error::ShapeMismatch {
            what: "sample matrix",
            got: rows.len(),
            expected: n_v,
        });
    }
    let mut out = Vec::with_capacity(rows.len());
    for row in rows.chunks_exact(n_v) {
        out.extend(reconstruct(m, row)?);
    }
    Ok(out)
}

/// `(rmse, pcc)` of the mean-field reconstruction of `rows`. PCC is `None`
/// when undefined (constant data or reconstruction).
pub fn reconstruction_metrics(m: &BoltzmannMachine, rows: &[f64]) -> Result<(f64, Option<f64>)> {
    let rec = reconstruct_rows(m, rows)?;
    Ok((rmse(rows, &rec)?, pcc(rows, &rec).ok()))
}

/// Great-circle distance in kilometres between two `(lat, lon)` points in
/// degrees, on a sphere of radius 6371 km.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    const EARTH_RADIUS_KM: f64 = 6371.0;
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::VisibleKind;
    use crate::topology::BipartiteGraph;
    use proptest::prelude::*;

    #[test]
    fn identical_inputs() {
        let x = [1.0, -2.0, 0.5];
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        assert!((pcc(&x, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn anticorrelation() {
        let x = [1.0, -2.0, 0.5, 3.0];
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pcc(&x, &y).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_term_rmse() {
        let r = rmse(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert!((r - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_input_has_no_pcc() {
        assert!(matches!(pcc(&[1.0, 2.0], &[3.0, 3.0]), Err(Error::Undefined(_))));
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_model_reconstructions() {
        let b = BoltzmannMachine::zeros(VisibleKind::Binary, BipartiteGraph::complete(3, 2));
        assert_eq!(reconstruct(&b, &[1.0, 0.0, 1.0]).unwrap(), vec![0.5; 3]);
        let mut g = BoltzmannMachine::zeros(VisibleKind::Gaussian, BipartiteGraph::complete(3, 2));
        g.visible_bias_mut().copy_from_slice(&[0.1, 0.2, -0.3]);
        assert_eq!(reconstruct(&g, &[5.0, -1.0, 0.0]).unwrap(), vec![0.1, 0.2, -0.3]);
    }

    #[test]
    fn quarter_meridian() {
        let d = haversine_km((0.0, 0.0), (0.0, 90.0));
        assert!((d - std::f64::consts::PI * 6371.0 / 2.0).abs() < 1e-9);
        assert!((d - 10007.5).abs() < 0.1);
    }

    proptest! {
        #[test]
        fn symmetric_and_affine_invariant(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assert_eq!(rmse(&x, &y).unwrap(), rmse(&y, &x).unwrap());
            if let (Ok(a), Ok(b)) = (pcc(&x, &y), pcc(&y, &x)) {
                prop_assert!((a - b).abs() < 1e-12);
                let z: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
                prop_assert!((pcc(&z, &y).unwrap() - a).abs() < 1e-12);
            }
        }
    }
}
