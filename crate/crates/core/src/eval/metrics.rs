use serde::{Deserialize, Serialize};

/// Which part of a position error enters an RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    ThreeD,
    /// Horizontal (x, y).
    TwoD,
    /// Vertical (z).
    Vertical,
}

fn squared(truth: &[f64; 3], est: &[f64; 3], c: Component) -> f64 {
    let d = [est[0] - truth[0], est[1] - truth[1], est[2] - truth[2]];
    match c {
        Component::ThreeD => d[0] * d[0] + d[1] * d[1] + d[2] * d[2],
        Component::TwoD => d[0] * d[0] + d[1] * d[1],
        Component::Vertical => d[2] * d[2],
    }
}

/// Root mean squared position error over the epochs after the first
/// `warmup`. NaN when no epoch remains.
pub fn rmse(truth: &[[f64; 3]], estimate: &[[f64; 3]], component: Component, warmup: usize) -> f64 {
    let sq: Vec<f64> = truth.iter().zip(estimate).skip(warmup).map(|(t, e)| squared(t, e, component)).collect();
    root_mean(&sq)
}

/// Scalar counterpart of [`rmse`].
pub fn rmse_scalar(truth: &[f64], estimate: &[f64], warmup: usize) -> f64 {
    let sq: Vec<f64> = truth.iter().zip(estimate).skip(warmup).map(|(t, e)| (e - t) * (e - t)).collect();
    root_mean(&sq)
}

pub(crate) fn root_mean(squares: &[f64]) -> f64 {
    if squares.is_empty() {
        return f64::NAN;
    }
    (squares.iter().sum::<f64>() / squares.len() as f64).sqrt()
}

/// Median of the finite values; NaN if there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Error metrics of one filter mode, for one replication or pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// m.
    #[serde(with = "nullable")]
    pub rmse_3d: f64,
    #[serde(with = "nullable")]
    pub rmse_2d: f64,
    #[serde(with = "nullable")]
    pub rmse_z: f64,
    /// User-node clock offset, ns.
    #[serde(with = "nullable")]
    pub rmse_clock_un_ns: f64,
    /// Non-reference line-of-sight node offsets, ns; `None` outside
    /// Pos&Sync.
    pub rmse_clock_an_ns: Option<f64>,
}

/// Writes non-finite values as `null` and reads `null` back as NaN.
pub(crate) mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_vertical_error() {
        let t = vec![[1.0, 2.0, 3.0]; 10];
        let e = vec![[1.0, 2.0, 4.0]; 10];
        assert_eq!(rmse(&t, &e, Component::Vertical, 0), 1.0);
        assert_eq!(rmse(&t, &e, Component::TwoD, 0), 0.0);
        assert_eq!(rmse(&t, &e, Component::ThreeD, 0), 1.0);
    }

    #[test]
    fn alternating_error() {
        let t = vec![0.0; 8];
        let e: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 2.0 } else { -2.0 }).collect();
        assert_eq!(rmse_scalar(&t, &e, 0), 2.0);
    }

    #[test]
    fn warmup_is_excluded() {
        let t = vec![0.0; 4];
        let e = vec![100.0, 100.0, 1.0, 1.0];
        assert_eq!(rmse_scalar(&t, &e, 2), 1.0);
        assert!(rmse_scalar(&t, &e, 4).is_nan());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[f64::NAN, 1.0]), 1.0);
        assert!(median(&[]).is_nan());
    }

    proptest! {
        #[test]
        fn pythagoras_per_epoch(pts in prop::collection::vec((prop::array::uniform3(-50.0f64..50.0), prop::array::uniform3(-50.0f64..50.0)), 1..40)) {
            let (t, e): (Vec<_>, Vec<_>) = pts.into_iter().unzip();
            let r3 = rmse(&t, &e, Component::ThreeD, 0);
            let r2 = rmse(&t, &e, Component::TwoD, 0);
            let rz = rmse(&t, &e, Component::Vertical, 0);
            prop_assert!((r3 * r3 - (r2 * r2 + rz * rz)).abs() <= 1e-9 * r3 * r3 + 1e-12);
        }
    }
}
