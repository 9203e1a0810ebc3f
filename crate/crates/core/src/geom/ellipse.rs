use std::f64::consts::PI;

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// Moment-based ellipse fitted to a filled 2D region of samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipseFit {
    pub center: Vector2<f64>,
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from +x, radians in `(-π/2, π/2]`.
    pub orientation: f64,
}

impl EllipseFit {
    pub fn area(&self) -> f64 {
        PI * self.semi_major * self.semi_minor
    }
}

/// Fits `a = 2√λ₁`, `b = 2√λ₂` from the eigenvalues of the 2D covariance.
///
/// For points drawn uniformly from a filled ellipse the variance along an
/// axis is `s²/4`, so the estimate is exact in expectation.
pub fn fit_ellipse(points: &[Vector2<f64>]) -> Result<EllipseFit> {
    if points.len() < 5 {
        return Err(Error::DegenerateInput(format!(
            "ellipse fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let center = points.iter().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p - center;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    sxx /= n;
    syy /= n;
    sxy /= n;

    let mid = (sxx + syy) / 2.0;
    let rad = (((sxx - syy) / 2.0).powi(2) + sxy * sxy).sqrt();
    let l1 = mid + rad;
    let l2 = mid - rad;
    if !(l2 > f64::EPSILON * l1) || !l1.is_finite() {
        return Err(Error::DegenerateInput("zero covariance in ellipse fit".into()));
    }
    Ok(EllipseFit {
        center,
        semi_major: 2.0 * l1.sqrt(),
        semi_minor: 2.0 * l2.sqrt(),
        orientation: 0.5 * (2.0 * sxy).atan2(sxx - syy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn filled_ellipse(a: f64, b: f64, n: usize, seed: u64) -> Vec<Vector2<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            if x * x + y * y <= 1.0 {
                out.push(Vector2::new(a * x, b * y));
            }
        }
        out
    }

    #[test]
    fn unit_disc() {
        let fit = fit_ellipse(&filled_ellipse(1.0, 1.0, 100_000, 1)).unwrap();
        assert!((fit.semi_major - 1.0).abs() < 0.02);
        assert!((fit.semi_minor - 1.0).abs() < 0.02);
        assert!((fit.area() - PI).abs() / PI < 0.02);
    }

    #[test]
    fn three_by_two() {
        let fit = fit_ellipse(&filled_ellipse(3.0, 2.0, 100_000, 2)).unwrap();
        assert!((fit.area() - 6.0 * PI).abs() / (6.0 * PI) < 0.02);
        assert!(fit.orientation.abs() < 0.02);
    }

    #[test]
    fn rejects_few_or_collinear() {
        let few: Vec<_> = (0..4).map(|i| Vector2::new(i as f64, 0.5 * i as f64)).collect();
        assert!(fit_ellipse(&few).is_err());
        let line: Vec<_> = (0..50).map(|i| Vector2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(fit_ellipse(&line), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn area_is_pi_a_b() {
        let fit = fit_ellipse(&filled_ellipse(0.7, 0.3, 500, 3)).unwrap();
        assert_eq!(fit.area(), PI * fit.semi_major * fit.semi_minor);
    }
}
