//! Geographic coordinates, great-circle distance, and the
//! `within(x, y, distance)` spatial predicate that scopes bundle
//! transmission.

use thiserror::Error;

/// Mean Earth radius used by the haversine distance, in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GeoError {
    #[error("longitude {0} outside [-180, 180]")]
    InvalidLongitude(f64),
    #[error("latitude {0} outside [-90, 90]")]
    InvalidLatitude(f64),
    #[error("radius {0} must be finite and > 0")]
    InvalidRadius(f64),
}

/// A point on the sphere, decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    longitude: f64,
    latitude: f64,
}

impl GeoPoint {
    pub fn new(longitude: f64, latitude: f64) -> Result<Self, GeoError> {
        if !longitude.is_finite() || !(-180.0..=180.0).contains(&longitude) {
            return Err(GeoError::InvalidLongitude(longitude));
        }
        if !latitude.is_finite() || !(-90.0..=90.0).contains(&latitude) {
            return Err(GeoError::InvalidLatitude(latitude));
        }
        Ok(GeoPoint { longitude, latitude })
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }
}

/// Haversine great-circle distance in kilometres.
///
/// The formula is evaluated symmetrically in its arguments, so
/// `distance(a, b)` and `distance(b, a)` are bit-identical.
pub fn distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    if a == b {
        return 0.0;
    }
    let lat_a = a.latitude.to_radians();
    let lat_b = b.latitude.to_radians();
    let dlat = (b.latitude - a.latitude).to_radians() / 2.0;
    let dlon = (b.longitude - a.longitude).to_radians() / 2.0;
    let h = dlat.sin().powi(2) + lat_a.cos() * lat_b.cos() * dlon.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// The spatial scope `within(x, y, distance)`: true for points no farther
/// than `radius_km` from `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WithinPredicate {
    pub center: GeoPoint,
    radius_km: f64,
}

impl WithinPredicate {
    pub fn new(center: GeoPoint, radius_km: f64) -> Result<Self, GeoError> {
        if !radius_km.is_finite() || radius_km <= 0.0 {
            return Err(GeoError::InvalidRadius(radius_km));
        }
        Ok(WithinPredicate { center, radius_km })
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }

    /// Boundary is inclusive: a point at exactly `radius_km` satisfies the
    /// predicate, complementing the strict `>` test that selects STEM.
    pub fn contains(&self, p: &GeoPoint) -> bool {
        distance(p, &self.center) <= self.radius_km
    }
}

/// `within(p, pred)` as a free function, for symmetry with [`distance`].
pub fn within(p: &GeoPoint, pred: &WithinPredicate) -> bool {
    pred.contains(p)
}
