//! Geodetic conversion into the local east-north-up frame and planar bearings.
//!
//! Everything downstream of this module works in meters and radians in a
//! tangent frame anchored at a configurable origin (by default the airport
//! reference point).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// WGS-84 ellipsoid.
const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// One timestamped GPS fix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodeticFix {
    /// Seconds since the Unix epoch.
    pub t: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

/// Anchor of the local tangent frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnuOrigin {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl EnuOrigin {
    /// Seattle-Tacoma International airport reference point.
    pub const SEA: EnuOrigin = EnuOrigin {
        lat_deg: 47.4489,
        lon_deg: -122.3094,
        alt_m: 0.0,
    };

    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Result<Self> {
        check_geodetic(lat_deg, lon_deg, alt_m)?;
        Ok(Self {
            lat_deg,
            lon_deg,
            alt_m,
        })
    }
}

impl Default for EnuOrigin {
    fn default() -> Self {
        Self::SEA
    }
}

/// Airplane configuration in the local frame: meters east, north, up and a
/// bearing measured from the +x (east) axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuousState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub phi: f64,
}

impl ContinuousState {
    /// Builds a state, wrapping the bearing into `[-pi, pi)`.
    pub fn new(x: f64, y: f64, z: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            z,
            phi: wrap_angle(phi),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.phi.is_finite()
    }

    pub fn planar_distance(&self, other: &ContinuousState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance(&self, other: &ContinuousState) -> f64 {
        let dz = self.z - other.z;
        (self.planar_distance(other).powi(2) + dz * dz).sqrt()
    }
}

/// Wraps an angle into the half-open interval `[-pi, pi)`; `+pi` maps to `-pi`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let mut w = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid may round up to exactly TAU for tiny negative inputs.
    if w >= PI {
        w -= TAU;
    }
    w
}

/// Smallest signed difference `a - b`, wrapped.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

fn check_geodetic(lat: f64, lon: f64, alt: f64) -> Result<()> {
    if !(lat.is_finite() && lon.is_finite() && alt.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite geodetic coordinate ({lat}, {lon}, {alt})"
        )));
    }
    if !(-90.0..=90.0).contains(&lat) {
        return Err(Error::invalid(format!("latitude {lat} outside [-90, 90]")));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(Error::invalid(format!("longitude {lon} outside [-180, 180]")));
    }
    Ok(())
}

fn geodetic_to_ecef(lat_deg: f64, lon_deg: f64, alt: f64) -> [f64; 3] {
    let (slat, clat) = lat_deg.to_radians().sin_cos();
    let (slon, clon) = lon_deg.to_radians().sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * slat * slat).sqrt();
    [
        (n + alt) * clat * clon,
        (n + alt) * clat * slon,
        (n * (1.0 - WGS84_E2) + alt) * slat,
    ]
}

/// Converts a fix into `(east, north, up)` meters relative to `origin` via
/// the ellipsoidal WGS-84 -> ECEF -> ENU chain.
pub fn wgs84_to_enu(fix: &GeodeticFix, origin: &EnuOrigin) -> Result<[f64; 3]> {
    if !fix.t.is_finite() {
        return Err(Error::invalid(format!("non-finite timestamp {}", fix.t)));
    }
    check_geodetic(fix.lat_deg, fix.lon_deg, fix.alt_m)?;
    check_geodetic(origin.lat_deg, origin.lon_deg, origin.alt_m)?;

    let p = geodetic_to_ecef(fix.lat_deg, fix.lon_deg, fix.alt_m);
    let o = geodetic_to_ecef(origin.lat_deg, origin.lon_deg, origin.alt_m);
    let d = [p[0] - o[0], p[1] - o[1], p[2] - o[2]];

    let (slat, clat) = origin.lat_deg.to_radians().sin_cos();
    let (slon, clon) = origin.lon_deg.to_radians().sin_cos();
    let east = -slon * d[0] + clon * d[1];
    let north = -slat * clon * d[0] - slat * slon * d[1] + clat * d[2];
    let up = clat * clon * d[0] + clat * slon * d[1] + slat * d[2];
    Ok([east, north, up])
}

/// Bearing of the displacement `from -> to`, measured from +x and wrapped.
pub fn bearing_from_positions(from: (f64, f64), to: (f64, f64)) -> Result<f64> {
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentPoints {
            x: from.0,
            y: from.1,
        });
    }
    Ok(wrap_angle(dy.atan2(dx)))
}
