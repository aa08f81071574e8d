//! WGS-84 geodetic / Earth-fixed conversions and local frames.

use nalgebra::Vector3;

use super::GroundPoint;

/// Semi-major axis, meters.
pub const A: f64 = 6_378_137.0;
/// Flattening.
pub const F: f64 = 1.0 / 298.257_223_563;
/// First eccentricity squared.
pub const E2: f64 = F * (2.0 - F);
/// Semi-minor axis, meters.
pub const B: f64 = A * (1.0 - F);
/// Mean Earth radius, meters.
pub const MEAN_RADIUS: f64 = 6_371_008.8;

/// Geodetic (deg, deg, m) to Earth-fixed cartesian, meters.
pub fn geodetic_to_ecef(p: &GroundPoint) -> Vector3<f64> {
    let (lat, lon) = (p.latitude.to_radians(), p.longitude.to_radians());
    let (sin_lat, cos_lat) = lat.sin_cos();
    let n = A / (1.0 - E2 * sin_lat * sin_lat).sqrt();
    Vector3::new(
        (n + p.altitude) * cos_lat * lon.cos(),
        (n + p.altitude) * cos_lat * lon.sin(),
        (n * (1.0 - E2) + p.altitude) * sin_lat,
    )
}

/// Earth-fixed cartesian to geodetic. Iterates the latitude to machine
/// precision; the height formula stays well conditioned at the poles.
pub fn ecef_to_geodetic(r: &Vector3<f64>) -> GroundPoint {
    let p = r.x.hypot(r.y);
    let lon = r.y.atan2(r.x);
    let mut lat = r.z.atan2(p * (1.0 - E2));
    for _ in 0..20 {
        let sin_lat = lat.sin();
        let n = A / (1.0 - E2 * sin_lat * sin_lat).sqrt();
        let next = (r.z + E2 * n * sin_lat).atan2(p);
        let done = (next - lat).abs() < 1e-15;
        lat = next;
        if done {
            break;
        }
    }
    let (sin_lat, cos_lat) = lat.sin_cos();
    let alt = p * cos_lat + r.z * sin_lat - A * (1.0 - E2 * sin_lat * sin_lat).sqrt();
    GroundPoint::new(lat.to_degrees(), lon.to_degrees(), alt)
}

/// Unit vectors (east, north, up) of the local tangent frame at a point.
pub fn enu_basis(p: &GroundPoint) -> [Vector3<f64>; 3] {
    let (sin_lat, cos_lat) = p.latitude.to_radians().sin_cos();
    let (sin_lon, cos_lon) = p.longitude.to_radians().sin_cos();
    [
        Vector3::new(-sin_lon, cos_lon, 0.0),
        Vector3::new(-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat),
        Vector3::new(cos_lat * cos_lon, cos_lat * sin_lon, sin_lat),
    ]
}

/// First intersection of the ray `origin + s·dir` (s > 0) with the ellipsoid
/// raised by `altitude` meters (semi-axes `A + altitude`, `B + altitude`).
pub fn ray_ellipsoid(origin: &Vector3<f64>, dir: &Vector3<f64>, altitude: f64) -> Option<Vector3<f64>> {
    let (a, b) = (A + altitude, B + altitude);
    let o = Vector3::new(origin.x / a, origin.y / a, origin.z / b);
    let d = Vector3::new(dir.x / a, dir.y / a, dir.z / b);
    let qa = d.norm_squared();
    let qb = 2.0 * o.dot(&d);
    let qc = o.norm_squared() - 1.0;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let q = -0.5 * (qb + qb.signum() * sq);
    let (r1, r2) = (q / qa, qc / q);
    let s = match (r1 > 0.0, r2 > 0.0) {
        (true, true) => r1.min(r2),
        (true, false) => r1,
        (false, true) => r2,
        (false, false) => return None,
    };
    Some(origin + dir * s)
}

/// Great-circle surface distance on the mean sphere, meters.
pub fn surface_distance(a: &GroundPoint, b: &GroundPoint) -> f64 {
    let (la1, la2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dlat = la2 - la1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * MEAN_RADIUS * h.sqrt().min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equator_and_pole() {
        let r = geodetic_to_ecef(&GroundPoint::new(0.0, 0.0, 0.0));
        assert!((r.x - A).abs() < 1e-9 && r.y.abs() < 1e-9 && r.z.abs() < 1e-9);
        let pole = geodetic_to_ecef(&GroundPoint::new(90.0, 0.0, 100.0));
        assert!((pole.z - (B + 100.0)).abs() < 1e-6);
        let back = ecef_to_geodetic(&pole);
        assert!((back.latitude - 90.0).abs() < 1e-9);
        assert!((back.altitude - 100.0).abs() < 1e-6);
    }

    #[test]
    fn nadir_ray_hits_subpoint() {
        let sat = GroundPoint::new(40.0, -120.0, 832_100.0);
        let origin = geodetic_to_ecef(&sat);
        let down = -enu_basis(&sat)[2];
        let hit = ray_ellipsoid(&origin, &down, 0.0).unwrap();
        let g = ecef_to_geodetic(&hit);
        assert!((g.latitude - 40.0).abs() < 1e-9);
        assert!((g.longitude + 120.0).abs() < 1e-9);
        assert!(g.altitude.abs() < 1e-6);
        assert!(ray_ellipsoid(&origin, &-down, 0.0).is_none());
    }

    proptest! {
        #[test]
        fn geodetic_roundtrip(lat in -90.0f64..=90.0, lon in -179.999f64..180.0, alt in -500.0f64..2.0e6) {
            let p = GroundPoint::new(lat, lon, alt);
            let q = ecef_to_geodetic(&geodetic_to_ecef(&p));
            prop_assert!((q.latitude - p.latitude).abs() < 1e-9);
            if lat.abs() < 89.9999 {
                prop_assert!((q.longitude - p.longitude).abs() < 1e-9);
            }
            prop_assert!((q.altitude - p.altitude).abs() < 1e-3);
        }
    }
}
