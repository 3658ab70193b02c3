//! Small 3-vector helpers shared by every module.

/// A point or vector in either voxel or physical space.
pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm2(a: Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    libm::sqrt(norm2(a))
}

#[inline]
pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Component-wise product, used to map voxel coordinates to physical ones.
#[inline]
pub fn mul(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] * b[0], a[1] * b[1], a[2] * b[2]]
}

/// Physical length of the voxel-space segment `a -> b`.
#[inline]
pub fn physical_dist(a: Vec3, b: Vec3, spacing: Vec3) -> f64 {
    norm(mul(sub(a, b), spacing))
}

/// Euclidean distance from `p` to the closed segment `a -> b`.
pub fn point_segment_dist(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = sub(b, a);
    let len2 = norm2(ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = dot(sub(p, a), ab) / len2;
    if t <= 0.0 {
        dist(p, a)
    } else if t >= 1.0 {
        dist(p, b)
    } else {
        // a + t·ab can miss b by an ulp, so take the endpoints exactly
        dist(p, add(a, scale(ab, t))).min(dist(p, a)).min(dist(p, b))
    }
}

/// Length of a polyline given in voxel coordinates, measured in physical units.
pub fn polyline_length(points: &[Vec3], spacing: Vec3) -> f64 {
    points
        .windows(2)
        .map(|w| physical_dist(w[0], w[1], spacing))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_clamps_to_endpoints() {
        let a = [0.0, 0.0, 0.0];
        let b = [2.0, 0.0, 0.0];
        assert_eq!(point_segment_dist([1.0, 1.0, 0.0], a, b), 1.0);
        assert_eq!(point_segment_dist([-3.0, 4.0, 0.0], a, b), 5.0);
        assert_eq!(point_segment_dist([5.0, 0.0, 0.0], a, a), 5.0);
    }

    #[test]
    fn anisotropic_length() {
        let pts = [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 1.0]];
        assert_eq!(polyline_length(&pts, [1.0, 1.0, 10.0]), 11.0);
    }
}
