//! Small 3-vector helpers shared by the environment and metrics.

pub type Point = [f64; 3];

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Distance from point `p` to the segment `a`-`b`.
pub fn segment_point_distance(a: Point, b: Point, p: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dist(a, p);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(add(a, scale(ab, t)), p)
}

/// 3x3 rotation matrix, row-major.
#[derive(Debug, Clone, Copy)]
pub struct Rot3(pub [[f64; 3]; 3]);

impl Rot3 {
    pub fn identity() -> Self {
        Rot3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn about_z(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Rot3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn about_y(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Rot3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn mul(&self, other: &Rot3) -> Rot3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Rot3(out)
    }

    pub fn apply(&self, v: Point) -> Point {
        [
            dot(self.0[0], v),
            dot(self.0[1], v),
            dot(self.0[2], v),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_endpoints_and_interior() {
        let a = [0.0, 0.0, 0.0];
        let b = [2.0, 0.0, 0.0];
        assert_eq!(segment_point_distance(a, b, [1.0, 1.0, 0.0]), 1.0);
        assert_eq!(segment_point_distance(a, b, [-1.0, 0.0, 0.0]), 1.0);
        assert_eq!(segment_point_distance(a, b, [3.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn degenerate_segment_is_point_distance() {
        let a = [1.0, 1.0, 0.0];
        assert_eq!(segment_point_distance(a, a, [1.0, 3.0, 0.0]), 2.0);
    }
}
