//! Symmetric quadrature rules on tetrahedra, in barycentric coordinates.
//!
//! Weights are fractions of the element volume and sum to one.

/// A point given by its four barycentric coordinates and a volume fraction.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub bary: [f64; 4],
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct TetRule {
    pub degree: usize,
    pub points: Vec<QuadPoint>,
}

fn permutations_aaab(a: f64, b: f64, weight: f64) -> Vec<QuadPoint> {
    (0..4)
        .map(|i| {
            let mut bary = [b; 4];
            bary[i] = a;
            QuadPoint { bary, weight }
        })
        .collect()
}

fn permutations_aabb(a: f64, b: f64, weight: f64) -> Vec<QuadPoint> {
    const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    PAIRS
        .iter()
        .map(|&(i, j)| {
            let mut bary = [b; 4];
            bary[i] = a;
            bary[j] = a;
            QuadPoint { bary, weight }
        })
        .collect()
}

impl TetRule {
    pub fn centroid() -> Self {
        TetRule {
            degree: 1,
            points: vec![QuadPoint {
                bary: [0.25; 4],
                weight: 1.0,
            }],
        }
    }

    /// Four-point rule, exact for quadratics.
    pub fn degree2() -> Self {
        let b = (5.0 - 5.0_f64.sqrt()) / 20.0;
        let a = 1.0 - 3.0 * b;
        TetRule {
            degree: 2,
            points: permutations_aaab(a, b, 0.25),
        }
    }

    /// Keast five-point rule, exact for cubics (one negative weight).
    pub fn degree3() -> Self {
        let mut points = vec![QuadPoint {
            bary: [0.25; 4],
            weight: -0.8,
        }];
        points.extend(permutations_aaab(0.5, 1.0 / 6.0, 0.45));
        TetRule { degree: 3, points }
    }

    /// Keast eleven-point rule, exact for quartics.
    pub fn degree4() -> Self {
        let mut points = vec![QuadPoint {
            bary: [0.25; 4],
            weight: -74.0 / 5625.0 * 6.0,
        }];
        points.extend(permutations_aaab(
            11.0 / 14.0,
            1.0 / 14.0,
            343.0 / 45000.0 * 6.0,
        ));
        let a = 0.25 * (1.0 + (5.0_f64 / 14.0).sqrt());
        let b = 0.25 * (1.0 - (5.0_f64 / 14.0).sqrt());
        points.extend(permutations_aabb(a, b, 56.0 / 2250.0 * 6.0));
        TetRule { degree: 4, points }
    }

    pub fn of_degree(degree: usize) -> Self {
        match degree {
            0 | 1 => Self::centroid(),
            2 => Self::degree2(),
            3 => Self::degree3(),
            _ => Self::degree4(),
        }
    }
}

/// Two-point Gauss–Legendre rule on the unit interval `[0, 1]`.
pub const GAUSS2_UNIT: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];
