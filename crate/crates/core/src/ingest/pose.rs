//! Whole-body pose templates in box-normalized coordinates.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseTemplate {
    Standing,
    ArmsUp,
    Walking,
    Sitting,
}

impl PoseTemplate {
    pub const ALL: [PoseTemplate; 4] = [
        PoseTemplate::Standing,
        PoseTemplate::ArmsUp,
        PoseTemplate::Walking,
        PoseTemplate::Sitting,
    ];

    /// The 17 body joints, (x, y) in [0, 1]² of the person box.
    pub fn body(self) -> [(f64, f64); 17] {
        let mut b = [
            (0.50, 0.08),
            (0.53, 0.06),
            (0.47, 0.06),
            (0.56, 0.07),
            (0.44, 0.07),
            (0.66, 0.20),
            (0.34, 0.20),
            (0.72, 0.36),
            (0.28, 0.36),
            (0.75, 0.50),
            (0.25, 0.50),
            (0.60, 0.52),
            (0.40, 0.52),
            (0.61, 0.73),
            (0.39, 0.73),
            (0.61, 0.93),
            (0.39, 0.93),
        ];
        match self {
            PoseTemplate::Standing => {}
            PoseTemplate::ArmsUp => {
                b[7] = (0.78, 0.12);
                b[8] = (0.22, 0.12);
                b[9] = (0.82, 0.03);
                b[10] = (0.18, 0.03);
            }
            PoseTemplate::Walking => {
                b[13] = (0.70, 0.72);
                b[14] = (0.33, 0.74);
                b[15] = (0.78, 0.93);
                b[16] = (0.25, 0.92);
                b[9] = (0.70, 0.52);
                b[10] = (0.32, 0.47);
            }
            PoseTemplate::Sitting => {
                b[11] = (0.60, 0.62);
                b[12] = (0.40, 0.62);
                b[13] = (0.85, 0.66);
                b[14] = (0.68, 0.68);
                b[15] = (0.86, 0.93);
                b[16] = (0.70, 0.94);
                b[9] = (0.72, 0.58);
                b[10] = (0.30, 0.58);
            }
        }
        b
    }

    /// All 133 whole-body points: body, feet, face contour, two hands.
    pub fn whole_body(self) -> Vec<(f64, f64)> {
        let body = self.body();
        let mut pts: Vec<(f64, f64)> = body.to_vec();
        for &(ankle, dir) in &[(15usize, 1.0), (16usize, -1.0)] {
            let (x, y) = body[ankle];
            pts.push((x + 0.03 * dir, y + 0.04));
            pts.push((x + 0.05 * dir, y + 0.035));
            pts.push((x - 0.01 * dir, y + 0.03));
        }
        let (nx, ny) = body[0];
        for k in 0..68 {
            let a = 2.0 * PI * k as f64 / 68.0;
            pts.push((nx + 0.045 * a.cos(), ny + 0.05 * a.sin()));
        }
        for &(wrist, elbow) in &[(9usize, 7usize), (10usize, 8usize)] {
            let (wx, wy) = body[wrist];
            let (ex, ey) = body[elbow];
            let base = (wy - ey).atan2(wx - ex);
            pts.push((wx, wy));
            for finger in 0..5 {
                let a = base + (finger as f64 - 2.0) * 0.3;
                for joint in 1..=4 {
                    let r = 0.012 * joint as f64;
                    pts.push((wx + r * a.cos(), wy + r * a.sin()));
                }
            }
        }
        pts.into_iter()
            .map(|(x, y)| (x.clamp(0.0, 1.0), y.clamp(0.0, 1.0)))
            .collect()
    }

    /// Jittered template clamped to the unit square.
    pub fn sample(self, jitter: f64, rng: &mut impl Rng) -> Vec<(f64, f64)> {
        self.whole_body()
            .into_iter()
            .map(|(x, y)| {
                let dx = rng.gen_range(-jitter..=jitter);
                let dy = rng.gen_range(-jitter..=jitter);
                ((x + dx).clamp(0.0, 1.0), (y + dy).clamp(0.0, 1.0))
            })
            .collect()
    }
}
