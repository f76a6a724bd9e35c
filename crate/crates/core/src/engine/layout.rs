//! Where chart parts and widgets sit in the world.
//!
//! A chart stands on its floor point. The time axis starts at
//! `base_height_m` and runs up for `length_m`. The widgets hang just
//! below the axis: the mode toggle on the axis itself, the variable axis
//! spheres at the chart radius, the rotation handle as a ring slightly
//! outside them.

use crate::chart::ChartInstance;
use crate::geom::{azimuth_dir, horizontal_dist, Vec3};

use super::EngineConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPlacement {
    /// Floor point of the time axis.
    pub floor: Vec3,
    pub base_h: f64,
    pub length_m: f64,
    pub radius_m: f64,
    pub yaw_rad: f64,
}

impl ChartPlacement {
    pub fn new(config: &EngineConfig, floor: [f64; 2], chart: &ChartInstance) -> Self {
        Self {
            floor: Vec3::new(floor[0], 0.0, floor[1]),
            base_h: config.base_height_m,
            length_m: chart.length_m,
            radius_m: chart.radius_m,
            yaw_rad: chart.yaw_rad,
        }
    }

    pub fn axis_point(&self, h: f64) -> Vec3 {
        self.floor + Vec3::new(0.0, self.base_h + h, 0.0)
    }

    /// Middle of the time axis; the aim point for travel.
    pub fn center(&self) -> Vec3 {
        self.axis_point(self.length_m / 2.0)
    }

    pub fn top(&self) -> f64 {
        self.base_h + self.length_m
    }

    pub fn toggle_center(&self, config: &EngineConfig) -> Vec3 {
        self.axis_point(-config.toggle_drop_m)
    }

    pub fn widget_height(&self, config: &EngineConfig) -> f64 {
        self.base_h - config.widget_drop_m
    }

    pub fn ring_radius(&self, config: &EngineConfig) -> f64 {
        self.radius_m + config.handle_offset_m
    }

    /// World position of the axis sphere at chart-local `angle`.
    pub fn sphere_center(&self, config: &EngineConfig, angle: f64) -> Vec3 {
        let d = azimuth_dir(self.yaw_rad + angle);
        Vec3::new(
            self.floor.x + d.x * self.radius_m,
            self.widget_height(config),
            self.floor.z + d.z * self.radius_m,
        )
    }

    /// Distance from `p` to the rotation handle ring.
    pub fn ring_distance(&self, config: &EngineConfig, p: &Vec3) -> f64 {
        let dr = horizontal_dist(&self.floor, p) - self.ring_radius(config);
        let dy = p.y - self.widget_height(config);
        (dr * dr + dy * dy).sqrt()
    }

    /// Whether `p` is within `capture` of the chart's axis column.
    pub fn in_column(&self, p: &Vec3, capture: f64) -> bool {
        horizontal_dist(&self.floor, p) <= self.radius_m + capture
            && p.y >= self.base_h - capture
            && p.y <= self.top() + capture
    }

    /// Ray parameter where a ray enters the chart's bounding cylinder.
    pub fn ray_hit(&self, config: &EngineConfig, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let r = self.ring_radius(config);
        let (ox, oz) = (origin.x - self.floor.x, origin.z - self.floor.z);
        let a = dir.x * dir.x + dir.z * dir.z;
        if a < 1e-12 {
            return None;
        }
        let b = 2.0 * (ox * dir.x + oz * dir.z);
        let c = ox * ox + oz * oz - r * r;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let s_in = ((-b - sq) / (2.0 * a)).max(0.0);
        let s_out = (-b + sq) / (2.0 * a);
        if s_out < s_in {
            return None;
        }
        // Heights along the ray are linear in s; intersect with [0, top].
        let (y_in, y_out) = (origin.y + dir.y * s_in, origin.y + dir.y * s_out);
        let top = self.top();
        if y_in.max(y_out) < 0.0 || y_in.min(y_out) > top {
            return None;
        }
        if (0.0..=top).contains(&y_in) {
            return Some(s_in);
        }
        // Enters through a cap.
        let cap = if y_in > top { top } else { 0.0 };
        Some(s_in + (cap - y_in) / dir.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Entity;

    fn placement() -> (EngineConfig, ChartPlacement) {
        let cfg = EngineConfig::default();
        let e = Entity {
            id: "a".into(),
            name: "a".into(),
            x: 3.0,
            y: -2.0,
            series: vec![vec![0.0, 1.0]],
        };
        let chart = ChartInstance::new(&e, &cfg.chart);
        let p = ChartPlacement::new(&cfg, [e.x, e.y], &chart);
        (cfg, p)
    }

    #[test]
    fn ray_hits_side_and_misses_above() {
        let (cfg, p) = placement();
        let origin = Vec3::new(3.0, 1.2, -10.0);
        let s = p.ray_hit(&cfg, &origin, &Vec3::z()).unwrap();
        assert!((s - (8.0 - p.ring_radius(&cfg))).abs() < 1e-9);
        let high = Vec3::new(3.0, 2.5, -10.0);
        assert!(p.ray_hit(&cfg, &high, &Vec3::z()).is_none());
        assert!(p.ray_hit(&cfg, &origin, &-Vec3::z()).is_none());
    }

    #[test]
    fn ray_through_top_cap() {
        let (cfg, p) = placement();
        let origin = Vec3::new(3.0, 2.0, -2.3);
        let dir = Vec3::new(0.0, -1.0, 1.0).normalize();
        let s = p.ray_hit(&cfg, &origin, &dir).unwrap();
        let hit = origin + dir * s;
        assert!((hit.y - p.top()).abs() < 1e-9);
    }

    #[test]
    fn sphere_positions_follow_yaw() {
        let (cfg, mut p) = placement();
        let a = p.sphere_center(&cfg, 0.0);
        assert!((a.x - (3.0 + p.radius_m)).abs() < 1e-12);
        p.yaw_rad = std::f64::consts::FRAC_PI_2;
        let b = p.sphere_center(&cfg, 0.0);
        assert!((b.z - (-2.0 + p.radius_m)).abs() < 1e-12);
        assert!(p.ring_distance(&cfg, &Vec3::new(3.0 + p.ring_radius(&cfg), p.widget_height(&cfg), -2.0)) < 1e-12);
    }
}
