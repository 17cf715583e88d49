//! Viewing-frustum detection: an object is seen when all four front-face
//! corners sit inside the sensor volume.

use super::motion::AgentPose;
use super::scene::SceneObject;

/// Truncated-pyramid sensing volume, mounted horizontally at a fixed height.
#[derive(Debug, Clone, Copy)]
pub struct FrustumSpec {
    pub near: f64,
    pub far: f64,
    /// Full horizontal field of view, radians.
    pub hfov: f64,
    /// Full vertical field of view, radians.
    pub vfov: f64,
    pub mount_height: f64,
}

impl FrustumSpec {
    pub fn validate(&self) -> bool {
        self.near > 0.0
            && self.near < self.far
            && self.hfov > 0.0
            && self.hfov < std::f64::consts::PI
            && self.vfov > 0.0
            && self.vfov < std::f64::consts::PI
            && self.mount_height >= 0.0
    }

    /// Point-in-frustum test in the sensor frame of the given pose.
    pub fn contains(&self, pose: &AgentPose, point: [f64; 3]) -> bool {
        let (sin, cos) = pose.heading.sin_cos();
        let dx = point[0] - pose.x;
        let dy = point[1] - pose.y;
        let forward = dx * cos + dy * sin;
        if forward < self.near || forward > self.far {
            return false;
        }
        let lateral = -dx * sin + dy * cos;
        if lateral.abs() > forward * (self.hfov / 2.0).tan() {
            return false;
        }
        let vertical = point[2] - self.mount_height;
        vertical.abs() <= forward * (self.vfov / 2.0).tan()
    }
}

/// Returns the nearest object whose entire front face lies inside the
/// frustum, if any.
pub fn frustum_detect<'a>(
    pose: &AgentPose,
    frustum: &FrustumSpec,
    objects: &'a [SceneObject],
) -> Option<&'a SceneObject> {
    let mut best: Option<(&SceneObject, f64)> = None;
    for obj in objects {
        let visible = obj
            .front_face_corners()
            .iter()
            .all(|&corner| frustum.contains(pose, corner));
        if !visible {
            continue;
        }
        let dx = obj.center[0] - pose.x;
        let dy = obj.center[1] - pose.y;
        let dist = dx * dx + dy * dy;
        if best.is_none_or(|(_, d)| dist < d) {
            best = Some((obj, dist));
        }
    }
    best.map(|(obj, _)| obj)
}
