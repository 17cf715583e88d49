//! Diffusion motion: straight lines at constant speed, turning away from
//! walls, scene boxes, and other agents.

use rand::Rng;

use super::scene::{Arena, SceneObject};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose {
    pub x: f64,
    pub y: f64,
    /// Heading in radians; speed is carried in [`MotionParams`].
    pub heading: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MotionParams {
    /// Forward speed, m/s.
    pub speed: f64,
    /// Step duration, s.
    pub dt: f64,
    /// Distance at which walls, boxes, and other agents repel.
    pub avoid_radius: f64,
    /// Half-width of the random turn added when repelled, radians.
    pub jitter: f64,
}

/// Advances one step. In open space the agent moves exactly
/// `speed * dt` along its heading; near obstacles it turns away (with
/// jitter) and only moves if the move is safe. Walls and scene boxes are
/// never penetrated.
pub fn diffusion_step(
    pose: &AgentPose,
    arena: Arena,
    objects: &[SceneObject],
    others: &[[f64; 2]],
    params: &MotionParams,
    rng: &mut impl Rng,
) -> AgentPose {
    let mut heading = pose.heading;

    let repulsion = repulsion_vector(pose, arena, objects, others, params.avoid_radius);
    if let Some((rx, ry)) = repulsion {
        let away = ry.atan2(rx);
        let jitter = if params.jitter > 0.0 {
            rng.gen_range(-params.jitter..params.jitter)
        } else {
            0.0
        };
        heading = away + jitter;
    }

    let step = params.speed * params.dt;
    let nx = pose.x + heading.cos() * step;
    let ny = pose.y + heading.sin() * step;
    if position_free(nx, ny, arena, objects) {
        AgentPose { x: nx, y: ny, heading }
    } else {
        // blocked: rotate in place this step
        AgentPose { x: pose.x, y: pose.y, heading }
    }
}

fn position_free(x: f64, y: f64, arena: Arena, objects: &[SceneObject]) -> bool {
    arena.contains(x, y) && !objects.iter().any(|o| o.footprint_contains(x, y, 0.0))
}

/// Sum of unit vectors pointing away from every obstacle within range;
/// `None` when nothing repels.
fn repulsion_vector(
    pose: &AgentPose,
    arena: Arena,
    objects: &[SceneObject],
    others: &[[f64; 2]],
    radius: f64,
) -> Option<(f64, f64)> {
    let mut rx = 0.0;
    let mut ry = 0.0;
    let mut any = false;

    if pose.x < radius {
        rx += 1.0;
        any = true;
    }
    if arena.size - pose.x < radius {
        rx -= 1.0;
        any = true;
    }
    if pose.y < radius {
        ry += 1.0;
        any = true;
    }
    if arena.size - pose.y < radius {
        ry -= 1.0;
        any = true;
    }

    for o in objects {
        if o.footprint_contains(pose.x, pose.y, radius) {
            let dx = pose.x - o.center[0];
            let dy = pose.y - o.center[1];
            let norm = (dx * dx + dy * dy).sqrt().max(1e-9);
            rx += dx / norm;
            ry += dy / norm;
            any = true;
        }
    }
    for &[ox, oy] in others {
        let dx = pose.x - ox;
        let dy = pose.y - oy;
        let d2 = dx * dx + dy * dy;
        if d2 < radius * radius && d2 > 0.0 {
            let norm = d2.sqrt();
            rx += dx / norm;
            ry += dy / norm;
            any = true;
        }
    }

    if !any {
        return None;
    }
    // opposing pushes can cancel; fall back to reversing the heading
    if rx * rx + ry * ry < 1e-12 {
        return Some((-pose.heading.cos(), -pose.heading.sin()));
    }
    Some((rx, ry))
}
