//! Scene objects: annotated ground-truth bounding boxes in a square arena.

use rand::Rng;
use thiserror::Error;

use crate::classes::{ClassId, ClassModel};

/// Square arena `[0, size] x [0, size]` with walls.
#[derive(Debug, Clone, Copy)]
pub struct Arena {
    pub size: f64,
}

impl Arena {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= self.size && y <= self.size
    }
}

/// Ground-truth object: class plus an oriented 3D bounding box resting on
/// the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: u32,
    pub class: ClassId,
    pub center: [f64; 3],
    pub dims: [f64; 3],
    pub yaw: f64,
}

impl SceneObject {
    /// The four corners of the front face (the face whose outward normal is
    /// the yaw direction), bottom pair first.
    pub fn front_face_corners(&self) -> [[f64; 3]; 4] {
        let (sin, cos) = self.yaw.sin_cos();
        let fx = self.center[0] + cos * self.dims[0] / 2.0;
        let fy = self.center[1] + sin * self.dims[0] / 2.0;
        // right-hand direction along the face
        let rx = sin * self.dims[1] / 2.0;
        let ry = -cos * self.dims[1] / 2.0;
        let zlo = self.center[2] - self.dims[2] / 2.0;
        let zhi = self.center[2] + self.dims[2] / 2.0;
        [
            [fx + rx, fy + ry, zlo],
            [fx - rx, fy - ry, zlo],
            [fx + rx, fy + ry, zhi],
            [fx - rx, fy - ry, zhi],
        ]
    }

    /// Vector from the box center to the front-right corner (top), the form
    /// carried in tuple payloads.
    pub fn front_right_vector(&self) -> [f64; 3] {
        let corner = self.front_face_corners()[2];
        [
            corner[0] - self.center[0],
            corner[1] - self.center[1],
            corner[2] - self.center[2],
        ]
    }

    /// True when the planar point lies inside the rotated footprint,
    /// expanded by `margin` on all sides.
    pub fn footprint_contains(&self, x: f64, y: f64, margin: f64) -> bool {
        let (sin, cos) = self.yaw.sin_cos();
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let local_x = dx * cos + dy * sin;
        let local_y = -dx * sin + dy * cos;
        local_x.abs() <= self.dims[0] / 2.0 + margin
            && local_y.abs() <= self.dims[1] / 2.0 + margin
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene line {lineno} is malformed: {line:?}")]
    BadLine { lineno: usize, line: String },
    #[error("could not place {placed} of {requested} objects without overlap")]
    Crowded { placed: usize, requested: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Generates non-overlapping floor-standing boxes, one object of every class
/// first and the rest drawn at random, each rotated to face the arena
/// center. Dimensions are sized to fit the default viewing frustum.
pub fn generate_scene(
    count: usize,
    arena: Arena,
    model: &ClassModel,
    rng: &mut impl Rng,
) -> Result<Vec<SceneObject>, SceneError> {
    let c = model.class_count() as usize;
    let mut objects: Vec<SceneObject> = Vec::with_capacity(count);
    let wall_margin = 0.6;
    let spacing = 0.35;
    for id in 0..count {
        let class = if id < c {
            ClassId::from_index(id)
        } else {
            ClassId::from_index(rng.gen_range(0..c))
        };
        let mut placed = false;
        for _attempt in 0..2000 {
            let dims = [
                rng.gen_range(0.3..0.6),
                rng.gen_range(0.3..0.6),
                rng.gen_range(0.25..0.45),
            ];
            let x = rng.gen_range(wall_margin..arena.size - wall_margin);
            let y = rng.gen_range(wall_margin..arena.size - wall_margin);
            let yaw = (arena.size / 2.0 - y).atan2(arena.size / 2.0 - x);
            let candidate = SceneObject {
                id: id as u32,
                class,
                center: [x, y, dims[2] / 2.0],
                dims,
                yaw,
            };
            let clear = objects.iter().all(|o| {
                let dx = o.center[0] - x;
                let dy = o.center[1] - y;
                let min_gap = (o.dims[0].max(o.dims[1]) + dims[0].max(dims[1])) / 2.0 + spacing;
                dx * dx + dy * dy > min_gap * min_gap
            });
            if clear {
                objects.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SceneError::Crowded { placed: objects.len(), requested: count });
        }
    }
    Ok(objects)
}

/// Parses the plain-text scene format: one object per line,
/// `id class cx cy cz dx dy dz yaw`, `#` comments allowed.
pub fn load_scene(text: &str) -> Result<Vec<SceneObject>, SceneError> {
    let mut objects = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || SceneError::BadLine { lineno: lineno + 1, line: raw.to_string() };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        objects.push(SceneObject {
            id: fields[0].parse().map_err(|_| bad())?,
            class: ClassId(fields[1].parse().map_err(|_| bad())?),
            center: [num(fields[2])?, num(fields[3])?, num(fields[4])?],
            dims: [num(fields[5])?, num(fields[6])?, num(fields[7])?],
            yaw: num(fields[8])?,
        });
    }
    Ok(objects)
}

pub fn scene_to_text(objects: &[SceneObject]) -> String {
    let mut out = String::from("# id class cx cy cz dx dy dz yaw\n");
    for o in objects {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {}\n",
            o.id,
            o.class,
            o.center[0],
            o.center[1],
            o.center[2],
            o.dims[0],
            o.dims[1],
            o.dims[2],
            o.yaw
        ));
    }
    out
}
