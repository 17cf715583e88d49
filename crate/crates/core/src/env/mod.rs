//! The deterministic world: arena, scene objects, agent motion, sensing,
//! and the simulated classifier.

pub mod classifier;
pub mod config;
pub mod frustum;
pub mod graph;
pub mod motion;
pub mod scene;

pub use classifier::classifier_sample;
pub use config::{ConfigError, SimConfig};
pub use frustum::{frustum_detect, FrustumSpec};
pub use graph::neighbor_graph;
pub use motion::{diffusion_step, AgentPose, MotionParams};
pub use scene::{generate_scene, load_scene, scene_to_text, Arena, SceneError, SceneObject};
