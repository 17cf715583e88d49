//! Experiment configuration: a flat `key = value` text format with
//! validated defaults matching the reference swarm setup.

use std::path::Path;

use thiserror::Error;

use crate::classes::{ClassModel, ModelError};

use super::frustum::FrustumSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value:?}")]
    BadValue { key: String, value: String },
    #[error("config line {lineno} is not `key = value`: {line:?}")]
    BadLine { lineno: usize, line: String },
    #[error("invalid configuration: {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_agents: u32,
    /// Communication range, m.
    pub comm_range: f64,
    /// Side of the square arena, m.
    pub arena_size: f64,
    /// Step duration, s.
    pub dt: f64,
    /// Forward speed, m/s.
    pub speed: f64,
    /// Minimum votes before a location may be consolidated.
    pub min_votes: u32,
    /// Steps between recorded observations per agent.
    pub recording_timeout: u32,
    /// Steps between issued queries per agent.
    pub querying_timeout: u32,
    /// Steps a query collects replies before being evaluated.
    pub reply_wait: u32,
    /// Steps a store request wanders before its holder keeps it; also the
    /// patience of a reply waiting for its next hop.
    pub store_ttl: u32,
    /// Tuples an agent can store (S_i).
    pub storage_capacity: u32,
    /// Requests/replies an agent can queue (R_i).
    pub routing_capacity: u32,
    /// Outbound bytes per agent per step.
    pub bandwidth_cap: u32,
    /// Staircase bucket width of the tuple hash.
    pub hash_step: u16,
    /// Objects generated when no scene file is given.
    pub scene_objects: u32,
    /// Optional scene file path (one object per line).
    pub scene_file: Option<String>,
    /// Optional `name,accuracy` class table; the bundled table otherwise.
    pub classes_file: Option<String>,
    pub frustum_near: f64,
    pub frustum_far: f64,
    /// Full horizontal field of view, degrees.
    pub frustum_hfov_deg: f64,
    /// Full vertical field of view, degrees.
    pub frustum_vfov_deg: f64,
    pub frustum_mount: f64,
    pub avoid_radius: f64,
    /// Random turn half-width on obstacle avoidance, radians.
    pub heading_jitter: f64,
    /// Steps after which forwarded-query records may be forgotten.
    pub seen_horizon: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_agents: 30,
            comm_range: 2.0,
            arena_size: 8.0,
            dt: 0.1,
            speed: 0.05,
            min_votes: 3,
            recording_timeout: 100,
            querying_timeout: 50,
            reply_wait: 30,
            store_ttl: 50,
            storage_capacity: 10,
            routing_capacity: 10,
            bandwidth_cap: 256,
            hash_step: 5,
            scene_objects: 40,
            scene_file: None,
            classes_file: None,
            frustum_near: 0.2,
            frustum_far: 1.5,
            frustum_hfov_deg: 60.0,
            frustum_vfov_deg: 60.0,
            frustum_mount: 0.25,
            avoid_radius: 0.25,
            heading_jitter: 0.3,
            seen_horizon: 200,
        }
    }
}

impl SimConfig {
    /// Total per-agent memory M_i = S_i + R_i.
    pub fn memory_capacity(&self) -> u32 {
        self.storage_capacity + self.routing_capacity
    }

    pub fn frustum(&self) -> FrustumSpec {
        FrustumSpec {
            near: self.frustum_near,
            far: self.frustum_far,
            hfov: self.frustum_hfov_deg.to_radians(),
            vfov: self.frustum_vfov_deg.to_radians(),
            mount_height: self.frustum_mount,
        }
    }

    pub fn class_model(&self) -> Result<ClassModel, ConfigError> {
        match &self.classes_file {
            None => Ok(ClassModel::bga_dgcnn()),
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                Ok(ClassModel::from_csv(&text)?)
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = SimConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                lineno: lineno + 1,
                line: raw.to_string(),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        match key {
            "n_agents" => self.n_agents = num(key, value)?,
            "comm_range" => self.comm_range = num(key, value)?,
            "arena_size" => self.arena_size = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "speed" => self.speed = num(key, value)?,
            "min_votes" => self.min_votes = num(key, value)?,
            "recording_timeout" => self.recording_timeout = num(key, value)?,
            "querying_timeout" => self.querying_timeout = num(key, value)?,
            "reply_wait" => self.reply_wait = num(key, value)?,
            "store_ttl" => self.store_ttl = num(key, value)?,
            "storage_capacity" => self.storage_capacity = num(key, value)?,
            "routing_capacity" => self.routing_capacity = num(key, value)?,
            "bandwidth_cap" => self.bandwidth_cap = num(key, value)?,
            "hash_step" => self.hash_step = num(key, value)?,
            "scene_objects" => self.scene_objects = num(key, value)?,
            "scene_file" => self.scene_file = Some(value.to_string()),
            "classes_file" => self.classes_file = Some(value.to_string()),
            "frustum_near" => self.frustum_near = num(key, value)?,
            "frustum_far" => self.frustum_far = num(key, value)?,
            "frustum_hfov_deg" => self.frustum_hfov_deg = num(key, value)?,
            "frustum_vfov_deg" => self.frustum_vfov_deg = num(key, value)?,
            "frustum_mount" => self.frustum_mount = num(key, value)?,
            "avoid_radius" => self.avoid_radius = num(key, value)?,
            "heading_jitter" => self.heading_jitter = num(key, value)?,
            "seen_horizon" => self.seen_horizon = num(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_agents == 0 || self.n_agents > u16::MAX as u32 {
            return Err(ConfigError::Invalid("n_agents must be in 1..=65535"));
        }
        if self.comm_range <= 0.0 || self.arena_size <= 0.0 {
            return Err(ConfigError::Invalid("comm_range and arena_size must be positive"));
        }
        if self.dt <= 0.0 || self.speed < 0.0 {
            return Err(ConfigError::Invalid("dt must be positive, speed nonnegative"));
        }
        if self.min_votes == 0 {
            return Err(ConfigError::Invalid("min_votes must be at least 1"));
        }
        if self.storage_capacity == 0 || self.routing_capacity == 0 {
            return Err(ConfigError::Invalid("memory capacities must be positive"));
        }
        if self.bandwidth_cap < 128 {
            return Err(ConfigError::Invalid(
                "bandwidth_cap below 128 bytes cannot carry any entry",
            ));
        }
        if self.hash_step == 0 {
            return Err(ConfigError::Invalid("hash_step must be at least 1"));
        }
        if self.scene_objects == 0 {
            return Err(ConfigError::Invalid("scene_objects must be at least 1"));
        }
        if self.recording_timeout == 0 || self.querying_timeout == 0 || self.reply_wait == 0 {
            return Err(ConfigError::Invalid("timeouts must be at least 1 step"));
        }
        if self.store_ttl == 0 || self.seen_horizon == 0 {
            return Err(ConfigError::Invalid("store_ttl and seen_horizon must be positive"));
        }
        if self.seen_horizon <= self.reply_wait {
            return Err(ConfigError::Invalid("seen_horizon must exceed reply_wait"));
        }
        if !self.frustum().validate() {
            return Err(ConfigError::Invalid("frustum geometry is inconsistent"));
        }
        if self.avoid_radius <= 0.0 {
            return Err(ConfigError::Invalid("avoid_radius must be positive"));
        }
        Ok(())
    }

    /// The `key = value` rendering of this configuration; parsing it back
    /// yields the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("n_agents", self.n_agents.to_string());
        kv("comm_range", self.comm_range.to_string());
        kv("arena_size", self.arena_size.to_string());
        kv("dt", self.dt.to_string());
        kv("speed", self.speed.to_string());
        kv("min_votes", self.min_votes.to_string());
        kv("recording_timeout", self.recording_timeout.to_string());
        kv("querying_timeout", self.querying_timeout.to_string());
        kv("reply_wait", self.reply_wait.to_string());
        kv("store_ttl", self.store_ttl.to_string());
        kv("storage_capacity", self.storage_capacity.to_string());
        kv("routing_capacity", self.routing_capacity.to_string());
        kv("bandwidth_cap", self.bandwidth_cap.to_string());
        kv("hash_step", self.hash_step.to_string());
        kv("scene_objects", self.scene_objects.to_string());
        if let Some(f) = &self.scene_file {
            kv("scene_file", f.clone());
        }
        if let Some(f) = &self.classes_file {
            kv("classes_file", f.clone());
        }
        kv("frustum_near", self.frustum_near.to_string());
        kv("frustum_far", self.frustum_far.to_string());
        kv("frustum_hfov_deg", self.frustum_hfov_deg.to_string());
        kv("frustum_vfov_deg", self.frustum_vfov_deg.to_string());
        kv("frustum_mount", self.frustum_mount.to_string());
        kv("avoid_radius", self.avoid_radius.to_string());
        kv("heading_jitter", self.heading_jitter.to_string());
        kv("seen_horizon", self.seen_horizon.to_string());
        out
    }
}
