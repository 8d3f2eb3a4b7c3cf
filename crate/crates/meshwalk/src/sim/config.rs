//! Run configuration: a small sectioned key = value format plus dotted
//! command-line overrides.
//!
//! Every knob has a default, so an empty config is a valid run. Files look
//! like:
//!
//! ```text
//! [scene]
//! world_size = 320
//! pattern = rw
//!
//! [clients]
//! count = 20
//! ```
//!
//! and `--set clients.count=40` overrides any single key.

use std::fmt::Write as _;

use thiserror::Error;

use crate::scene::PatternKind;
use crate::server::StreamMode;

#[derive(Debug, Error, PartialEq)]
#[error("config: {0}")]
pub struct ConfigError(pub String);

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Which device profile the client population gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceMix {
    Type1,
    Type2,
    /// Alternating by client id: even ids Type I, odd ids Type II.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownlinkMode {
    /// Server-scheduled round-robin FIFO, collision-free.
    Scheduled,
    /// Server senders contend on the downlink like clients do on the uplink.
    Contended,
}

/// How the catalog serves records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServeMode {
    Progressive,
    /// Single blob per object bundling levels 1..=5.
    Static50,
    /// Single blob per object bundling all ten levels.
    Static100,
}

impl ServeMode {
    pub fn stream_mode(self) -> StreamMode {
        match self {
            ServeMode::Progressive => StreamMode::Progressive,
            ServeMode::Static50 => StreamMode::Static { top_level: 5 },
            ServeMode::Static100 => StreamMode::Static { top_level: 10 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub world_size: f64,
    pub object_count: u32,
    pub viewer_scope: f64,
    pub object_scope: f64,
    pub speed: f64,
    pub move_tick: f64,
    pub circle_radius: f64,
    pub turn_interval: f64,
    pub pattern: PatternKind,
    /// Object manifest path; empty means a synthetic catalog of
    /// `object_count` placed objects.
    pub manifest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientsConfig {
    pub count: u32,
    pub device_type: DeviceMix,
    pub cache_bytes: u64,
    pub constrained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub mode: ServeMode,
    pub session_ttl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediumConfig {
    pub uplink_bps: f64,
    pub downlink_bps: f64,
    pub slot_seconds: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub request_bytes: u32,
    pub downlink_mode: DownlinkMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub duration: f64,
    pub warmup: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scene: SceneConfig,
    pub clients: ClientsConfig,
    pub server: ServerConfig,
    pub medium: MediumConfig,
    pub run: RunConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig {
                world_size: 320.0,
                object_count: 64,
                viewer_scope: 100.0,
                object_scope: 10.0,
                speed: 10.0,
                move_tick: 0.5,
                circle_radius: 16.0,
                turn_interval: 10.0,
                pattern: PatternKind::Rw,
                manifest: String::new(),
            },
            clients: ClientsConfig {
                count: 20,
                device_type: DeviceMix::Type1,
                cache_bytes: 2 * 1024 * 1024,
                constrained: true,
            },
            server: ServerConfig {
                mode: ServeMode::Progressive,
                session_ttl: 0.0,
            },
            medium: MediumConfig {
                uplink_bps: 2_000_000.0,
                downlink_bps: 1_500_000.0,
                slot_seconds: 20e-6,
                cw_min: 16,
                cw_max: 1024,
                retry_limit: 7,
                request_bytes: 128,
                downlink_mode: DownlinkMode::Scheduled,
            },
            run: RunConfig {
                duration: 900.0,
                warmup: 120.0,
                seed: 42,
            },
        }
    }
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| err(format!("{section}.{key}: cannot parse {value:?}")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(err(format!("{section}.{key}: expected a boolean, got {value:?}"))),
    }
}

impl SimConfig {
    /// Apply a whole config file's text over the current values.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("line {lineno}: unterminated section header")))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {lineno}: expected key = value")))?;
            if section.is_empty() {
                return Err(err(format!("line {lineno}: key before any [section]")));
            }
            self.set(&section, key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply one `section.key=value` override.
    pub fn apply_set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| err(format!("--set {assignment:?}: expected section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| err(format!("--set {assignment:?}: key must be section.key")))?;
        self.set(section, key, value.trim())
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let unknown = || err(format!("unknown key {section}.{key}"));
        match section {
            "scene" => match key {
                "world_size" => self.scene.world_size = parse_num(section, key, value)?,
                "object_count" => self.scene.object_count = parse_num(section, key, value)?,
                "viewer_scope" => self.scene.viewer_scope = parse_num(section, key, value)?,
                "object_scope" => self.scene.object_scope = parse_num(section, key, value)?,
                "speed" => self.scene.speed = parse_num(section, key, value)?,
                "move_tick" => self.scene.move_tick = parse_num(section, key, value)?,
                "circle_radius" => self.scene.circle_radius = parse_num(section, key, value)?,
                "turn_interval" => self.scene.turn_interval = parse_num(section, key, value)?,
                "pattern" => {
                    self.scene.pattern = match value {
                        "cp" => PatternKind::Cp,
                        "ccp" => PatternKind::Ccp,
                        "rw" => PatternKind::Rw,
                        _ => return Err(err(format!("scene.pattern: unknown pattern {value:?}"))),
                    }
                }
                "manifest" => self.scene.manifest = value.to_string(),
                _ => return Err(unknown()),
            },
            "clients" => match key {
                "count" => self.clients.count = parse_num(section, key, value)?,
                "device_type" => {
                    self.clients.device_type = match value {
                        "type1" => DeviceMix::Type1,
                        "type2" => DeviceMix::Type2,
                        "mixed" => DeviceMix::Mixed,
                        _ => {
                            return Err(err(format!(
                                "clients.device_type: expected type1|type2|mixed, got {value:?}"
                            )))
                        }
                    }
                }
                "cache_bytes" => self.clients.cache_bytes = parse_num(section, key, value)?,
                "constrained" => self.clients.constrained = parse_bool(section, key, value)?,
                _ => return Err(unknown()),
            },
            "server" => match key {
                "mode" => {
                    self.server.mode = match value {
                        "progressive" => ServeMode::Progressive,
                        "static_50" => ServeMode::Static50,
                        "static_100" => ServeMode::Static100,
                        _ => {
                            return Err(err(format!(
                                "server.mode: expected progressive|static_50|static_100, got {value:?}"
                            )))
                        }
                    }
                }
                "session_ttl" => self.server.session_ttl = parse_num(section, key, value)?,
                _ => return Err(unknown()),
            },
            "medium" => match key {
                "uplink_bps" => self.medium.uplink_bps = parse_num(section, key, value)?,
                "downlink_bps" => self.medium.downlink_bps = parse_num(section, key, value)?,
                "slot_seconds" => self.medium.slot_seconds = parse_num(section, key, value)?,
                "cw_min" => self.medium.cw_min = parse_num(section, key, value)?,
                "cw_max" => self.medium.cw_max = parse_num(section, key, value)?,
                "retry_limit" => self.medium.retry_limit = parse_num(section, key, value)?,
                "request_bytes" => self.medium.request_bytes = parse_num(section, key, value)?,
                "downlink_mode" => {
                    self.medium.downlink_mode = match value {
                        "scheduled" => DownlinkMode::Scheduled,
                        "contended" => DownlinkMode::Contended,
                        _ => {
                            return Err(err(format!(
                                "medium.downlink_mode: expected scheduled|contended, got {value:?}"
                            )))
                        }
                    }
                }
                _ => return Err(unknown()),
            },
            "run" => match key {
                "duration" => self.run.duration = parse_num(section, key, value)?,
                "warmup" => self.run.warmup = parse_num(section, key, value)?,
                "seed" => self.run.seed = parse_num(section, key, value)?,
                _ => return Err(unknown()),
            },
            _ => return Err(err(format!("unknown section [{section}]"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("scene.world_size", self.scene.world_size),
            ("scene.viewer_scope", self.scene.viewer_scope),
            ("scene.move_tick", self.scene.move_tick),
            ("scene.circle_radius", self.scene.circle_radius),
            ("scene.turn_interval", self.scene.turn_interval),
            ("medium.uplink_bps", self.medium.uplink_bps),
            ("medium.downlink_bps", self.medium.downlink_bps),
            ("medium.slot_seconds", self.medium.slot_seconds),
            ("run.duration", self.run.duration),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(err(format!("{name} must be positive, got {v}")));
            }
        }
        if self.scene.object_scope < 0.0 || self.scene.speed < 0.0 {
            return Err(err("scene.object_scope and scene.speed must be non-negative"));
        }
        if self.scene.object_count == 0 && self.scene.manifest.is_empty() {
            return Err(err("scene.object_count must be at least 1"));
        }
        if self.clients.count == 0 {
            return Err(err("clients.count must be at least 1"));
        }
        if self.medium.cw_min < 1 || self.medium.cw_max < self.medium.cw_min {
            return Err(err("medium contention window needs 1 <= cw_min <= cw_max"));
        }
        if self.medium.retry_limit < 1 || self.medium.request_bytes < 1 {
            return Err(err("medium.retry_limit and medium.request_bytes must be at least 1"));
        }
        if self.run.warmup < 0.0 || self.run.warmup >= self.run.duration {
            return Err(err("run.warmup must be in [0, duration)"));
        }
        if self.server.session_ttl < 0.0 {
            return Err(err("server.session_ttl must be non-negative (0 disables expiry)"));
        }
        Ok(())
    }

    /// Canonical listing of every key, suitable for `--print-config` and
    /// re-parseable as a config file.
    pub fn print(&self) -> String {
        let pattern = match self.scene.pattern {
            PatternKind::Cp => "cp",
            PatternKind::Ccp => "ccp",
            PatternKind::Rw => "rw",
        };
        let device = match self.clients.device_type {
            DeviceMix::Type1 => "type1",
            DeviceMix::Type2 => "type2",
            DeviceMix::Mixed => "mixed",
        };
        let mode = match self.server.mode {
            ServeMode::Progressive => "progressive",
            ServeMode::Static50 => "static_50",
            ServeMode::Static100 => "static_100",
        };
        let downlink = match self.medium.downlink_mode {
            DownlinkMode::Scheduled => "scheduled",
            DownlinkMode::Contended => "contended",
        };
        let mut s = String::new();
        let _ = writeln!(s, "[scene]");
        let _ = writeln!(s, "world_size = {}", self.scene.world_size);
        let _ = writeln!(s, "object_count = {}", self.scene.object_count);
        let _ = writeln!(s, "viewer_scope = {}", self.scene.viewer_scope);
        let _ = writeln!(s, "object_scope = {}", self.scene.object_scope);
        let _ = writeln!(s, "speed = {}", self.scene.speed);
        let _ = writeln!(s, "move_tick = {}", self.scene.move_tick);
        let _ = writeln!(s, "circle_radius = {}", self.scene.circle_radius);
        let _ = writeln!(s, "turn_interval = {}", self.scene.turn_interval);
        let _ = writeln!(s, "pattern = {pattern}");
        let _ = writeln!(s, "manifest = {}", self.scene.manifest);
        let _ = writeln!(s, "\n[clients]");
        let _ = writeln!(s, "count = {}", self.clients.count);
        let _ = writeln!(s, "device_type = {device}");
        let _ = writeln!(s, "cache_bytes = {}", self.clients.cache_bytes);
        let _ = writeln!(s, "constrained = {}", self.clients.constrained);
        let _ = writeln!(s, "\n[server]");
        let _ = writeln!(s, "mode = {mode}");
        let _ = writeln!(s, "session_ttl = {}", self.server.session_ttl);
        let _ = writeln!(s, "\n[medium]");
        let _ = writeln!(s, "uplink_bps = {}", self.medium.uplink_bps);
        let _ = writeln!(s, "downlink_bps = {}", self.medium.downlink_bps);
        let _ = writeln!(s, "slot_seconds = {}", self.medium.slot_seconds);
        let _ = writeln!(s, "cw_min = {}", self.medium.cw_min);
        let _ = writeln!(s, "cw_max = {}", self.medium.cw_max);
        let _ = writeln!(s, "retry_limit = {}", self.medium.retry_limit);
        let _ = writeln!(s, "request_bytes = {}", self.medium.request_bytes);
        let _ = writeln!(s, "downlink_mode = {downlink}");
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "duration = {}", self.run.duration);
        let _ = writeln!(s, "warmup = {}", self.run.warmup);
        let _ = writeln!(s, "seed = {}", self.run.seed);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn file_and_set_overrides_apply() {
        let mut c = SimConfig::default();
        c.apply_file(
            "# comment\n[scene]\nworld_size = 800\npattern = cp\n\n[clients]\ncount = 40\n",
        )
        .unwrap();
        assert_eq!(c.scene.world_size, 800.0);
        assert_eq!(c.scene.pattern, PatternKind::Cp);
        assert_eq!(c.clients.count, 40);
        c.apply_set("run.seed=7").unwrap();
        assert_eq!(c.run.seed, 7);
        c.apply_set("medium.downlink_mode = contended").unwrap();
        assert_eq!(c.medium.downlink_mode, DownlinkMode::Contended);
        assert!(c.apply_set("no_dot_here").is_err());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut c = SimConfig::default();
        assert!(c.apply_set("scene.bogus=1").is_err());
        assert!(c.apply_set("nowhere.key=1").is_err());
        assert!(c.apply_set("clients.count=ten").is_err());
        assert!(c.apply_set("scene.pattern=zigzag").is_err());
        assert!(c.apply_file("stray = 1\n").is_err());
        assert!(c.apply_file("[scene\nx = 1\n").is_err());
    }

    #[test]
    fn print_round_trips_through_the_parser() {
        let mut c = SimConfig::default();
        c.apply_set("server.mode=static_50").unwrap();
        c.apply_set("clients.device_type=mixed").unwrap();
        let mut back = SimConfig::default();
        back.apply_file(&c.print()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation_rejects_nonsense() {
        let mut c = SimConfig::default();
        c.run.warmup = 900.0;
        assert!(c.validate().is_err());
        let mut c = SimConfig::default();
        c.medium.cw_max = 4;
        assert!(c.validate().is_err());
        let mut c = SimConfig::default();
        c.scene.world_size = 0.0;
        assert!(c.validate().is_err());
    }
}
