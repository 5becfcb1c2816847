//! File formats and deterministic JSON serialization.
//!
//! All JSON written by the toolkit formats floating-point numbers with
//! exactly nine significant digits, so identical inputs produce
//! byte-identical files regardless of platform defaults.

use crate::annotation::Corridor;
use crate::dynamics::{Control, EgoState};
use crate::eval::MetricsReport;
use crate::planner::{PlanResult, PlanStatus};
use crate::scene::Scene;
use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{PrettyFormatter, Serializer};
use std::fmt;
use std::io::Write;

#[derive(Debug)]
pub enum IoError {
    Json(serde_json::Error),
    Io(std::io::Error),
    Invalid(String),
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Json(e) => write!(f, "json error: {e}"),
            IoError::Io(e) => write!(f, "io error: {e}"),
            IoError::Invalid(msg) => write!(f, "invalid file: {msg}"),
        }
    }
}

impl std::error::Error for IoError {}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Json(e)
    }
}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Io(e)
    }
}

/// Format a float with nine significant digits, e.g. `-1.23456789e1`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    format!("{x:.8e}")
}

/// Pretty formatter that pins every float to nine significant digits.
struct Sig9Formatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl<'a> Sig9Formatter<'a> {
    fn new() -> Self {
        Sig9Formatter {
            inner: PrettyFormatter::new(),
        }
    }
}

macro_rules! delegate {
    ($($name:ident),* $(,)?) => {
        $(fn $name<W>(&mut self, writer: &mut W) -> std::io::Result<()>
        where
            W: ?Sized + Write,
        {
            self.inner.$name(writer)
        })*
    };
}

impl<'a> serde_json::ser::Formatter for Sig9Formatter<'a> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        writer.write_all(format_sig9(value).as_bytes())
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        writer.write_all(format_sig9(value as f64).as_bytes())
    }

    delegate!(begin_array, end_array, begin_object, end_object);

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_array_value(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.inner.end_object_value(writer)
    }
}

/// Serialize to a pretty JSON string with fixed float formatting and a
/// trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, IoError> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Sig9Formatter::new());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| IoError::Invalid(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<(), IoError> {
    let text = to_json_string(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_scene(path: &std::path::Path) -> Result<Scene, IoError> {
    let text = std::fs::read_to_string(path)?;
    let scene: Scene = serde_json::from_str(&text)?;
    scene
        .validate()
        .map_err(|e| IoError::Invalid(e.to_string()))?;
    Ok(scene)
}

pub fn write_scene(path: &std::path::Path, scene: &Scene) -> Result<(), IoError> {
    write_json(path, scene)
}

pub fn read_corridor(path: &std::path::Path) -> Result<Corridor, IoError> {
    let text = std::fs::read_to_string(path)?;
    let corridor: Corridor = serde_json::from_str(&text)?;
    for (i, r) in corridor.rects.iter().enumerate() {
        crate::geometry::OrientedRect::new(r.cx, r.cy, r.theta, r.l, r.w)
            .map_err(|e| IoError::Invalid(format!("rect {i}: {e}")))?;
    }
    Ok(corridor)
}

pub fn write_corridor(path: &std::path::Path, corridor: &Corridor) -> Result<(), IoError> {
    write_json(path, corridor)
}

/// On-disk form of a plan result:
/// `{status, solve_time_s, controls: [[a, delta] x N], trajectory: [[px, py, theta, v] x N]}`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub status: PlanStatus,
    pub solve_time_s: f64,
    pub controls: Vec<[f64; 2]>,
    pub trajectory: Vec<[f64; 4]>,
}

impl PlanFile {
    pub fn from_result(res: &PlanResult) -> Self {
        PlanFile {
            status: res.status,
            solve_time_s: res.solve_time,
            controls: res.controls.iter().map(|u| [u.a, u.delta]).collect(),
            trajectory: res
                .trajectory
                .iter()
                .map(|s| [s.px, s.py, s.theta, s.v])
                .collect(),
        }
    }

    pub fn trajectory_states(&self) -> Vec<EgoState> {
        self.trajectory
            .iter()
            .map(|s| EgoState {
                px: s[0],
                py: s[1],
                theta: s[2],
                v: s[3],
            })
            .collect()
    }

    pub fn control_sequence(&self) -> Vec<Control> {
        self.controls.iter().map(|u| Control::new(u[0], u[1])).collect()
    }
}

pub fn write_plan(path: &std::path::Path, res: &PlanResult) -> Result<(), IoError> {
    write_json(path, &PlanFile::from_result(res))
}

pub fn read_plan(path: &std::path::Path) -> Result<PlanFile, IoError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_metrics(path: &std::path::Path, report: &MetricsReport) -> Result<(), IoError> {
    write_json(path, report)
}
