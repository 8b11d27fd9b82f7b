//! Per-frame vehicle tracks: the native CSV format, NGSIM-style ingestion
//! and heading derivation for data without orientation.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentClass, AgentId, AgentState};
use crate::geometry::Vec2;

/// Sampling period of recorded tracks, seconds.
pub const FRAME_PERIOD: f64 = 0.1;
pub const FEET_TO_METRES: f64 = 0.3048;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("failed to read tracks: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{column}` value `{value}`")]
    BadValue { row: usize, column: String, value: String },
    #[error("vehicle {vehicle}: frame {frame} does not follow frame {previous}")]
    NonMonotoneFrames { vehicle: u64, frame: u64, previous: u64 },
    #[error("unknown vehicle class `{0}`")]
    UnknownClass(String),
}

/// One vehicle at one frame. Units are metres, seconds and radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub id: u64,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub acceleration: f64,
    pub lane: String,
    pub class: AgentClass,
    pub length: f64,
    pub width: f64,
}

impl TrackRow {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn state(&self) -> AgentState {
        AgentState::new(
            AgentId(self.id),
            self.position(),
            self.heading,
            self.speed,
            self.acceleration,
            self.class,
            self.length,
            self.width,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthUnit {
    Feet,
    Metres,
}

impl LengthUnit {
    pub fn to_metres(self) -> f64 {
        match self {
            LengthUnit::Feet => FEET_TO_METRES,
            LengthUnit::Metres => 1.0,
        }
    }
}

impl std::str::FromStr for LengthUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "feet" | "ft" => Ok(LengthUnit::Feet),
            "metres" | "meters" | "m" => Ok(LengthUnit::Metres),
            other => Err(format!("unknown unit `{other}` (expected feet or metres)")),
        }
    }
}

/// Heading estimation for sources that only record positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadingParams {
    /// Width of the centred moving-average window on positions, frames.
    pub smoothing_frames: usize,
    /// Centred differencing window, seconds.
    pub window: f64,
    /// Below this speed the previous heading is held.
    pub min_speed: f64,
}

impl Default for HeadingParams {
    fn default() -> Self {
        Self {
            smoothing_frames: 3,
            window: 0.5,
            min_speed: 0.5,
        }
    }
}

/// Headings for one vehicle's consecutive positions.
pub fn derive_headings(positions: &[Vec2], speeds: &[f64], params: &HeadingParams) -> Vec<f64> {
    let n = positions.len();
    let half_smooth = params.smoothing_frames / 2;
    let smoothed: Vec<Vec2> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_smooth);
            let hi = (i + half_smooth).min(n - 1);
            let sum = positions[lo..=hi].iter().fold(Vec2::ZERO, |acc, &p| acc + p);
            sum * (1.0 / (hi - lo + 1) as f64)
        })
        .collect();
    let half = ((params.window / FRAME_PERIOD / 2.0).round() as usize).max(1);
    let raw: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let d = smoothed[(i + half).min(n - 1)] - smoothed[i.saturating_sub(half)];
            (d.norm() > 1e-9).then(|| d.angle())
        })
        .collect();
    // before the first confident estimate, use the first one available
    let first = (0..n)
        .find(|&i| speeds[i] >= params.min_speed && raw[i].is_some())
        .and_then(|i| raw[i])
        .or_else(|| raw.iter().flatten().next().copied())
        .unwrap_or(0.0);
    let mut held = first;
    (0..n)
        .map(|i| {
            if speeds[i] >= params.min_speed {
                if let Some(h) = raw[i] {
                    held = h;
                }
            }
            held
        })
        .collect()
}

/// All tracks of a recording, grouped by vehicle and ordered by frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackTable {
    tracks: BTreeMap<u64, Vec<TrackRow>>,
    frames: BTreeMap<u64, Vec<(u64, usize)>>,
}

impl TrackTable {
    /// Groups rows by vehicle. Within a vehicle, frames must strictly
    /// increase in input order.
    pub fn from_rows(rows: impl IntoIterator<Item = TrackRow>) -> Result<Self, TrackError> {
        let mut tracks: BTreeMap<u64, Vec<TrackRow>> = BTreeMap::new();
        for row in rows {
            let track = tracks.entry(row.id).or_default();
            if let Some(last) = track.last() {
                if row.frame <= last.frame {
                    return Err(TrackError::NonMonotoneFrames {
                        vehicle: row.id,
                        frame: row.frame,
                        previous: last.frame,
                    });
                }
            }
            track.push(row);
        }
        let mut frames: BTreeMap<u64, Vec<(u64, usize)>> = BTreeMap::new();
        for (&id, track) in &tracks {
            for (i, row) in track.iter().enumerate() {
                frames.entry(row.frame).or_default().push((id, i));
            }
        }
        Ok(Self { tracks, frames })
    }

    pub fn len(&self) -> usize {
        self.tracks.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn vehicles(&self) -> impl Iterator<Item = u64> + '_ {
        self.tracks.keys().copied()
    }

    pub fn track(&self, id: u64) -> Option<&[TrackRow]> {
        self.tracks.get(&id).map(Vec::as_slice)
    }

    pub fn tracks(&self) -> impl Iterator<Item = (u64, &[TrackRow])> {
        self.tracks.iter().map(|(&id, t)| (id, t.as_slice()))
    }

    pub fn rows(&self) -> impl Iterator<Item = &TrackRow> {
        self.tracks.values().flatten()
    }

    pub fn frames(&self) -> impl Iterator<Item = u64> + '_ {
        self.frames.keys().copied()
    }

    pub fn row(&self, id: u64, frame: u64) -> Option<&TrackRow> {
        let track = self.tracks.get(&id)?;
        track.binary_search_by_key(&frame, |r| r.frame).ok().map(|i| &track[i])
    }

    /// Every vehicle present at `frame`, ordered by id.
    pub fn scene_at(&self, frame: u64) -> Vec<AgentState> {
        self.frames
            .get(&frame)
            .map(|v| v.iter().map(|&(id, i)| self.tracks[&id][i].state()).collect())
            .unwrap_or_default()
    }

    pub fn read_csv(reader: impl Read) -> Result<Self, TrackError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows: Result<Vec<TrackRow>, csv::Error> = rdr.deserialize().collect();
        Self::from_rows(rows?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrackError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), TrackError> {
        let mut w = csv::Writer::from_writer(writer);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrackError> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

const NGSIM_COLUMNS: [&str; 10] = [
    "Vehicle_ID",
    "Frame_ID",
    "Local_X",
    "Local_Y",
    "v_Vel",
    "v_Acc",
    "v_Class",
    "v_Length",
    "v_Width",
    "Lane_ID",
];

fn ngsim_class(code: &str) -> Result<AgentClass, TrackError> {
    match code.trim() {
        "1" => Ok(AgentClass::Motorbike),
        "2" => Ok(AgentClass::Car),
        "3" => Ok(AgentClass::Truck),
        other => Err(TrackError::UnknownClass(other.to_string())),
    }
}

/// Reads an NGSIM-style CSV. Lengths, speeds and accelerations are scaled
/// by `unit`; headings are derived from positions.
pub fn ingest_ngsim(reader: impl Read, unit: LengthUnit, heading: &HeadingParams) -> Result<TrackTable, TrackError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let mut col = [0usize; NGSIM_COLUMNS.len()];
    for (slot, name) in col.iter_mut().zip(NGSIM_COLUMNS) {
        *slot = *index.get(name).ok_or_else(|| TrackError::MissingColumn(name.to_string()))?;
    }
    let scale = unit.to_metres();
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |k: usize| record.get(col[k]).unwrap_or("");
        let number = |k: usize| -> Result<f64, TrackError> {
            field(k).parse::<f64>().map_err(|_| TrackError::BadValue {
                row: r + 1,
                column: NGSIM_COLUMNS[k].to_string(),
                value: field(k).to_string(),
            })
        };
        let integer = |k: usize| -> Result<u64, TrackError> {
            let v = number(k)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(TrackError::BadValue {
                    row: r + 1,
                    column: NGSIM_COLUMNS[k].to_string(),
                    value: field(k).to_string(),
                });
            }
            Ok(v as u64)
        };
        rows.push(TrackRow {
            id: integer(0)?,
            frame: integer(1)?,
            x: number(2)? * scale,
            y: number(3)? * scale,
            heading: 0.0,
            speed: number(4)? * scale,
            acceleration: number(5)? * scale,
            class: ngsim_class(field(6))?,
            length: number(7)? * scale,
            width: number(8)? * scale,
            lane: field(9).to_string(),
        });
    }
    let mut table = TrackTable::from_rows(rows)?;
    for track in table.tracks.values_mut() {
        let positions: Vec<Vec2> = track.iter().map(TrackRow::position).collect();
        let speeds: Vec<f64> = track.iter().map(|r| r.speed).collect();
        for (row, h) in track.iter_mut().zip(derive_headings(&positions, &speeds, heading)) {
            row.heading = h;
        }
    }
    Ok(table)
}

pub fn ingest_ngsim_file(path: impl AsRef<Path>, unit: LengthUnit, heading: &HeadingParams) -> Result<TrackTable, TrackError> {
    ingest_ngsim(std::fs::File::open(path)?, unit, heading)
}
