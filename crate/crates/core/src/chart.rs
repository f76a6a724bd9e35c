//! Data model and geometry of a single 3D radar chart.
//!
//! A chart stands on a vertical time axis of fixed physical length. The
//! visible window of time events is spread linearly along that length, with
//! the first visible event at the bottom and the last at the top. Variable
//! axes are arranged radially around the time axis with even angular spacing
//! in arrangement order. All operations are pure: they take `&self` and
//! return a new chart.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Entity};

/// Inclusive `(lo, hi)` range of event indices.
pub type EventWindow = (usize, usize);

/// Interaction mode of a chart. Touching the mode toggle cycles through the
/// three states in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Inactive,
    ActiveRotate,
    ReconfigureFilter,
}

impl Mode {
    pub fn next(self) -> Self {
        match self {
            Mode::Inactive => Mode::ActiveRotate,
            Mode::ActiveRotate => Mode::ReconfigureFilter,
            Mode::ReconfigureFilter => Mode::Inactive,
        }
    }

    pub fn is_active(self) -> bool {
        self != Mode::Inactive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ChartError {
    #[error("event index {index} is outside the visible window {window:?}")]
    OutOfWindow { index: usize, window: EventWindow },
    #[error("chart is inactive")]
    InactiveChart,
    #[error("time range collapses to a single event")]
    DegenerateRange,
    #[error("no time range selected")]
    NoRangeSelected,
    #[error("selected range already spans the visible window")]
    RangeIsWindow,
    #[error("no zoom history")]
    NoHistory,
    #[error("operation requires mode {required:?}, chart is {actual:?}")]
    WrongMode { required: Mode, actual: Mode },
    #[error("variable {0} is not an active axis")]
    UnknownVariable(usize),
    #[error("cannot remove the last variable axis")]
    LastVariable,
}

/// Physical defaults for new charts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartConfig {
    /// Physical length of the time axis in meters.
    pub length_m: f64,
    /// Radius at which a normalized value of 1.0 is drawn.
    pub radius_m: f64,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            length_m: 1.0,
            radius_m: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartInstance {
    pub entity_id: String,
    pub length_m: f64,
    pub radius_m: f64,
    pub mode: Mode,
    pub yaw_rad: f64,
    /// Active variable indices in radial order.
    pub arrangement: Vec<usize>,
    pub visible_window: EventWindow,
    pub selected_range: Option<EventWindow>,
    pub slice_index: usize,
    /// Windows shown before each zoom-in, oldest first.
    pub zoom_stack: Vec<EventWindow>,
    pub event_count: usize,
    pub variable_count: usize,
}

/// Details-on-demand for the current time slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoPanel {
    pub timestamp_label: String,
    /// `(variable name, raw value)` in arrangement order.
    pub values: Vec<(String, f64)>,
    /// `(angle, normalized radius)` per active axis, chart-local angles.
    pub radar_polygon: Vec<(f64, f64)>,
}

/// Min-max normalization over a whole series, clamped to `[0, 1]`.
/// Constant series map to 0.5.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn normalize_value(series: &[f64], v: f64) -> f64 {
    let (min, max) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(max > min) {
        return 0.5;
    }
    ((v - min) / (max - min)).clamp(0.0, 1.0)
}

/// Chart-local angle of arrangement slot `slot` out of `n` evenly spaced axes.
pub fn slot_angle(slot: usize, n: usize) -> f64 {
    TAU * slot as f64 / n as f64
}

/// Slot whose even-spacing sector contains `angle`. Sectors are centered on
/// the slot angles.
pub fn slot_for_angle(angle: f64, n: usize) -> usize {
    let step = TAU / n as f64;
    let k = (angle.rem_euclid(TAU) / step).round() as usize;
    k % n
}

impl ChartInstance {
    pub fn new(entity: &Entity, config: &ChartConfig) -> Self {
        let t = entity.event_count();
        let v = entity.series.len();
        Self {
            entity_id: entity.id.clone(),
            length_m: config.length_m,
            radius_m: config.radius_m,
            mode: Mode::Inactive,
            yaw_rad: 0.0,
            arrangement: (0..v).collect(),
            visible_window: (0, t.saturating_sub(1)),
            selected_range: None,
            slice_index: 0,
            zoom_stack: Vec::new(),
            event_count: t,
            variable_count: v,
        }
    }

    pub fn full_window(&self) -> EventWindow {
        (0, self.event_count - 1)
    }

    /// Physical distance between two adjacent visible events.
    pub fn event_gap(&self) -> f64 {
        let (lo, hi) = self.visible_window;
        self.length_m / (hi - lo) as f64
    }

    pub fn event_to_height(&self, index: usize) -> Result<f64, ChartError> {
        let (lo, hi) = self.visible_window;
        if index < lo || index > hi {
            return Err(ChartError::OutOfWindow {
                index,
                window: self.visible_window,
            });
        }
        Ok((index - lo) as f64 * self.event_gap())
    }

    /// Nearest visible event for a height along the time axis. Heights are
    /// clamped to the axis; ties round away from the bottom.
    pub fn height_to_event(&self, h: f64) -> usize {
        let (lo, hi) = self.visible_window;
        let h = if h.is_nan() { 0.0 } else { h.clamp(0.0, self.length_m) };
        // The nudge keeps exact ties from falling below .5 through rounding
        // error in the division.
        let pos = h / self.length_m * (hi - lo) as f64 + 1e-9;
        lo + (pos.round() as usize).min(hi - lo)
    }

    fn clamp_to_window(&self, index: usize) -> usize {
        let (lo, hi) = self.visible_window;
        index.clamp(lo, hi)
    }

    fn require_active(&self) -> Result<(), ChartError> {
        if self.mode.is_active() {
            Ok(())
        } else {
            Err(ChartError::InactiveChart)
        }
    }

    fn require_mode(&self, required: Mode) -> Result<(), ChartError> {
        if self.mode == required {
            Ok(())
        } else {
            Err(ChartError::WrongMode {
                required,
                actual: self.mode,
            })
        }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    pub fn with_yaw(&self, yaw_rad: f64) -> Self {
        Self {
            yaw_rad,
            ..self.clone()
        }
    }

    pub fn select_time_event(&self, index: usize) -> Result<Self, ChartError> {
        self.require_active()?;
        Ok(Self {
            slice_index: self.clamp_to_window(index),
            ..self.clone()
        })
    }

    pub fn select_time_range(&self, a: usize, b: usize) -> Result<Self, ChartError> {
        self.require_active()?;
        let a = self.clamp_to_window(a);
        let b = self.clamp_to_window(b);
        if a == b {
            return Err(ChartError::DegenerateRange);
        }
        Ok(Self {
            selected_range: Some((a.min(b), a.max(b))),
            ..self.clone()
        })
    }

    pub fn zoom_in(&self) -> Result<Self, ChartError> {
        let range = self.selected_range.ok_or(ChartError::NoRangeSelected)?;
        if range == self.visible_window {
            return Err(ChartError::RangeIsWindow);
        }
        let mut next = self.clone();
        next.zoom_stack.push(self.visible_window);
        next.visible_window = range;
        next.selected_range = None;
        next.slice_index = next.clamp_to_window(self.slice_index);
        Ok(next)
    }

    pub fn zoom_out(&self) -> Result<Self, ChartError> {
        let mut next = self.clone();
        let window = next.zoom_stack.pop().ok_or(ChartError::NoHistory)?;
        next.visible_window = window;
        next.selected_range = None;
        next.slice_index = next.clamp_to_window(self.slice_index);
        Ok(next)
    }

    /// Move `variable` to the slot whose sector contains `insert_angle`
    /// (chart-local radians, i.e. after removing the chart yaw).
    pub fn apply_arrangement(&self, variable: usize, insert_angle: f64) -> Result<Self, ChartError> {
        self.require_mode(Mode::ReconfigureFilter)?;
        let from = self
            .arrangement
            .iter()
            .position(|&v| v == variable)
            .ok_or(ChartError::UnknownVariable(variable))?;
        let slot = slot_for_angle(insert_angle, self.arrangement.len());
        let mut arrangement = self.arrangement.clone();
        arrangement.remove(from);
        arrangement.insert(slot, variable);
        Ok(Self {
            arrangement,
            ..self.clone()
        })
    }

    pub fn filter_variable(&self, variable: usize) -> Result<Self, ChartError> {
        self.require_mode(Mode::ReconfigureFilter)?;
        let at = self
            .arrangement
            .iter()
            .position(|&v| v == variable)
            .ok_or(ChartError::UnknownVariable(variable))?;
        if self.arrangement.len() < 2 {
            return Err(ChartError::LastVariable);
        }
        let mut arrangement = self.arrangement.clone();
        arrangement.remove(at);
        Ok(Self {
            arrangement,
            ..self.clone()
        })
    }

    /// Restore the full time series and the original arrangement. Slice,
    /// yaw and mode are kept.
    pub fn reset(&self) -> Result<Self, ChartError> {
        self.require_active()?;
        let mut next = self.clone();
        next.arrangement = (0..self.variable_count).collect();
        next.visible_window = self.full_window();
        next.zoom_stack.clear();
        next.selected_range = None;
        next.slice_index = next.clamp_to_window(self.slice_index);
        Ok(next)
    }

    /// Chart-local angle of the axis for `variable`, if it is active.
    pub fn axis_angle(&self, variable: usize) -> Option<f64> {
        let n = self.arrangement.len();
        self.arrangement
            .iter()
            .position(|&v| v == variable)
            .map(|slot| slot_angle(slot, n))
    }

    pub fn info_panel(&self, dataset: &Dataset) -> Result<InfoPanel, ChartError> {
        self.require_active()?;
        let entity = dataset
            .entity(&self.entity_id)
            .expect("chart entity belongs to the dataset");
        let n = self.arrangement.len();
        let mut values = Vec::with_capacity(n);
        let mut radar_polygon = Vec::with_capacity(n);
        for (slot, &var) in self.arrangement.iter().enumerate() {
            let series = &entity.series[var];
            let raw = series[self.slice_index];
            values.push((dataset.variables[var].clone(), raw));
            radar_polygon.push((slot_angle(slot, n), normalize_value(series, raw)));
        }
        Ok(InfoPanel {
            timestamp_label: dataset.timestamps[self.slice_index].clone(),
            values,
            radar_polygon,
        })
    }

    /// Check every structural invariant; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let (lo, hi) = self.visible_window;
        if !(lo < hi && hi < self.event_count) {
            return Err(format!("bad window {:?}", self.visible_window));
        }
        if let Some((a, b)) = self.selected_range {
            if !(lo <= a && a < b && b <= hi) {
                return Err(format!("selection {:?} outside window", (a, b)));
            }
        }
        if !(lo..=hi).contains(&self.slice_index) {
            return Err(format!("slice {} outside window", self.slice_index));
        }
        if self.arrangement.is_empty() {
            return Err("empty arrangement".into());
        }
        let mut seen = vec![false; self.variable_count];
        for &v in &self.arrangement {
            if v >= self.variable_count || seen[v] {
                return Err(format!("bad arrangement {:?}", self.arrangement));
            }
            seen[v] = true;
        }
        let mut chain = self.zoom_stack.clone();
        chain.push(self.visible_window);
        for pair in chain.windows(2) {
            let ((a0, b0), (a1, b1)) = (pair[0], pair[1]);
            let contains = a0 <= a1 && b1 <= b0 && (a0, b0) != (a1, b1);
            if !contains {
                return Err(format!("zoom stack not strictly nested: {chain:?}"));
            }
        }
        Ok(())
    }
}
