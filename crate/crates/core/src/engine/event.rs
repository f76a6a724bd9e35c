//! Interaction events, the task taxonomy and the gesture catalog.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chart::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    TravelArmed,
    TravelStarted,
    TravelCompleted,
    ModeChanged,
    TimeEventSelected,
    TimeRangePreview,
    TimeRangeApplied,
    ZoomedIn,
    ZoomedOut,
    VariableSorted,
    VariableFiltered,
    ChartReset,
    RotationChanged,
    Paused,
    Resumed,
    SuppressedTravel,
    SnapGuardReverted,
    /// A gesture was recognized but its feature could not apply. Only
    /// emitted when the engine runs in debug mode.
    Rejected,
}

impl EventKind {
    pub const ALL: [EventKind; 18] = [
        EventKind::TravelArmed,
        EventKind::TravelStarted,
        EventKind::TravelCompleted,
        EventKind::ModeChanged,
        EventKind::TimeEventSelected,
        EventKind::TimeRangePreview,
        EventKind::TimeRangeApplied,
        EventKind::ZoomedIn,
        EventKind::ZoomedOut,
        EventKind::VariableSorted,
        EventKind::VariableFiltered,
        EventKind::ChartReset,
        EventKind::RotationChanged,
        EventKind::Paused,
        EventKind::Resumed,
        EventKind::SuppressedTravel,
        EventKind::SnapGuardReverted,
        EventKind::Rejected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::TravelArmed => "TravelArmed",
            EventKind::TravelStarted => "TravelStarted",
            EventKind::TravelCompleted => "TravelCompleted",
            EventKind::ModeChanged => "ModeChanged",
            EventKind::TimeEventSelected => "TimeEventSelected",
            EventKind::TimeRangePreview => "TimeRangePreview",
            EventKind::TimeRangeApplied => "TimeRangeApplied",
            EventKind::ZoomedIn => "ZoomedIn",
            EventKind::ZoomedOut => "ZoomedOut",
            EventKind::VariableSorted => "VariableSorted",
            EventKind::VariableFiltered => "VariableFiltered",
            EventKind::ChartReset => "ChartReset",
            EventKind::RotationChanged => "RotationChanged",
            EventKind::Paused => "Paused",
            EventKind::Resumed => "Resumed",
            EventKind::SuppressedTravel => "SuppressedTravel",
            EventKind::SnapGuardReverted => "SnapGuardReverted",
            EventKind::Rejected => "Rejected",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Kinds that start a new feature. A single step emits at most one.
    pub fn is_initiation(self) -> bool {
        matches!(
            self,
            EventKind::TravelStarted
                | EventKind::ModeChanged
                | EventKind::ZoomedIn
                | EventKind::ZoomedOut
                | EventKind::ChartReset
                | EventKind::Paused
                | EventKind::Resumed
                | EventKind::TimeRangeApplied
                | EventKind::VariableSorted
                | EventKind::VariableFiltered
        )
    }
}

/// Analysis intent attached to every event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskTag {
    Select,
    Explore,
    Reconfigure,
    Encode,
    Abstract,
    Elaborate,
    Filter,
    Connect,
    Undo,
    ChangeConfiguration,
}

impl TaskTag {
    pub const ALL: [TaskTag; 10] = [
        TaskTag::Select,
        TaskTag::Explore,
        TaskTag::Reconfigure,
        TaskTag::Encode,
        TaskTag::Abstract,
        TaskTag::Elaborate,
        TaskTag::Filter,
        TaskTag::Connect,
        TaskTag::Undo,
        TaskTag::ChangeConfiguration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskTag::Select => "select",
            TaskTag::Explore => "explore",
            TaskTag::Reconfigure => "reconfigure",
            TaskTag::Encode => "encode",
            TaskTag::Abstract => "abstract",
            TaskTag::Elaborate => "elaborate",
            TaskTag::Filter => "filter",
            TaskTag::Connect => "connect",
            TaskTag::Undo => "undo",
            TaskTag::ChangeConfiguration => "change_configuration",
        }
    }
}

/// Task tag for a mode change: activation reveals detail, deactivation
/// hides it, cycling between the two active modes only reconfigures.
pub fn mode_change_tag(from: Mode, to: Mode) -> TaskTag {
    match (from.is_active(), to.is_active()) {
        (false, true) => TaskTag::Elaborate,
        (true, false) => TaskTag::Abstract,
        _ => TaskTag::ChangeConfiguration,
    }
}

/// Task tag for kinds whose tag does not depend on the payload.
pub fn fixed_task_tag(kind: EventKind) -> Option<TaskTag> {
    use EventKind::*;
    Some(match kind {
        TravelArmed | TravelStarted | TravelCompleted | SuppressedTravel => TaskTag::Explore,
        TimeEventSelected | TimeRangePreview | TimeRangeApplied | SnapGuardReverted => {
            TaskTag::Select
        }
        ZoomedIn => TaskTag::Elaborate,
        ZoomedOut => TaskTag::Abstract,
        VariableSorted => TaskTag::Reconfigure,
        VariableFiltered => TaskTag::Filter,
        ChartReset => TaskTag::Undo,
        RotationChanged | Paused | Resumed => TaskTag::ChangeConfiguration,
        ModeChanged | Rejected => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub t_ms: i64,
    pub seq: u64,
    pub kind: EventKind,
    pub chart_id: Option<String>,
    pub task_tag: TaskTag,
    /// Kind-specific fields. Object keys serialize in sorted order.
    pub payload: Value,
}

/// One row of the gesture catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feature {
    pub name: &'static str,
    pub kinds: &'static [EventKind],
    pub bimanual: bool,
    /// Ergonomic comfort codes attached to the gesture. Descriptive only.
    pub comfort_codes: &'static [&'static str],
}

pub const CATALOG: [Feature; 11] = [
    Feature {
        name: "Travel",
        kinds: &[EventKind::TravelArmed, EventKind::TravelStarted, EventKind::TravelCompleted],
        bimanual: false,
        comfort_codes: &["5c"],
    },
    Feature {
        name: "Mode Toggle",
        kinds: &[EventKind::ModeChanged],
        bimanual: false,
        comfort_codes: &["1c", "5c", "9c"],
    },
    Feature {
        name: "Rotation",
        kinds: &[EventKind::RotationChanged],
        bimanual: false,
        comfort_codes: &["2c", "10c"],
    },
    Feature {
        name: "Data Variable Sort",
        kinds: &[EventKind::VariableSorted],
        bimanual: false,
        comfort_codes: &["2c"],
    },
    Feature {
        name: "Data Variable Filter",
        kinds: &[EventKind::VariableFiltered],
        bimanual: false,
        comfort_codes: &["2c"],
    },
    Feature {
        name: "Time Event Selection",
        kinds: &[EventKind::TimeEventSelected],
        bimanual: false,
        comfort_codes: &["2c"],
    },
    Feature {
        name: "Time Range Selection",
        kinds: &[EventKind::TimeRangePreview, EventKind::TimeRangeApplied],
        bimanual: true,
        comfort_codes: &["2c", "2c"],
    },
    Feature {
        name: "Zoom in",
        kinds: &[EventKind::ZoomedIn],
        bimanual: true,
        comfort_codes: &["11u", "12u"],
    },
    Feature {
        name: "Zoom out",
        kinds: &[EventKind::ZoomedOut],
        bimanual: true,
        comfort_codes: &["11u", "12u"],
    },
    Feature {
        name: "Reset",
        kinds: &[EventKind::ChartReset],
        bimanual: true,
        comfort_codes: &["5c", "3u"],
    },
    Feature {
        name: "Pause/Resume",
        kinds: &[EventKind::Paused, EventKind::Resumed],
        bimanual: true,
        comfort_codes: &["3u", "3u"],
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in EventKind::ALL {
            assert_eq!(EventKind::from_name(k.name()), Some(k));
        }
        for t in TaskTag::ALL {
            let s = serde_json::to_string(&t).unwrap();
            assert_eq!(s, format!("\"{}\"", t.name()));
        }
    }

    #[test]
    fn mode_tags() {
        assert_eq!(mode_change_tag(Mode::Inactive, Mode::ActiveRotate), TaskTag::Elaborate);
        assert_eq!(
            mode_change_tag(Mode::ActiveRotate, Mode::ReconfigureFilter),
            TaskTag::ChangeConfiguration
        );
        assert_eq!(mode_change_tag(Mode::ReconfigureFilter, Mode::Inactive), TaskTag::Abstract);
    }

    #[test]
    fn catalog_covers_every_feature_kind() {
        for k in EventKind::ALL {
            let expected = !matches!(k, EventKind::SuppressedTravel | EventKind::SnapGuardReverted | EventKind::Rejected);
            let listed = CATALOG.iter().any(|f| f.kinds.contains(&k));
            assert_eq!(listed, expected, "{k:?}");
        }
    }
}
