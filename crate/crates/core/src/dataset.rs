//! Entities and their multivariate time series.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;

/// One data entity, drawn as one radar chart standing on the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub x: f64,
    pub y: f64,
    /// One series per variable, in dataset variable order.
    pub series: Vec<Vec<f64>>,
}

impl Entity {
    /// Floor position as a world point at height zero.
    pub fn floor_point(&self) -> Vec3 {
        Vec3::new(self.x, 0.0, self.y)
    }

    pub fn event_count(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }
}

/// A validated dataset. Construct through [`Dataset::new`] or the loaders in
/// [`crate::session`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub variables: Vec<String>,
    pub timestamps: Vec<String>,
    pub entities: Vec<Entity>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("length mismatch at {path}: expected {expected}, found {found}")]
    LengthMismatch {
        path: String,
        expected: usize,
        found: usize,
    },
}

impl DatasetError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl Dataset {
    pub fn new(
        variables: Vec<String>,
        timestamps: Vec<String>,
        entities: Vec<Entity>,
    ) -> Result<Self, DatasetError> {
        let ds = Self {
            variables,
            timestamps,
            entities,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn event_count(&self) -> usize {
        self.timestamps.len()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let v = self.variables.len();
        let t = self.timestamps.len();
        if v == 0 {
            return Err(DatasetError::schema("variables", "at least one variable required"));
        }
        if t < 2 {
            return Err(DatasetError::schema("timestamps", "at least two time events required"));
        }
        if self.entities.is_empty() {
            return Err(DatasetError::schema("entities", "at least one entity required"));
        }
        let mut seen = HashSet::new();
        for (i, e) in self.entities.iter().enumerate() {
            if !seen.insert(e.id.as_str()) {
                return Err(DatasetError::schema(
                    format!("entities[{i}].id"),
                    format!("duplicate entity id {:?}", e.id),
                ));
            }
            if !e.x.is_finite() || !e.y.is_finite() {
                return Err(DatasetError::schema(
                    format!("entities[{i}]"),
                    "position must be finite",
                ));
            }
            if e.series.len() != v {
                return Err(DatasetError::LengthMismatch {
                    path: format!("entities[{i}].series"),
                    expected: v,
                    found: e.series.len(),
                });
            }
            for (j, s) in e.series.iter().enumerate() {
                if s.len() != t {
                    return Err(DatasetError::LengthMismatch {
                        path: format!("entities[{i}].series[{j}]"),
                        expected: t,
                        found: s.len(),
                    });
                }
                if let Some(k) = s.iter().position(|x| !x.is_finite()) {
                    return Err(DatasetError::schema(
                        format!("entities[{i}].series[{j}][{k}]"),
                        "value must be finite",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entity(id: &str, v: usize, t: usize) -> Entity {
        Entity {
            id: id.into(),
            name: id.into(),
            x: 0.0,
            y: 0.0,
            series: vec![vec![1.0; t]; v],
        }
    }

    fn names(n: usize, prefix: &str) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn accepts_well_formed() {
        let ds = Dataset::new(names(2, "v"), names(3, "d"), vec![entity("a", 2, 3)]);
        assert!(ds.is_ok());
    }

    #[test]
    fn rejects_short_time_axis() {
        let err = Dataset::new(names(1, "v"), names(1, "d"), vec![entity("a", 1, 1)]).unwrap_err();
        assert!(matches!(err, DatasetError::Schema { ref path, .. } if path == "timestamps"));
    }

    #[test]
    fn rejects_duplicate_ids_and_bad_lengths() {
        let err = Dataset::new(
            names(1, "v"),
            names(3, "d"),
            vec![entity("a", 1, 3), entity("a", 1, 3)],
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::Schema { ref path, .. } if path == "entities[1].id"));

        let err = Dataset::new(names(1, "v"), names(3, "d"), vec![entity("a", 1, 2)]).unwrap_err();
        assert_eq!(
            err,
            DatasetError::LengthMismatch {
                path: "entities[0].series[0]".into(),
                expected: 3,
                found: 2
            }
        );
    }

    #[test]
    fn rejects_non_finite_values() {
        let mut e = entity("a", 1, 3);
        e.series[0][1] = f64::NAN;
        let err = Dataset::new(names(1, "v"), names(3, "d"), vec![e]).unwrap_err();
        assert!(matches!(err, DatasetError::Schema { ref path, .. } if path == "entities[0].series[0][1]"));
    }
}
