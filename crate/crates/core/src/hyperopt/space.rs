//! Search-space definition with unit-cube normalization.
//!
//! The optimizer works internally on `[0, 1]^d`; each dimension maps affinely
//! to its native range.  Integer dimensions are rounded in native units at
//! evaluation time, so the surrogate only ever sees representable points.

use crate::error::MedleyError;
use crate::Result;

/// One axis of a hyperparameter search space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    /// Round to the nearest integer in native units before evaluation.
    pub integer: bool,
}

impl Dimension {
    pub fn continuous(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            lower,
            upper,
            integer: false,
        }
    }

    pub fn integer(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            lower,
            upper,
            integer: true,
        }
    }
}

/// A box-bounded search space over named dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    dimensions: Vec<Dimension>,
}

impl SearchSpace {
    /// Validates and builds a search space.
    ///
    /// Every dimension needs finite bounds with `lower < upper`; integer
    /// dimensions additionally need integral bounds so rounding can never
    /// leave the box.
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self> {
        if dimensions.is_empty() {
            return Err(MedleyError::InvalidInput(
                "search space needs at least one dimension".into(),
            ));
        }
        for dim in &dimensions {
            if !dim.lower.is_finite() || !dim.upper.is_finite() {
                return Err(MedleyError::InvalidInput(format!(
                    "dimension '{}' has non-finite bounds",
                    dim.name
                )));
            }
            if dim.lower >= dim.upper {
                return Err(MedleyError::InvalidInput(format!(
                    "dimension '{}' needs lower < upper, got [{}, {}]",
                    dim.name, dim.lower, dim.upper
                )));
            }
            if dim.integer && (dim.lower.fract() != 0.0 || dim.upper.fract() != 0.0) {
                return Err(MedleyError::InvalidInput(format!(
                    "integer dimension '{}' needs integral bounds, got [{}, {}]",
                    dim.name, dim.lower, dim.upper
                )));
            }
        }
        Ok(Self { dimensions })
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn names(&self) -> Vec<&str> {
        self.dimensions.iter().map(|d| d.name.as_str()).collect()
    }

    /// Maps a unit-cube point to native units, rounding integer dimensions.
    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        assert_eq!(unit.len(), self.len(), "dimension mismatch");
        self.dimensions
            .iter()
            .zip(unit)
            .map(|(dim, &u)| {
                let clamped = u.clamp(0.0, 1.0);
                let native = dim.lower + clamped * (dim.upper - dim.lower);
                if dim.integer {
                    native.round().clamp(dim.lower, dim.upper)
                } else {
                    native
                }
            })
            .collect()
    }

    /// Maps a native point back into the unit cube.
    pub fn to_unit(&self, native: &[f64]) -> Vec<f64> {
        assert_eq!(native.len(), self.len(), "dimension mismatch");
        self.dimensions
            .iter()
            .zip(native)
            .map(|(dim, &x)| ((x - dim.lower) / (dim.upper - dim.lower)).clamp(0.0, 1.0))
            .collect()
    }

    /// Replaces a unit-cube point with the unit image of its evaluated
    /// (integer-rounded) native point, so stored observations coincide with
    /// the coordinates the objective actually saw.
    pub fn snap_unit(&self, unit: &[f64]) -> Vec<f64> {
        self.to_unit(&self.from_unit(unit))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> SearchSpace {
        SearchSpace::new(vec![
            Dimension::continuous("rate", 0.01, 0.5),
            Dimension::integer("depth", 1.0, 4.0),
        ])
        .unwrap()
    }

    #[test]
    fn rejects_empty_and_inverted_and_fractional_integer_bounds() {
        assert!(SearchSpace::new(vec![]).is_err());
        assert!(SearchSpace::new(vec![Dimension::continuous("a", 1.0, 1.0)]).is_err());
        assert!(SearchSpace::new(vec![Dimension::continuous("a", 2.0, 1.0)]).is_err());
        assert!(SearchSpace::new(vec![Dimension::continuous("a", f64::NAN, 1.0)]).is_err());
        assert!(SearchSpace::new(vec![Dimension::integer("a", 0.5, 4.0)]).is_err());
    }

    #[test]
    fn unit_mapping_round_trips_on_continuous_dimensions() {
        let s = space();
        let native = s.from_unit(&[0.25, 0.0]);
        assert!((native[0] - (0.01 + 0.25 * 0.49)).abs() < 1e-15);
        let back = s.to_unit(&native);
        assert!((back[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn integer_dimensions_round_to_nearest_level() {
        let s = space();
        // depth in [1, 4]: unit 0.5 -> native 2.5 -> rounds to 2 (ties to even-free round: 2.5 rounds to 3 with f64::round)
        let native = s.from_unit(&[0.0, 0.5]);
        assert_eq!(native[1], 3.0);
        let native = s.from_unit(&[0.0, 0.1]);
        assert_eq!(native[1], 1.0);
        let native = s.from_unit(&[0.0, 1.0]);
        assert_eq!(native[1], 4.0);
    }

    #[test]
    fn snap_unit_is_idempotent() {
        let s = space();
        let snapped = s.snap_unit(&[0.37, 0.62]);
        let twice = s.snap_unit(&snapped);
        assert_eq!(snapped, twice);
        // The continuous coordinate is untouched.
        assert!((snapped[0] - 0.37).abs() < 1e-12);
        // The integer coordinate lands exactly on a lattice level.
        let native = s.from_unit(&snapped);
        assert_eq!(native[1].fract(), 0.0);
    }

    #[test]
    fn out_of_cube_inputs_are_clamped() {
        let s = space();
        let native = s.from_unit(&[-0.5, 2.0]);
        assert_eq!(native[0], 0.01);
        assert_eq!(native[1], 4.0);
    }
}
