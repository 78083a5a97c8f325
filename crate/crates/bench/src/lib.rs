//! Fixtures shared by the benchmarks.

use bhflow_core::{ChartPoint, C64};

/// A generic point off the curve in chart 0.
pub fn generic_point() -> ChartPoint {
    ChartPoint::new(0, C64::new(0.3, -0.2), C64::new(0.5, 0.7))
}
