//! Fixtures shared by the benchmarks.

use knobtune::measurement::{CostPolicy, SyntheticBackend, SyntheticLandscape, SyntheticLandscapeParams};
use knobtune::{DesignSpace, Knob};

/// Six knobs of seven power-of-two values each.
pub fn suite_space() -> DesignSpace {
    let names = ["tile_f", "tile_y", "tile_x", "tile_rc", "tile_ry", "unroll"];
    let knobs = names
        .iter()
        .map(|n| Knob {
            name: n.to_string(),
            values: (0..7).map(|p| 1i64 << p).collect(),
        })
        .collect();
    DesignSpace::new("conv2d_bench", knobs, None).expect("valid space")
}

pub fn suite_backend(space: &DesignSpace, seed: u64) -> SyntheticBackend {
    let params = SyntheticLandscapeParams {
        seed,
        ..Default::default()
    };
    SyntheticBackend::new(
        SyntheticLandscape::new(params, space).expect("valid landscape"),
        CostPolicy::default(),
    )
}
