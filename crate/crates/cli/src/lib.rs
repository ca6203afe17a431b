//! Command-line layer over `sharpflow-core`: configured single runs, named
//! experiment presets with CSV artifacts, trajectory norm reports, and the
//! acceptance checks that gate a release.
//!
//! Module map:
//! - [`config`]: flat key=value run setup and output directory resolution.
//! - [`experiments`]: reusable measurement blocks shared by presets and checks.
//! - [`presets`]: named experiment bundles that write CSV/plot/manifest files.
//! - [`acceptance`]: pass/fail criteria with pinned tolerances.

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod presets;

/// Exit code for a clean run with every checked threshold met.
pub const EXIT_OK: i32 = 0;
/// Exit code when the run completed but a measured quantity missed its
/// acceptance threshold.
pub const EXIT_THRESHOLD: i32 = 2;
/// Exit code for runtime failures: bad arguments, bad config, I/O, solver
/// errors. Kept distinct from threshold misses so scripts can tell a broken
/// invocation from a failed experiment.
pub const EXIT_RUNTIME: i32 = 1;
