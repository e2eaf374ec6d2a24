//! Paths shared by the acceptance suite.

use std::path::PathBuf;

/// The `rcstab` executable built alongside the running test binary.
///
/// Test executables live in `target/<profile>/deps`; binaries one level up.
pub fn rcstab_binary() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let bin = profile_dir.join(format!("rcstab{}", std::env::consts::EXE_SUFFIX));
    bin.is_file().then_some(bin)
}

/// The shipped `configs/` directory.
pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}
