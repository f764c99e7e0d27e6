//! Print the built-in default scenario as a TOML scenario file.
//!
//! The output round-trips: feeding it back through the scenario loader
//! reproduces the built-in defaults exactly. The `canonical.scenario` file
//! at the repository root is generated this way.

fn main() {
    print!("{}", dstatcom_core::render_toml(&dstatcom_core::canonical_loaded()));
}
