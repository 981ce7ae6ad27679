//! Regenerates the fixture tree: `cargo run -p epiforge-cli --example make_fixtures [DIR]`.

#[path = "../tests/support/fixtures.rs"]
mod fixtures;

fn main() {
    let root = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    fixtures::generate(&root);
    println!("wrote {} files under {}", fixtures::files(&root).len(), root.display());
}
