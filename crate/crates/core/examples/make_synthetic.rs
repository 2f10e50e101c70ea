//! Writes the synthetic fixture dataset (manifest + tensors).
//!
//! cargo run -p layerfuse --example make_synthetic -- [OUT_DIR]

use std::path::PathBuf;

use layerfuse::synthetic::{generate, write_dataset, SyntheticSpec};

fn main() -> layerfuse::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic"));
    let data = generate(&SyntheticSpec::default())?;
    let manifest = write_dataset(&data, &out)?;
    println!(
        "wrote {} samples x {} layers to {}",
        manifest.samples.len(),
        manifest.layers.len(),
        out.display()
    );
    Ok(())
}
