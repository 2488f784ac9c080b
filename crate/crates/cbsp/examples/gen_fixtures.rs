//! Regenerates the bundles under `fixtures/`:
//! `cargo run -p cbsp --example gen_fixtures -- fixtures`

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    for fixture in cbsp::fixtures::all() {
        for (name, contents) in cbsp::fixtures::bundle_files(&fixture) {
            std::fs::write(dir.join(&name), contents)?;
            println!("{}", dir.join(name).display());
        }
    }
    Ok(())
}
