//! Regenerate `data/final_query_sessions.jsonl`.

use robust_elicit::analysis::{fixture::final_query_fixture, to_jsonl};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/final_query_sessions.jsonl");
    std::fs::write(&path, to_jsonl(&final_query_fixture())?)?;
    println!("wrote {}", path.display());
    Ok(())
}
