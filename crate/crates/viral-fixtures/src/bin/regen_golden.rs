//! Maintenance tool: recompute the frozen golden files from the bundled
//! fixtures and report whether anything moved. Run from anywhere in the
//! workspace; paths resolve against this crate.

use std::fs;

use viral_core::scoring::ScoreContext;
use viral_fixtures::{corpus_12, golden_scores_12_path};

fn main() {
    let table = ScoreContext::new(&corpus_12()).score_table();
    let fresh = table.to_csv();
    let path = golden_scores_12_path();
    let old = fs::read_to_string(&path).unwrap_or_default();
    if old == fresh {
        println!("{} unchanged", path.display());
        return;
    }
    fs::write(&path, &fresh).expect("write golden file");
    println!("{} rewritten; review the diff before committing", path.display());
}
