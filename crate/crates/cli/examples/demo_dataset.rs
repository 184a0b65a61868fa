//! Writes a small mixed dataset built from the bundled reference systems.
//!
//! `cargo run -p symlaw-cli --example demo_dataset -- data/demo`

use std::path::PathBuf;

use symlaw_core::catalog::{HARMONIC_OSCILLATOR, SCALAR_ODES, SEIR};
use symlaw_engine::fixtures::{cortical_sample, linear_scm_sample, ode_sample};

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/demo".into()));
    std::fs::create_dir_all(&dir).expect("create output directory");
    let samples = [
        ode_sample(&SCALAR_ODES[1]),
        ode_sample(&SCALAR_ODES[2]),
        ode_sample(&HARMONIC_OSCILLATOR),
        ode_sample(&SEIR),
        cortical_sample(),
        linear_scm_sample(7, 500),
    ];
    for s in &samples {
        let path = dir.join(format!("{}.json", s.id));
        s.save(&path).expect("write sample");
        println!("{}", path.display());
    }
}
