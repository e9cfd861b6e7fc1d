//! Full pipeline: corpus, pairs, matching, detection, attribution and
//! characterization, written to a directory.
//!
//! cargo run --release --example reproduce -- [out_dir] [seed]

use std::path::PathBuf;
use std::time::Instant;

use ban_evasion::corpus::SynthConfig;
use ban_evasion::pipeline::{reproduce, write_outputs, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "reproduce_out".into()));
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let started = Instant::now();
    let output = reproduce(&SynthConfig { seed, ..SynthConfig::default() }, &PipelineConfig { seed, ..PipelineConfig::default() })?;
    write_outputs(&out, &output)?;
    print!("{}", output.detection.report.summary());
    println!("wrote {} in {:.1?}", out.display(), started.elapsed());
    Ok(())
}
