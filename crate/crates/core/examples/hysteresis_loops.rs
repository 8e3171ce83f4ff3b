//! Pinched hysteresis of the closed-loop memristor for several window lengths
//! and for the low-pass law. Writes CSV traces to the directory given as the
//! first argument (default: target/hysteresis).

use std::path::PathBuf;

use qumem::hysteresis::{run_closed_loop, run_lpf_loop, DetectionConfig, DriveConfig};
use qumem::memristor::MemristorState;

fn main() -> qumem::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/hysteresis".into()));
    let det = DetectionConfig::default();
    let drive = DriveConfig::new(10.0, 3);
    println!("windowed, T_osc = 10 s");
    println!("T/T_osc  area     lf_rms  hf_rms  pinched");
    for ratio in [0.01, 0.05, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let trace = run_closed_loop(&drive, MemristorState::windowed(ratio * drive.t_osc)?, &det)?;
        println!(
            "{ratio:<7}  {:.5}  {:.4}  {:.4}  {}",
            trace.orbit_area(),
            trace.low_freq_rms(),
            trace.high_freq_rms(),
            trace.is_pinched(0.02)
        );
        trace.write(&dir, &format!("windowed_{ratio}"))?;
    }
    println!("low-pass, f_cut = 4.62 Hz");
    println!("f_osc  area     lf_rms  pinched");
    for f in [0.1, 1.0, 4.62, 10.0] {
        let trace = run_lpf_loop(&DriveConfig::new(1.0 / f, 3), 4.62, &det)?;
        println!("{f:<5}  {:.5}  {:.4}  {}", trace.orbit_area(), trace.low_freq_rms(), trace.is_pinched(0.02));
        trace.write(&dir, &format!("lowpass_{f}"))?;
    }
    println!("traces in {}", dir.display());
    Ok(())
}
