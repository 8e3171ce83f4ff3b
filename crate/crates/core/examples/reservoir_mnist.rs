//! Classify MNIST digits 0/3/8 with the memristor reservoir.
//!
//! cargo run --release --example reservoir_mnist -- [quantum|coherent] [on|off] [shots]

use qumem::pipeline::{default_threads, run_mnist, Encoding, MnistTaskConfig};
use qumem::reservoir::Shots;

fn main() -> qumem::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = MnistTaskConfig::default();
    if let Some(e) = args.first() {
        cfg.encoding = e.parse::<Encoding>()?;
    }
    cfg.reservoir.feedback = args.get(1).is_none_or(|f| f != "off");
    if let Some(s) = args.get(2) {
        cfg.reservoir.shots = s.parse::<Shots>()?;
    }
    let start = std::time::Instant::now();
    let out = run_mnist(&cfg, default_threads())?;
    let r = &out.report;
    println!(
        "encoding={} feedback={} shots={}",
        cfg.encoding, cfg.reservoir.feedback, cfg.reservoir.shots
    );
    println!("train accuracy {:.3}  test accuracy {:.3}", r.train.accuracy, r.test.accuracy);
    println!("confusion (rows true 0/3/8): {:?}", r.test.confusion);
    if let Some(s) = r.encoding {
        println!("{} of {} columns were blank", s.zero_fallbacks, s.inputs);
    }
    println!("loss per epoch: {:?}", r.epoch_loss.iter().map(|l| (l * 1e3).round() / 1e3).collect::<Vec<_>>());
    println!("{:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
