//! Separable vs entangled pure states on C^12 ⊗ C^12, each fed to the
//! reservoir as 100 identical copies.
//!
//! cargo run --release --example entanglement_detection -- [per_class]

use qumem::pipeline::{default_threads, run_entanglement, EntanglementTaskConfig};

fn main() -> qumem::Result<()> {
    let mut cfg = EntanglementTaskConfig::default();
    if let Some(n) = std::env::args().nth(1) {
        let n: usize = n.parse().map_err(|_| qumem::Error::Config(format!("bad count '{n}'")))?;
        cfg.train_per_class = n;
        cfg.test_per_class = n;
    }
    let start = std::time::Instant::now();
    let out = run_entanglement(&cfg, default_threads())?;
    let r = &out.report;
    println!("train accuracy {:.3}  test accuracy {:.3}", r.train.accuracy, r.test.accuracy);
    println!("confusion (rows true separable/entangled): {:?}", r.test.confusion);
    println!("{:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
