//! Current-voltage loop of a doped-junction memristor under sinusoidal drive.

use qumem::memristor::ClassicalMemristorState;

fn main() -> qumem::Result<()> {
    let mut m = ClassicalMemristorState::new(0.5e-8, 1e-8, 100.0, 16e3, 1e-16)?;
    let (f, amp, steps) = (1.0, 1e-4, 2000);
    let dt = 2.0 / f / steps as f64;
    println!("t       i          v          R");
    for k in 0..steps {
        let t = k as f64 * dt;
        let i = amp * (2.0 * std::f64::consts::PI * f * t).sin();
        let r = m.resistance();
        let v = m.step(i, dt)?;
        if k % 100 == 0 {
            println!("{t:.3}  {i:+.3e}  {v:+.3e}  {r:.1}");
        }
    }
    Ok(())
}
