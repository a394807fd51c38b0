//! Two hyperexponential fits with identical first two moments: the minimal
//! one-stage fit with an atom at zero, and a two-stage fit without one.
//! Their higher moments differ, but mean queue waits depend only on the
//! first two.

use phasefit::analysis;
use phasefit::des;
use phasefit::fitting;

fn main() -> phasefit::Result<()> {
    let cv2 = 4.0;
    let simplest = fitting::simplest_hyper(1.0, cv2)?;
    let sc = fitting::sauer_chandy(1.0, cv2)?;
    for fit in [&simplest, &sc] {
        let m3 = analysis::moment_k(&fit.model, 3)?;
        let stats = des::run_mph1(0.6, &fit.model, 500_000, 5)?;
        println!(
            "{:<15} stages {}  atom {:.3}  E[T^3] {:>8.3}  wait {:.4} +- {:.4}",
            fit.family.to_string(),
            fit.n_transient,
            fit.model.atom0(),
            m3,
            stats.mean_wait,
            stats.se_wait
        );
    }
    println!(
        "P-K mean wait: {:.4}",
        des::pk_mean_wait(0.6, &simplest.target)?
    );
    Ok(())
}
