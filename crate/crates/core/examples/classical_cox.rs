//! Classical Cox chains, their parallel-branch form, and when a parallel
//! model can be rewritten as a chain.

use phasefit::analysis;
use phasefit::model::RoutingFeasibility;
use phasefit::{Branch, ClassicalCoxSpec, GeneralizedCoxModel};

fn main() -> phasefit::Result<()> {
    // leave after stage 1 with probability 0.3, after stage 2 with 0.5
    let spec = ClassicalCoxSpec::new(vec![0.3, 0.5, 1.0], vec![1.0, 2.0, 3.0])?;
    let model = GeneralizedCoxModel::from_classical_cox(&spec)?;
    println!("chain {:?} / {:?}", spec.abandon_probs, spec.rates);
    for b in model.branches() {
        println!("  branch prob {:.3} rates {:?}", b.prob, b.rates);
    }
    println!(
        "  mean {:.6}, variance {:.6}",
        analysis::mean(&model),
        analysis::variance(&model)
    );

    for (l1, l2) in [(1.0, 2.0), (2.0, 1.0)] {
        let hyper =
            GeneralizedCoxModel::new(vec![Branch::new(0.5, vec![l1]), Branch::new(0.5, vec![l2])])?;
        match hyper.cox_routing_feasible()? {
            RoutingFeasibility::Feasible { q1, q2, classical } => {
                let chain = GeneralizedCoxModel::from_classical_cox(&classical)?;
                println!(
                    "rates ({l1}, {l2}): chain with q1={q1}, q2={q2}; L(1) {:.12} vs {:.12}",
                    analysis::laplace_real(&hyper, 1.0)?,
                    analysis::laplace_real(&chain, 1.0)?,
                );
            }
            RoutingFeasibility::Infeasible { required_q1 } => {
                println!("rates ({l1}, {l2}): no chain, routing would need q1={required_q1}");
            }
        }
    }
    Ok(())
}
