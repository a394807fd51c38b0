//! Export a model as an absorbing Markov chain, in both the exact form and
//! the form with an explicit fast routing state.

use phasefit::analysis;
use phasefit::fitting;
use phasefit::markov;

fn main() -> phasefit::Result<()> {
    let fit = fitting::fit_two_moments(1.0, 0.6)?;
    let exact = markov::exact_absorbing_ctmc(&fit.model);
    println!("{}", exact.to_json());
    println!("{}", exact.to_dot());

    for k in 1..=3 {
        println!(
            "E[T^{k}]: chain {:.12}, model {:.12}",
            exact.absorption_time_moment(k)?,
            analysis::moment_k(&fit.model, k)?
        );
    }

    let big = markov::default_big_lambda(&fit.model);
    let approx = markov::approx_ctmc(&fit.model, big)?;
    let bias = approx.absorption_time_moment(1)? - exact.absorption_time_moment(1)?;
    println!(
        "routing rate {big}: mean bias {bias:e}, 1/rate {:e}",
        1.0 / big
    );
    Ok(())
}
