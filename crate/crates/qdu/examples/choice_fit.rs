//! Fitting commuting choice observables to the observed 59-participant
//! marginals, and the structural 3-cell limit on their joint distribution.

use qdu::choice::{
    choice_weights, fit_marginals, joint_distribution, min_l1_joint_fit, sequential_distribution,
    JointDistribution, MeasurementOrder,
};
use qdu::urn::ellsberg_urn;

fn main() {
    let counts = ellsberg_urn().observed.unwrap();
    let m = choice_weights(&counts).unwrap();
    println!("observed marginals: p(f1) = {:.4}, p(f4) = {:.4}", m.p_f1, m.p_f4);

    let fit = fit_marginals((0.68, 0.69), 17).unwrap();
    println!("fit residual: {:.3e} (restarts used: {})", fit.residual, fit.restarts_used);

    let pair = fit.pair.to_pair().unwrap();
    let state = fit.state_vector().unwrap();
    println!("commutator norm: {:.3e}", pair.commutator_norm());

    let joint = joint_distribution(&state, &pair).unwrap();
    println!("model joint cells: {:?}", joint.cells);
    let nonzero = joint.cells.iter().filter(|&&x| x > 1e-12).count();
    println!("cells above 1e-12: {nonzero} (a sharp commuting pair in C³ allows at most 3)");

    // measurement order does not matter for a commuting pair
    for order in [MeasurementOrder::Bet12First, MeasurementOrder::Bet34First] {
        let seq = sequential_distribution(&state, &pair.o12, &pair.o34, order).unwrap();
        println!("{order:?}: {:?}", seq.cells);
    }

    let observed = JointDistribution::from_counts(&counts).unwrap();
    let (l1, support) = min_l1_joint_fit(&observed);
    println!(
        "closest 3-cell distribution to the data: L1 distance {l1:.6} (= 2·min cell), support {support:?}"
    );
}
