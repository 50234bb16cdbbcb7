//! The ambiguity-sensitive classical baselines on the Ellsberg urn:
//! Max-Min over the full prior set, Choquet with a convex capacity,
//! variational with zero penalty, and smooth second-order EU.

use qdu::baselines::{
    choquet_expected_utility, ellsberg_convex_capacity, full_prior_set, maxmin_expected_utility,
    second_order_expected_utility, variational_expected_utility, PhiSpec,
};
use qdu::urn::{ellsberg_urn, ProbabilityVector};

fn main() {
    let exp = ellsberg_urn();
    let u = exp.utility;
    let priors = full_prior_set(&exp.urn);
    let cap = ellsberg_convex_capacity();
    let vertices = priors.vertices();
    let w = 1.0 / vertices.len() as f64;
    let mu: Vec<(ProbabilityVector, f64)> = vertices.into_iter().map(|p| (p, w)).collect();

    println!("act   maxmin   choquet  variational  second-order(sqrt)");
    for act in &exp.acts {
        let mm = maxmin_expected_utility(act, &priors, &u).unwrap();
        let ceu = choquet_expected_utility(act, &cap, &u).unwrap();
        let var = variational_expected_utility(act, &priors, |_| 0.0, 100, &u).unwrap();
        let so = second_order_expected_utility(act, &mu, &PhiSpec::Sqrt, &u).unwrap();
        println!("{:<4}  {mm:<7.3}  {ceu:<7.3}  {var:<11.3}  {so:.3}", act.name);
    }
    println!("\ncapacity convex: {}", cap.is_convex());
    println!("Choquet pattern: f1 > f2 and f4 > f3, the modal Ellsberg choices");
}
