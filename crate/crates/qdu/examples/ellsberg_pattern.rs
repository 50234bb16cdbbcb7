//! Searching for a quantum model of the Ellsberg paradox pattern: the
//! unambiguous bets stay pinned at 4 and 8 while rotated projectors move
//! the ambiguous ones below them.

use qdu::baselines::PreferencePattern;
use qdu::ellsberg::{find_pattern_model, MechanismTag};
use qdu::urn::UtilityFunction;

fn main() {
    let pattern = PreferencePattern::new(&[("f1", "f2"), ("f4", "f3")]);
    let u = UtilityFunction::Linear;

    for mech in [MechanismTag::RotatedProjectors, MechanismTag::ContextualState] {
        let fit = find_pattern_model(&pattern, mech, &u, 7).unwrap();
        println!("mechanism {mech:?} (restarts used: {})", fit.restarts_used);
        for (act, eu) in &fit.eu {
            println!("  EU({act}) = {eu:.6}");
        }
        println!("  margin required: {}\n", fit.margin);
    }

    // the canonical restriction cannot produce the pattern at all
    match find_pattern_model(&pattern, MechanismTag::Canonical, &u, 7) {
        Err(e) => println!("canonical projectors with one fixed state: {e}"),
        Ok(_) => unreachable!("provably empty"),
    }
}
