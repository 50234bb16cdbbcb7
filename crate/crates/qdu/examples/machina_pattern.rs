//! The C⁴ Machina reflection model: informational symmetry holds for every
//! state, yet both symmetric preference patterns are reproducible while a
//! single classical prior supports neither.

use qdu::baselines::PreferencePattern;
use qdu::ellsberg::MechanismTag;
use qdu::machina::{
    build_machina_state, evaluate_all_machina, machina_pattern_search,
    machina_seut_infeasibility, MachinaModel,
};
use qdu::urn::UtilityFunction;

fn main() {
    let u = UtilityFunction::Linear;

    // the fully symmetric point: everything equals 25
    let uniform = build_machina_state(0.25, 0.25, [0.0; 3]).unwrap();
    let table = evaluate_all_machina(&uniform, &MachinaModel::Canonical, &u).unwrap();
    println!("uniform state, canonical model: {table:?}\n");

    for prefs in [[("f1", "f2"), ("f4", "f3")], [("f2", "f1"), ("f3", "f4")]] {
        let pattern = PreferencePattern::new(&prefs);
        let fit = machina_pattern_search(&pattern, MechanismTag::RotatedProjectors, &u, 7).unwrap();
        println!("pattern {pattern}: found with margin ≥ {}", fit.margin);
        for (act, eu) in &fit.eu {
            println!("  EU({act}) = {eu:.4}");
        }
    }

    let pattern = PreferencePattern::new(&[("f1", "f2"), ("f4", "f3")]);
    let verdict = machina_seut_infeasibility(&pattern, 100).unwrap();
    println!("\nSEUT verdict for {pattern}: {:?}", verdict.status);
    if let Some(cert) = verdict.certificate {
        println!("certificate: {cert}");
    }
}
