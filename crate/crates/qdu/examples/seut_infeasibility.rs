//! No single subjective prior explains the modal Ellsberg or Machina
//! choices: both patterns reduce to contradictory linear inequalities.

use qdu::baselines::{default_utility_family, seut_pattern_feasibility, PreferencePattern};
use qdu::urn::{ellsberg_urn, machina_urn};

fn main() {
    let family = default_utility_family();
    for (name, exp) in [("Ellsberg", ellsberg_urn()), ("Machina", machina_urn())] {
        println!("== {name} ==");
        for text in ["f1>f2,f4>f3", "f1>f2,f3>f4"] {
            let pattern = PreferencePattern::parse(text).unwrap();
            let v = seut_pattern_feasibility(&exp, &pattern, &family, 100).unwrap();
            println!("pattern {text}: {:?}", v.status);
            if let Some(cert) = &v.certificate {
                println!("  certificate: {cert}");
            }
            if let Some(w) = &v.witness {
                println!("  witness prior: {:?}", w.prior.entries);
            }
        }
        println!();
    }
}
