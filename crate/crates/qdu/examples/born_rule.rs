//! Born probabilities and interference: a superposition of two Ellsberg
//! states is not a classical mixture, and the cross terms say by how much.

use qdu::ellsberg::{build_ellsberg_state, color_context};
use qdu::hilbert::{born_probabilities, interference_terms, superpose, C64};

fn main() {
    let w1 = build_ellsberg_state(0.5, 0.3, 1.2).unwrap();
    let w2 = build_ellsberg_state(0.1, 2.0, 0.4).unwrap();
    let pvm = color_context();

    let a = C64::new(1.0 / 2f64.sqrt(), 0.0);
    let b = C64::from_polar(1.0 / 2f64.sqrt(), 0.7);
    let s = superpose(a, w1.state(), b, w2.state()).unwrap();

    let p1 = born_probabilities(w1.state(), &pvm).unwrap();
    let p2 = born_probabilities(w2.state(), &pvm).unwrap();
    let ps = born_probabilities(&s, &pvm).unwrap();
    let terms = interference_terms(a, w1.state(), b, w2.state(), &pvm).unwrap();

    println!("color     p(w1)     p(w2)     mixture   interference  p(a·w1+b·w2)");
    for (k, label) in pvm.labels().enumerate() {
        let mix = a.norm_sqr() * p1[k] + b.norm_sqr() * p2[k];
        println!(
            "{label:<8}  {:.6}  {:.6}  {:.6}  {:>+.6}     {:.6}",
            p1[k], p2[k], mix, terms[k], ps[k]
        );
    }
    println!("\nBorn sums: {:.12} / {:.12}", p1.iter().sum::<f64>(), ps.iter().sum::<f64>());
    println!("sum of interference terms: {:+.6}", terms.iter().sum::<f64>());
}
