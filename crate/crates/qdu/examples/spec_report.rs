//! Driving the report layer from code: build a spec, run a command, render
//! the same report in all three formats.

use qdu::report::{builtin_spec, cmd_check_seut, render, Format};

fn main() {
    let spec = builtin_spec("ellsberg").unwrap();
    println!("input digest: {}\n", spec.digest());

    let report = cmd_check_seut(&spec, "f1>f2,f4>f3", 100).unwrap();
    for format in [Format::Json, Format::Csv, Format::Md] {
        println!("---- {format:?} ----");
        let text = render(&report, format);
        for line in text.lines().take(12) {
            println!("{line}");
        }
        println!();
    }
}
