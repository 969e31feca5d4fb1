//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::thread;

use chiral_core::verify::{
    dynamics_suite, generic_params, mirror_suite, perturbation_suite, planar_suite, symmetry_suite,
    variation_suite, DynamicsSuiteConfig, SuiteReport,
};

const SEED: u64 = 20240611;

type Outcome = chiral_core::Result<Vec<SuiteReport>>;

fn criterion_1() -> Outcome {
    let (report, _) = symmetry_suite(&generic_params(), 100, SEED)?;
    Ok(vec![report])
}

fn criterion_2() -> Outcome {
    Ok(vec![variation_suite(&generic_params(), 50, SEED)?])
}

fn criterion_3() -> Outcome {
    Ok(vec![planar_suite(100, SEED)?])
}

fn criterion_4() -> Outcome {
    Ok(vec![perturbation_suite()?])
}

fn criterion_5() -> Outcome {
    Ok(vec![dynamics_suite(&DynamicsSuiteConfig::default())?])
}

fn criterion_6() -> Outcome {
    let (report, _) = mirror_suite(&DynamicsSuiteConfig::default(), &[0.0, 0.05], 1e-4)?;
    Ok(vec![report])
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("1 symmetries", criterion_1),
        ("2 variational derivatives", criterion_2),
        ("3 planar identities", criterion_3),
        ("4 perturbation order", criterion_4),
        ("5 dynamics at chi = 0", criterion_5),
        ("6 mirror check", criterion_6),
    ];
    let handles: Vec<_> = criteria
        .iter()
        .map(|&(name, f)| (name, thread::spawn(f)))
        .collect();
    let mut all = true;
    for (name, h) in handles {
        let outcome = h.join().unwrap_or_else(|_| Err(chiral_core::Error::Config("criterion panicked".into())));
        match outcome {
            Ok(reports) => {
                let passed = reports.iter().all(|r| r.passed);
                all &= passed;
                println!("criterion {name}: {}", if passed { "PASS" } else { "FAIL" });
                for c in reports.iter().flat_map(|r| &r.checks) {
                    let mark = if c.passed { "ok  " } else { "FAIL" };
                    let note = c.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default();
                    println!("    {mark} {:<48} {:.3e} vs {:.1e}{note}", c.name, c.measured, c.tolerance);
                }
            }
            Err(e) => {
                all = false;
                println!("criterion {name}: FAIL (error: {e})");
            }
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
