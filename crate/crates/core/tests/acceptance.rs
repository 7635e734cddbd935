use std::io::Write;
use std::sync::{Mutex, OnceLock};

use ris_idbp::acceptance::{self, CriterionOutcome};

static SERIAL: Mutex<()> = Mutex::new(());

fn check(run: impl FnOnce() -> CriterionOutcome) {
    let o = {
        let _turn = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
        run()
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{o}");
    let _ = out.flush();
    drop(out);
    assert!(o.passed, "{o}");
}

fn ordering() -> &'static (CriterionOutcome, CriterionOutcome) {
    static CELL: OnceLock<(CriterionOutcome, CriterionOutcome)> = OnceLock::new();
    CELL.get_or_init(acceptance::criteria_7_8)
}

#[test]
fn criterion_01_bound_identity() {
    check(acceptance::criterion_1);
}

#[test]
fn criterion_02_rate_forms() {
    check(acceptance::criterion_2);
}

#[test]
fn criterion_03_argmin_agreement() {
    check(acceptance::criterion_3);
}

#[test]
fn criterion_04_conjugation_invariance() {
    check(acceptance::criterion_4);
}

#[test]
fn criterion_05_oracle_near_optimality() {
    check(acceptance::criterion_5);
}

#[test]
fn criterion_06_complexity_counts() {
    check(acceptance::criterion_6);
}

#[test]
fn criterion_07_ordering() {
    check(|| ordering().0.clone());
}

#[test]
fn criterion_08_runtime_ratio() {
    check(|| ordering().1.clone());
}

#[test]
fn criterion_09_typicality() {
    check(acceptance::criterion_9);
}

#[test]
fn criterion_10_consistency() {
    check(acceptance::criterion_10);
}

#[test]
fn criterion_11_monotone_alternation() {
    check(acceptance::criterion_11);
}
