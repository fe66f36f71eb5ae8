//! Reference H1 errors of the three-dimensional manufactured case on
//! `M = 25, 50, 100` at `t = 1, 2, 3, 4`, with `dt = h^{1/2}` for linear and
//! `dt = h` for quadratic elements.

use crate::mms::{ErrorReport, FieldId};

pub const REFERENCE_LEVELS: [usize; 3] = [25, 50, 100];
pub const REFERENCE_TOLERANCE: f64 = 0.2;

type Table = [[f64; 3]; 4];

const LINEAR_A: Table = [
    [4.9855e-01, 2.3894e-01, 1.1887e-01],
    [6.7234e-01, 3.2057e-01, 1.7574e-01],
    [4.6375e-01, 2.2119e-01, 1.0373e-01],
    [5.8205e-01, 3.0487e-01, 1.4287e-01],
];
const LINEAR_PSI: Table = [
    [3.0718e-01, 1.4419e-01, 7.4104e-02],
    [4.3713e-01, 2.1289e-01, 1.1430e-01],
    [3.0004e-01, 1.4202e-01, 6.9620e-02],
    [2.2543e-01, 1.2316e-01, 6.0316e-02],
];
const LINEAR_PHI: Table = [
    [1.9412e-01, 8.6435e-02, 4.3191e-02],
    [1.2473e-01, 7.0233e-02, 3.3148e-02],
    [1.1031e-01, 6.1394e-02, 2.9217e-02],
    [8.7695e-02, 4.1380e-02, 2.1815e-02],
];
const QUADRATIC_A: Table = [
    [6.5062e-02, 1.6679e-02, 4.1805e-03],
    [5.5496e-02, 1.5018e-02, 3.7016e-03],
    [4.1903e-02, 1.3291e-02, 2.4825e-03],
    [3.4765e-02, 8.4562e-03, 2.0952e-03],
];
const QUADRATIC_PSI: Table = [
    [1.1930e-02, 3.2391e-03, 8.0967e-04],
    [1.0237e-02, 2.9786e-03, 5.9668e-04],
    [2.2342e-02, 4.8413e-03, 1.3683e-03],
    [1.3203e-02, 3.1681e-03, 7.8548e-04],
];
const QUADRATIC_PHI: Table = [
    [3.1070e-02, 7.8114e-03, 1.8648e-03],
    [2.7189e-02, 8.2275e-03, 1.8301e-03],
    [3.1162e-02, 6.9836e-03, 1.7682e-03],
    [2.5343e-02, 6.4257e-03, 1.6146e-03],
];

/// Reference error of `field` at integer time `t` in 1..=4 and level index
/// `level` into [`REFERENCE_LEVELS`].
pub fn reference_error(order: usize, field: FieldId, t: usize, level: usize) -> Option<f64> {
    let table = match (order, field) {
        (1, FieldId::A) => &LINEAR_A,
        (1, FieldId::Psi) => &LINEAR_PSI,
        (1, FieldId::Phi) => &LINEAR_PHI,
        (2, FieldId::A) => &QUADRATIC_A,
        (2, FieldId::Psi) => &QUADRATIC_PSI,
        (2, FieldId::Phi) => &QUADRATIC_PHI,
        _ => return None,
    };
    table.get(t.checked_sub(1)?)?.get(level).copied()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCheck {
    pub field: FieldId,
    pub time: f64,
    pub subdivisions: usize,
    pub computed: f64,
    pub reference: f64,
    pub relative_deviation: f64,
    pub pass: bool,
}

/// Compares every computed entry that has a reference value.
pub fn compare_reference(report: &ErrorReport, order: usize) -> Vec<ReferenceCheck> {
    let mut out = Vec::new();
    for level in &report.levels {
        let Some(li) = REFERENCE_LEVELS
            .iter()
            .position(|&m| m == level.subdivisions)
        else {
            continue;
        };
        for snap in &level.snapshots {
            let t = snap.time.round();
            if (snap.time - t).abs() > 1e-9 {
                continue;
            }
            for field in FieldId::ALL {
                let Some(reference) = reference_error(order, field, t as usize, li) else {
                    continue;
                };
                let computed = snap.get(field).h1;
                let dev = (computed - reference).abs() / reference;
                out.push(ReferenceCheck {
                    field,
                    time: snap.time,
                    subdivisions: level.subdivisions,
                    computed,
                    reference,
                    relative_deviation: dev,
                    pass: dev <= REFERENCE_TOLERANCE,
                });
            }
        }
    }
    out
}
