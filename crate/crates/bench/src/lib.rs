//! Fixtures shared by the benchmarks.

use confcurve::{Counts, Study, Table2x2};

/// Deaths / patients in the treated and control arms of the seven
/// corticosteroid trials.
pub const COVID: [(&str, u64, u64, u64, u64); 7] = [
    ("DEXA-COVID 19", 2, 7, 2, 12),
    ("CoDEX", 69, 128, 76, 128),
    ("RECOVERY", 95, 324, 283, 683),
    ("CAPE COVID", 11, 75, 20, 73),
    ("COVID STEROID", 6, 15, 2, 14),
    ("REMAP-CAP", 26, 105, 29, 92),
    ("Steroids-SARI", 13, 24, 13, 23),
];

pub fn covid_studies() -> Vec<Study> {
    COVID
        .iter()
        .map(|&(id, et, nt, ec, nc)| {
            Study::from_counts(id, Counts::new(et, nt, ec, nc).expect("valid counts"))
                .expect("no zero cells")
        })
        .collect()
}

pub fn covid_tables() -> Vec<Table2x2> {
    COVID
        .iter()
        .map(|&(_, et, nt, ec, nc)| Table2x2::new(et, nt - et, ec, nc - ec).expect("valid table"))
        .collect()
}
