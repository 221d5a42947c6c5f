//! Scenarios compiled into the binary; the same files live in `scenarios/`.

pub const ALL: &[(&str, &str)] = &[
    ("coherence_of_plus", include_str!("../scenarios/coherence_of_plus.json")),
    ("entanglement_of_phi", include_str!("../scenarios/entanglement_of_phi.json")),
    ("coherence_to_entanglement", include_str!("../scenarios/coherence_to_entanglement.json")),
    ("free_to_resource_forbidden", include_str!("../scenarios/free_to_resource_forbidden.json")),
    ("rng_not_monotone", include_str!("../scenarios/rng_not_monotone.json")),
    ("no_fmax", include_str!("../scenarios/no_fmax.json")),
    ("bp_violation", include_str!("../scenarios/bp_violation.json")),
    ("assisted_phi", include_str!("../scenarios/assisted_phi.json")),
    ("certification_case_study", include_str!("../scenarios/certification_case_study.json")),
];

pub fn get(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
