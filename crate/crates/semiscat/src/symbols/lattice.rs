//! The exponent lattice of the scattering expansion.
//!
//! Every exponent has the form nu = sum_j m_j gamma_j + p (1 + delta)
//! with gamma_j = delta (rho_j - 1) - 1, at least one potential factor
//! (sum m_j >= 1), and p >= 0 counting derivative shifts. The scale
//! parameter must satisfy delta > 1/(rho_1 - 1) so that gamma_1 > 0
//! and the lattice is positive with a strictly increasing enumeration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exponents closer than this are the same lattice entry.
pub const NU_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("delta = {delta} must exceed 1/(rho_1 - 1) = {required}")]
    DeltaTooSmall { delta: f64, required: f64 },
    #[error("nu_max = {nu_max} must reach the leading exponent {leading}")]
    NuMaxBelowLeading { nu_max: f64, leading: f64 },
    #[error("at least one homogeneity order is required")]
    NoOrders,
}

/// One way of reaching an exponent: how many factors of each
/// potential term and how many derivative shifts of (1 + delta).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub multiplicities: Vec<usize>,
    pub shifts: usize,
}

impl Provenance {
    pub fn value(&self, gammas: &[f64], delta: f64) -> f64 {
        let base: f64 = self
            .multiplicities
            .iter()
            .zip(gammas)
            .map(|(&m, &g)| m as f64 * g)
            .sum();
        base + self.shifts as f64 * (1.0 + delta)
    }

    /// True when this is the bare single factor of term `j` with no
    /// shifts: the provenance whose source is the potential term
    /// itself.
    pub fn is_bare(&self, j: usize) -> bool {
        self.shifts == 0
            && self
                .multiplicities
                .iter()
                .enumerate()
                .all(|(i, &m)| if i == j { m == 1 } else { m == 0 })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeEntry {
    pub nu: f64,
    /// All distinct provenances that land on this exponent.
    pub provenances: Vec<Provenance>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentLattice {
    pub delta: f64,
    pub nu_max: f64,
    /// gamma_j per potential term.
    pub gammas: Vec<f64>,
    /// Strictly increasing, all positive.
    pub entries: Vec<LatticeEntry>,
}

/// Enumerates, merges, and sorts all exponents up to `nu_max`.
pub fn generate_lattice(
    rhos: &[f64],
    delta: f64,
    nu_max: f64,
) -> Result<ExponentLattice, LatticeError> {
    if rhos.is_empty() {
        return Err(LatticeError::NoOrders);
    }
    let required = 1.0 / (rhos[0] - 1.0);
    if delta <= required {
        return Err(LatticeError::DeltaTooSmall { delta, required });
    }
    let gammas: Vec<f64> = rhos.iter().map(|&r| delta * (r - 1.0) - 1.0).collect();
    let leading = gammas[0];
    if nu_max < leading {
        return Err(LatticeError::NuMaxBelowLeading { nu_max, leading });
    }

    let mut raw: Vec<(f64, Provenance)> = Vec::new();
    let mut m = vec![0usize; gammas.len()];
    enumerate(&gammas, delta, nu_max, 0, 0.0, &mut m, &mut raw);

    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut entries: Vec<LatticeEntry> = Vec::new();
    for (nu, prov) in raw {
        match entries.last_mut() {
            Some(last) if (nu - last.nu).abs() <= NU_MERGE_TOL => {
                last.provenances.push(prov);
            }
            _ => entries.push(LatticeEntry { nu, provenances: vec![prov] }),
        }
    }

    Ok(ExponentLattice { delta, nu_max, gammas, entries })
}

fn enumerate(
    gammas: &[f64],
    delta: f64,
    nu_max: f64,
    j: usize,
    partial: f64,
    m: &mut Vec<usize>,
    out: &mut Vec<(f64, Provenance)>,
) {
    if j == gammas.len() {
        if m.iter().sum::<usize>() == 0 {
            return;
        }
        let mut p = 0usize;
        loop {
            let nu = partial + p as f64 * (1.0 + delta);
            if nu > nu_max + NU_MERGE_TOL {
                break;
            }
            out.push((nu, Provenance { multiplicities: m.clone(), shifts: p }));
            p += 1;
        }
        return;
    }
    let mut count = 0usize;
    loop {
        let sum = partial + count as f64 * gammas[j];
        if sum > nu_max + NU_MERGE_TOL {
            break;
        }
        m[j] = count;
        enumerate(gammas, delta, nu_max, j + 1, sum, m, out);
        count += 1;
    }
    m[j] = 0;
}

impl ExponentLattice {
    pub fn leading(&self) -> &LatticeEntry {
        &self.entries[0]
    }

    /// Index of the entry carrying the bare provenance of potential
    /// term `j` (exponent gamma_j), if it lies below the cutoff. This
    /// is the entry whose coefficient operator contains the X-ray of
    /// V_j as its leading part.
    pub fn bare_entry_index(&self, j: usize) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.provenances.iter().any(|p| p.is_bare(j)))
    }

    pub fn exponents(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.nu).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn leading_exponent_matches_the_formula() {
        let lat = generate_lattice(&[2.0], 2.0, 4.0).unwrap();
        assert_relative_eq!(lat.entries[0].nu, 1.0);
        assert_relative_eq!(lat.gammas[0], 1.0);

        let lat = generate_lattice(&[2.0], 1.5, 2.0).unwrap();
        assert_relative_eq!(lat.entries[0].nu, 0.5);
        let nus = lat.exponents();
        // gamma_1 = 0.5: multiples 0.5, 1.0, 1.5, 2.0 (shift 1+delta =
        // 2.5 exceeds nu_max).
        assert_eq!(nus.len(), 4);
        for (i, nu) in nus.iter().enumerate() {
            assert_relative_eq!(*nu, 0.5 * (i + 1) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_term_lattice_has_expected_entries_and_provenances() {
        let lat = generate_lattice(&[2.0, 3.0], 2.0, 5.0).unwrap();
        // gamma = (1, 3), shift = 3.
        let nus = lat.exponents();
        assert_eq!(nus, vec![1.0, 2.0, 3.0, 4.0, 5.0]);

        // nu = 2 is two factors of the first term.
        let e2 = &lat.entries[1];
        assert_eq!(e2.provenances.len(), 1);
        assert_eq!(e2.provenances[0].multiplicities, vec![2, 0]);
        assert_eq!(e2.provenances[0].shifts, 0);

        // nu = 3 is reached both by the second term alone and by three
        // factors of the first.
        let e3 = &lat.entries[2];
        assert_eq!(e3.provenances.len(), 2);
        assert!(e3.provenances.iter().any(|p| p.is_bare(1)));
        assert!(e3
            .provenances
            .iter()
            .any(|p| p.multiplicities == vec![3, 0] && p.shifts == 0));

        // nu = 4 includes the first derivative shift of the leading
        // symbol.
        let e4 = &lat.entries[3];
        assert!(e4
            .provenances
            .iter()
            .any(|p| p.multiplicities == vec![1, 0] && p.shifts == 1));

        assert_eq!(lat.bare_entry_index(0), Some(0));
        assert_eq!(lat.bare_entry_index(1), Some(2));
    }

    #[test]
    fn provenances_reproduce_their_exponent() {
        let lat = generate_lattice(&[2.0, 2.5, 3.0], 2.2, 8.0).unwrap();
        for entry in &lat.entries {
            for prov in &entry.provenances {
                let v = prov.value(&lat.gammas, lat.delta);
                assert!((v - entry.nu).abs() <= 1e-12, "nu = {}, prov = {}", entry.nu, v);
            }
        }
    }

    #[test]
    fn brute_force_enumeration_oracle() {
        // Independent oracle: triple loop over m1 <= 5, m2 <= 5,
        // p <= 2, collecting exponents <= nu_max.
        let (rhos, delta, nu_max) = ([2.0f64, 3.0], 2.0f64, 6.0f64);
        let g = [delta * (rhos[0] - 1.0) - 1.0, delta * (rhos[1] - 1.0) - 1.0];
        let mut expected: Vec<f64> = Vec::new();
        for m1 in 0..=5usize {
            for m2 in 0..=5usize {
                for p in 0..=2usize {
                    if m1 + m2 == 0 {
                        continue;
                    }
                    let nu =
                        m1 as f64 * g[0] + m2 as f64 * g[1] + p as f64 * (1.0 + delta);
                    if nu <= nu_max + 1e-12 {
                        expected.push(nu);
                    }
                }
            }
        }
        expected.sort_by(|a, b| a.total_cmp(b));
        expected.dedup_by(|a, b| (*a - *b).abs() <= NU_MERGE_TOL);

        let lat = generate_lattice(&rhos, delta, nu_max).unwrap();
        let got = lat.exponents();
        assert_eq!(got.len(), expected.len());
        for (a, b) in got.iter().zip(&expected) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn delta_precondition_is_enforced() {
        let err = generate_lattice(&[2.0], 1.0, 4.0);
        assert!(matches!(err, Err(LatticeError::DeltaTooSmall { .. })));
        let err = generate_lattice(&[1.5], 2.0, 4.0);
        assert!(matches!(err, Err(LatticeError::DeltaTooSmall { .. })));
        let err = generate_lattice(&[2.0], 2.0, 0.5);
        assert!(matches!(err, Err(LatticeError::NuMaxBelowLeading { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn lattice_is_positive_and_strictly_increasing(
            rho1 in 1.6..2.6f64,
            gap in 0.1..1.5f64,
            extra in 0.2..1.2f64,
            cap in 2.0..9.0f64,
        ) {
            let delta = 1.0 / (rho1 - 1.0) + extra;
            let rhos = [rho1, rho1 + gap];
            let lat = generate_lattice(&rhos, delta, cap).unwrap();
            prop_assert!(!lat.entries.is_empty());
            prop_assert!((lat.entries[0].nu - (delta * (rho1 - 1.0) - 1.0)).abs() <= 1e-12);
            for pair in lat.entries.windows(2) {
                prop_assert!(pair[1].nu > pair[0].nu + NU_MERGE_TOL / 2.0);
            }
            for e in &lat.entries {
                prop_assert!(e.nu > 0.0);
                prop_assert!(e.nu <= cap + NU_MERGE_TOL);
            }
        }
    }
}
