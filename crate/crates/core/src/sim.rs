//! Born-rule probabilities and seeded synthetic data.
//!
//! Sampling uses ChaCha20 seeded through `seed_from_u64`; process datasets
//! draw input `l` from stream `l` of the same seed. Multinomial counts come
//! from sequential binomial conditioning.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::linalg::trace_prod;
use crate::pom::Pom;
use crate::process::channel::{choi_apply, ChoiOperator};
use crate::state::DensityMatrix;

const NORM_TOL: f64 = 1e-9;

/// Detected counts per outcome. For imperfect POMs the copies that were
/// never detected are kept apart in `n_undetected`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountsRecord {
    pub counts: Vec<u64>,
    pub n_undetected: Option<u64>,
    pub seed: Option<u64>,
}

impl CountsRecord {
    pub fn new(counts: Vec<u64>) -> Self {
        CountsRecord { counts, n_undetected: None, seed: None }
    }

    /// `Σ n_j`, the number of detected copies.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Detected plus undetected copies, when the latter are known.
    pub fn emitted(&self) -> u64 {
        self.total() + self.n_undetected.unwrap_or(0)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// `p_j = Re tr{ρ Π_j}`, with round-off negatives clamped to zero.
pub fn born_probabilities(rho: &DensityMatrix, pom: &Pom) -> Result<Vec<f64>> {
    if rho.dim() != pom.dim() {
        return Err(Error::Dimension("state and POM dimensions differ"));
    }
    Ok(pom.outcomes().iter().map(|o| trace_prod(rho.matrix(), o).re.max(0.0)).collect())
}

/// Multinomial draw; any probability mass missing from `probs` goes to an
/// extra no-detection bucket, returned second.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Result<(Vec<u64>, u64)> {
    let total: f64 = probs.iter().sum();
    if total > 1.0 + NORM_TOL {
        return Err(Error::InvalidData("probabilities sum above one"));
    }
    let perfect = total >= 1.0 - NORM_TOL;
    let mut remaining = n;
    let mut mass = if perfect { total } else { 1.0 };
    let mut counts = Vec::with_capacity(probs.len());
    for (j, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            counts.push(0);
            continue;
        }
        if perfect && j + 1 == probs.len() {
            counts.push(remaining);
            remaining = 0;
            continue;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(remaining, q).map_err(|_| Error::InvalidData("bad binomial parameter"))?.sample(rng);
        counts.push(k);
        remaining -= k;
        mass -= p;
    }
    Ok((counts, remaining))
}

/// Draws `n_total` copies of `rho` measured with `pom`.
pub fn sample_counts(rho: &DensityMatrix, pom: &Pom, n_total: u64, seed: u64) -> Result<CountsRecord> {
    let probs = born_probabilities(rho, pom)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (counts, undetected) = multinomial(&mut rng, n_total, &probs)?;
    Ok(CountsRecord { counts, n_undetected: if pom.is_perfect() { None } else { Some(undetected) }, seed: Some(seed) })
}

/// Data of a process-tomography experiment: `N` copies of each input
/// state, outputs measured with one POM.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessDataset {
    inputs: Vec<DensityMatrix>,
    pom: Pom,
    counts: Vec<Vec<u64>>,
    copies_per_input: u64,
    n_undetected: Option<Vec<u64>>,
}

impl ProcessDataset {
    pub fn new(inputs: Vec<DensityMatrix>, pom: Pom, counts: Vec<Vec<u64>>, copies_per_input: u64) -> Result<Self> {
        let first = inputs.first().ok_or(Error::InvalidData("no input states"))?;
        if inputs.iter().any(|r| r.dim() != first.dim()) {
            return Err(Error::Dimension("input states differ in dimension"));
        }
        if counts.len() != inputs.len() || counts.iter().any(|row| row.len() != pom.len()) {
            return Err(Error::Dimension("counts must be L rows of M outcomes"));
        }
        let perfect = pom.is_perfect();
        for row in &counts {
            let s: u64 = row.iter().sum();
            if (perfect && s != copies_per_input) || s > copies_per_input {
                return Err(Error::InvalidData("row count total inconsistent with copies per input"));
            }
        }
        if counts.iter().flatten().all(|&c| c == 0) {
            return Err(Error::InvalidData("dataset has no counts"));
        }
        Ok(ProcessDataset { inputs, pom, counts, copies_per_input, n_undetected: None })
    }

    pub fn inputs(&self) -> &[DensityMatrix] {
        &self.inputs
    }

    pub fn pom(&self) -> &Pom {
        &self.pom
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn copies_per_input(&self) -> u64 {
        self.copies_per_input
    }

    pub fn n_undetected(&self) -> Option<&[u64]> {
        self.n_undetected.as_deref()
    }

    pub fn dim_in(&self) -> usize {
        self.inputs[0].dim()
    }

    pub fn dim_out(&self) -> usize {
        self.pom.dim()
    }

    /// Restriction to the first `l` inputs.
    pub fn prefix(&self, l: usize) -> Result<Self> {
        if l == 0 || l > self.inputs.len() {
            return Err(Error::InvalidArgument("prefix length out of range"));
        }
        ProcessDataset::new(
            self.inputs[..l].to_vec(),
            self.pom.clone(),
            self.counts[..l].to_vec(),
            self.copies_per_input,
        )
    }
}

/// `p_lm = (1/L) tr{E (ρ_lᵀ ⊗ Π_m)}`.
pub fn process_probabilities(e: &ChoiOperator, inputs: &[DensityMatrix], pom: &Pom) -> Result<Vec<Vec<f64>>> {
    if pom.dim() != e.dim_out() {
        return Err(Error::Dimension("POM dimension differs from D_o"));
    }
    let l = inputs.len() as f64;
    inputs
        .iter()
        .map(|rho| {
            let out = choi_apply(e, rho)?;
            Ok(born_probabilities(&out, pom)?.into_iter().map(|p| p / l).collect())
        })
        .collect()
}

/// `n_per_input` copies of each input through `e`, measured with `pom`.
pub fn simulate_process_dataset(
    e: &ChoiOperator,
    inputs: &[DensityMatrix],
    pom: &Pom,
    n_per_input: u64,
    seed: u64,
) -> Result<ProcessDataset> {
    let probs = process_probabilities(e, inputs, pom)?;
    let l = inputs.len() as f64;
    let mut counts = Vec::with_capacity(inputs.len());
    let mut undetected = Vec::with_capacity(inputs.len());
    for (i, row) in probs.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let scaled: Vec<f64> = row.iter().map(|p| p * l).collect();
        let (c, u) = multinomial(&mut rng, n_per_input, &scaled)?;
        counts.push(c);
        undetected.push(u);
    }
    let perfect = pom.is_perfect();
    Ok(ProcessDataset {
        inputs: inputs.to_vec(),
        pom: pom.clone(),
        counts,
        copies_per_input: n_per_input,
        n_undetected: if perfect { None } else { Some(undetected) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_z, Matrix};
    use crate::pom::{make_six, make_trine, make_von_neumann};
    use crate::process::channel::{identity_channel, kraus_to_choi, pauli_channel_kraus, KrausSet};
    use crate::random::{random_density_matrix, random_unitary};
    use crate::state::{bloch_to_rho, BlochVector};
    use proptest::prelude::*;

    fn up() -> DensityMatrix {
        DensityMatrix::new((&Matrix::identity(2) + &pauli_z()).scale(0.5)).unwrap()
    }

    fn zpom() -> Pom {
        make_von_neumann(&Matrix::identity(2)).unwrap()
    }

    #[test]
    fn born_examples() {
        let p = born_probabilities(&DensityMatrix::maximally_mixed(2), &make_trine()).unwrap();
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(born_probabilities(&up(), &zpom()).unwrap(), alloc::vec![1.0, 0.0]);
        let rho = bloch_to_rho(BlochVector::new(0.5641, 0.0, 0.8257)).unwrap();
        let p = born_probabilities(&rho, &make_trine()).unwrap();
        // p1 = (1+s_z)/3, p2,3 = (1 − s_z/2 ± (√3/2)s_x)/3
        let h = libm::sqrt(3.0) / 2.0;
        let oracle =
            [(1.0 + 0.8257) / 3.0, (1.0 - 0.8257 / 2.0 + h * 0.5641) / 3.0, (1.0 - 0.8257 / 2.0 - h * 0.5641) / 3.0];
        for ((a, b), c) in p.iter().zip(oracle).zip([0.6086, 0.3586, 0.0329]) {
            assert!((a - b).abs() < 1e-14);
            assert!((a - c).abs() < 1e-3);
        }
        assert!(born_probabilities(&DensityMatrix::maximally_mixed(3), &make_trine()).is_err());
    }

    #[test]
    fn sampling_examples() {
        let c = sample_counts(&up(), &zpom(), 0, 1).unwrap();
        assert_eq!(c.counts, alloc::vec![0, 0]);
        let c = sample_counts(&up(), &zpom(), 100, 1).unwrap();
        assert_eq!(c.counts, alloc::vec![100, 0]);
        let n = 300_000u64;
        let c = sample_counts(&DensityMatrix::maximally_mixed(2), &make_trine(), n, 7).unwrap();
        let sigma = libm::sqrt((1.0 / 3.0) * (2.0 / 3.0) / n as f64);
        for nu in c.frequencies() {
            assert!((nu - 1.0 / 3.0).abs() < 5.0 * sigma);
        }
        assert_eq!(c.total(), n);
        assert_eq!(c, sample_counts(&DensityMatrix::maximally_mixed(2), &make_trine(), n, 7).unwrap());
    }

    #[test]
    fn imperfect_sampling_tracks_undetected() {
        let pom = make_six().scaled(0.4).unwrap();
        let c = sample_counts(&DensityMatrix::maximally_mixed(2), &pom, 10_000, 3).unwrap();
        let u = c.n_undetected.unwrap();
        assert_eq!(c.emitted(), 10_000);
        let sd = libm::sqrt(10_000.0 * 0.4 * 0.6);
        assert!((u as f64 - 6000.0).abs() < 5.0 * sd);
    }

    #[test]
    fn unnormalized_probabilities_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(multinomial(&mut rng, 10, &[0.7, 0.4]).is_err());
    }

    #[test]
    fn process_probability_examples() {
        let p = process_probabilities(&identity_channel(2), &[up()], &zpom()).unwrap();
        assert_eq!(p[0], alloc::vec![1.0, 0.0]);
        let dep = kraus_to_choi(&pauli_channel_kraus([0.25, 0.25, 0.25]).unwrap());
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let rho = DensityMatrix::new(random_density_matrix(&mut rng, 2, 2)).unwrap();
        let p = process_probabilities(&dep, &[rho], &make_trine()).unwrap();
        assert!(p[0].iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let p = process_probabilities(&dep, &[up()], &zpom()).unwrap();
        assert!(p[0].iter().all(|x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn process_simulation_examples() {
        let inputs = [up(), DensityMatrix::maximally_mixed(2)];
        let d = simulate_process_dataset(&identity_channel(2), &inputs, &zpom(), 0, 1).unwrap();
        assert!(d.counts().iter().flatten().all(|&c| c == 0));
        let d = simulate_process_dataset(&identity_channel(2), &inputs, &zpom(), 500, 1).unwrap();
        assert_eq!(d.counts()[0], alloc::vec![500, 0]);
        assert_eq!(d, simulate_process_dataset(&identity_channel(2), &inputs, &zpom(), 500, 1).unwrap());
        assert_ne!(
            d.counts()[1],
            simulate_process_dataset(&identity_channel(2), &inputs, &zpom(), 500, 2).unwrap().counts()[1]
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn born_is_affine(seed in any::<u64>(), a in 0.0f64..1.0) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let pom = make_von_neumann(&random_unitary(&mut rng, 3)).unwrap();
            let r1 = DensityMatrix::new(random_density_matrix(&mut rng, 3, 3)).unwrap();
            let r2 = DensityMatrix::new(random_density_matrix(&mut rng, 3, 2)).unwrap();
            let mix = DensityMatrix::new(&r1.matrix().scale(a) + &r2.matrix().scale(1.0 - a)).unwrap();
            let (p1, p2, pm) = (born_probabilities(&r1, &pom).unwrap(), born_probabilities(&r2, &pom).unwrap(), born_probabilities(&mix, &pom).unwrap());
            for j in 0..3 {
                prop_assert!((pm[j] - (a * p1[j] + (1.0 - a) * p2[j])).abs() <= 1e-12);
            }
        }

        #[test]
        fn uniform_efficiency_scales_probabilities(seed in any::<u64>(), eta in 0.05f64..1.0) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let rho = DensityMatrix::new(random_density_matrix(&mut rng, 2, 2)).unwrap();
            let six = make_six();
            let p = born_probabilities(&rho, &six).unwrap();
            let q = born_probabilities(&rho, &six.scaled(eta).unwrap()).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((b - eta * a).abs() <= 1e-15);
            }
        }

        #[test]
        fn unitary_process_probabilities(seed in any::<u64>(), l in 1usize..4) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let u = random_unitary(&mut rng, 3);
            let e = kraus_to_choi(&KrausSet::new(alloc::vec![u.clone()]).unwrap());
            let pom = make_von_neumann(&random_unitary(&mut rng, 3)).unwrap();
            let inputs: Vec<DensityMatrix> = (0..l).map(|_| DensityMatrix::new(random_density_matrix(&mut rng, 3, 2)).unwrap()).collect();
            let p = process_probabilities(&e, &inputs, &pom).unwrap();
            for (row, rho) in p.iter().zip(&inputs) {
                let out = DensityMatrix::new((&(&u * rho.matrix()) * &u.adjoint()).hermitize()).unwrap();
                let q = born_probabilities(&out, &pom).unwrap();
                for (a, b) in row.iter().zip(&q) {
                    prop_assert!((a - b / l as f64).abs() <= 1e-12);
                }
                prop_assert!((row.iter().sum::<f64>() - 1.0 / l as f64).abs() <= 1e-10);
            }
        }
    }
}
