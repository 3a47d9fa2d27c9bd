//! Cross-module checks against independent oracles: exhaustive enumeration,
//! closed forms, and direct numerical optimization.

use dprm_core::dprm::{
    free_energy_per_step, ground_state, internal_energy, log_partition_function, BranchEnergies,
    BranchEnergyOracle, ExplicitEnergies, TreeShape, Walk,
};
use dprm_core::model::{
    induced_energy_distribution, CodingDistribution, DistortionMatrix, EnergyDistribution,
    SourceModel,
};
use dprm_core::rd::{blahut_arimoto, distortion_rate, BA_MAX_ITER, BA_TOL};
use dprm_core::theory::{beta_c, d0_of_r, f_limit, phi};
use dprm_core::treecode::{
    encode_beam, encode_exact, pack, simulate_ensemble, source_sequence, unpack, InducedEnergies,
    SequenceMode, TreeCode,
};
use proptest::prelude::*;

fn leaves(shape: TreeShape) -> impl Iterator<Item = Walk> {
    (0..shape.walk_count()).map(move |leaf| Walk::from_leaf(leaf, shape))
}

/// `(ln Z, U, E_min, argmin leaf)` by enumerating every walk.
fn enumerate<E: BranchEnergies>(e: &E, beta: f64) -> (f64, f64, f64, u64) {
    let energies: Vec<f64> = leaves(e.shape())
        .map(|w| (1..=w.len()).map(|i| e.energy(i, w.steps()[i - 1])).sum())
        .collect();
    let m = energies.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let weights: Vec<f64> = energies.iter().map(|&x| (-beta * (x - m)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let u = energies
        .iter()
        .zip(&weights)
        .map(|(x, w)| x * w)
        .sum::<f64>()
        / z;
    let argmin = energies.iter().position(|&x| x == m).unwrap() as u64;
    (-beta * m + z.ln(), u, m, argmin)
}

fn energy_law() -> impl Strategy<Value = EnergyDistribution> {
    prop_oneof![
        (-1.0..1.0f64, 0.2..2.0f64).prop_map(|(m, s)| EnergyDistribution::gaussian(m, s).unwrap()),
        prop::collection::vec((0u8..5, 0.05..1.0f64), 1..4).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let values: Vec<f64> = atoms.iter().map(|a| a.0 as f64 * 0.5).collect();
            let probs: Vec<f64> = atoms.iter().map(|a| a.1 / total).collect();
            EnergyDistribution::discrete(&values, &probs).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tree_quantities_match_enumeration(
        d in 1u64..=3, n in 1usize..=4, seed in any::<u64>(), law in energy_law(), beta in 0.05..6.0f64
    ) {
        let shape = TreeShape::new(d, n).unwrap();
        let oracle = BranchEnergyOracle::new(seed, law, shape);
        let (ln_z, u, e_min, leaf) = enumerate(&oracle, beta);
        prop_assert!((log_partition_function(&oracle, beta).unwrap() - ln_z).abs() <= 1e-10);
        prop_assert!((internal_energy(&oracle, beta).unwrap() - u).abs() <= 1e-10);
        let gs = ground_state(&oracle);
        prop_assert!((gs.energy - e_min).abs() <= 1e-10);
        prop_assert_eq!(gs.walk.leaf(), Some(leaf));
    }

    #[test]
    fn sandwich(d in 2u64..=3, n in 1usize..=9, seed in any::<u64>(), law in energy_law(), beta in 0.1..8.0f64) {
        let shape = TreeShape::new(d, n).unwrap();
        let oracle = BranchEnergyOracle::new(seed, law, shape);
        let f = free_energy_per_step(&oracle, beta).unwrap();
        let g = -ground_state(&oracle).energy / n as f64;
        prop_assert!(g <= f + 1e-9);
        prop_assert!(f - (d as f64).ln() / beta <= g + 1e-9);
    }

    #[test]
    fn exact_encoder_is_the_induced_ground_state(
        d in 1u64..=3, n in 1usize..=5, seed in any::<u64>(), size in 2usize..=4
    ) {
        let shape = TreeShape::new(d, n).unwrap();
        let code = TreeCode::new(seed, CodingDistribution::uniform(size).unwrap(), shape);
        let x = source_sequence(&SourceModel::uniform(size).unwrap(), seed, 0, n);
        let rho = DistortionMatrix::hamming(size).unwrap();
        let enc = encode_exact(&code, &x, &rho).unwrap();
        let gs = ground_state(&InducedEnergies::new(&code, &x, &rho).unwrap());
        prop_assert_eq!(&enc.walk, &gs.walk);
        prop_assert_eq!(enc.total_distortion, gs.energy);
        let (_, _, best, leaf) = enumerate(&InducedEnergies::new(&code, &x, &rho).unwrap(), 1.0);
        prop_assert_eq!(enc.total_distortion, best);
        prop_assert_eq!(enc.walk.leaf(), Some(leaf));
    }

    #[test]
    fn beam_bounds(d in 2u64..=3, n in 1usize..=6, seed in any::<u64>(), m in 1usize..40) {
        let shape = TreeShape::new(d, n).unwrap();
        let code = TreeCode::new(seed, CodingDistribution::new(&[0.5, 0.3, 0.2]).unwrap(), shape);
        let x = source_sequence(&SourceModel::uniform(3).unwrap(), seed, 0, n);
        let rho = DistortionMatrix::hamming(3).unwrap();
        let exact = encode_exact(&code, &x, &rho).unwrap();
        let beam = encode_beam(&code, &x, &rho, m).unwrap();
        prop_assert!(beam.total_distortion >= exact.total_distortion);
        if m as u64 >= d.pow(n as u32 - 1) {
            prop_assert_eq!(beam, exact);
        }
    }

    #[test]
    fn pack_is_a_bijection(d in 2u64..=9, n in 1usize..=7, seed in any::<u64>()) {
        let shape = TreeShape::new(d, n).unwrap();
        let leaf = seed % shape.walk_count();
        let walk = Walk::from_leaf(leaf, shape);
        let stream = pack(&walk, d).unwrap();
        prop_assert_eq!(unpack(&stream).unwrap(), walk);
        // distinct walks, distinct streams
        let other = Walk::from_leaf((leaf + 1) % shape.walk_count(), shape);
        if shape.walk_count() > 1 {
            let other = pack(&other, d).unwrap();
            prop_assert_ne!(other.bytes(), stream.bytes());
        }
    }
}

#[test]
fn explicit_tree_by_hand() {
    // d = 2, n = 2: walks (0,0)=1+0.5, (0,1)=1+2, (1,2)=0+0, (1,3)=0+3
    let e = ExplicitEnergies::new(2, vec![vec![1.0, 0.0], vec![0.5, 2.0, 0.0, 3.0]]).unwrap();
    let z: f64 = [1.5f64, 3.0, 0.0, 3.0].iter().map(|x| (-x).exp()).sum();
    assert!((log_partition_function(&e, 1.0).unwrap() - z.ln()).abs() < 1e-15);
    let gs = ground_state(&e);
    assert_eq!(gs.walk.steps(), &[1, 2]);
    assert_eq!(gs.energy, 0.0);
}

#[test]
fn gaussian_closed_forms() {
    let g = EnergyDistribution::gaussian(0.0, 1.0).unwrap();
    // φ(β) = ln 2/β + β/2 below β_c, frozen at √(2 ln 2) above
    for beta in [0.2, 0.5, 1.0, 3.0, 10.0] {
        let annealed = 2f64.ln() / beta + beta / 2.0;
        assert!((phi(&g, 2, beta).unwrap() - annealed).abs() < 1e-13);
        let expected = if beta < (2.0 * 2f64.ln()).sqrt() {
            annealed
        } else {
            (2.0 * 2f64.ln()).sqrt()
        };
        assert!((f_limit(&g, 2, beta).unwrap() - expected).abs() < 1e-9);
    }
}

/// Minimum over β of φ by golden-section search, as an oracle for β_c.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[test]
fn beta_c_is_the_minimizer_of_phi() {
    let laws = [
        EnergyDistribution::discrete(&[0.0, 1.0], &[0.2, 0.8]).unwrap(),
        EnergyDistribution::discrete(&[-1.0, 0.5, 2.0], &[0.1, 0.6, 0.3]).unwrap(),
        EnergyDistribution::gaussian(1.0, 0.5).unwrap(),
    ];
    for law in laws {
        for d in [2u64, 3, 5] {
            let Some(bc) = beta_c(&law, d).unwrap().finite() else {
                continue;
            };
            let found = golden_min(|b| phi(&law, d, b).unwrap(), 1e-3, 60.0);
            assert!(
                (bc - found).abs() < 1e-5 * bc.max(1.0),
                "d={d} {bc} vs {found}"
            );
        }
    }
}

fn binary_entropy(p: f64) -> f64 {
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

#[test]
fn binary_symmetric_rate_distortion() {
    // R(D) = ln 2 − h(D) for a uniform binary source under Hamming distortion
    let p = SourceModel::uniform(2).unwrap();
    let rho = DistortionMatrix::hamming(2).unwrap();
    for target in [0.05, 0.1, 0.2, 0.3, 0.45] {
        let rate = 2f64.ln() - binary_entropy(target);
        let dr = distortion_rate(&p, &rho, rate).unwrap();
        assert!(
            (dr.distortion - target).abs() < 1e-7,
            "{target}: {}",
            dr.distortion
        );
    }
    // along the parametric curve as well
    for beta in [0.5, 1.0, 2.0, 4.0] {
        let pt = blahut_arimoto(&p, &rho, beta, BA_TOL, BA_MAX_ITER).unwrap();
        assert!((pt.rate - (2f64.ln() - binary_entropy(pt.distortion))).abs() < 1e-9);
    }
}

#[test]
fn d0_matches_its_definition_by_direct_maximization() {
    // D₀(R) = max_β −(ln E e^{−βρ} + R)/β, maximized numerically
    let q = CodingDistribution::uniform(3).unwrap();
    let rho = DistortionMatrix::new(vec![
        vec![0.0, 1.0, 2.0],
        vec![2.0, 0.0, 1.0],
        vec![1.0, 2.0, 0.0],
    ])
    .unwrap();
    let law = induced_energy_distribution(&q, &rho, 0).unwrap();
    for d in [2u64, 3] {
        let rate = (d as f64).ln();
        let objective = |b: f64| -(dprm_core::theory::log_mgf(&law, b) + rate) / b;
        let b_star = golden_min(|b| -objective(b), 1e-3, 80.0);
        let bound = d0_of_r(&q, &rho, rate).unwrap();
        assert!((bound.value - objective(b_star)).abs() < 1e-10);
    }
}

#[test]
fn ensemble_mean_sits_above_d_of_r() {
    let p = SourceModel::uniform(4).unwrap();
    let rho = DistortionMatrix::hamming(4).unwrap();
    let q = CodingDistribution::uniform(4).unwrap();
    let r = simulate_ensemble(&p, &q, &rho, 2, 16, 30, 99, SequenceMode::Redraw).unwrap();
    assert!((r.d_of_r.distortion - 0.189_289_624_915_231_76).abs() < 1e-7);
    // ground states of branching walks sit (3/2β_c)·ln n/n above the limit
    let bc = r.d0.beta_c.finite().unwrap();
    let offset = 1.5 / bc * (16f64).ln() / 16.0;
    assert!(r.gap_to_d_of_r > 0.0);
    assert!(
        (r.gap_to_d_of_r - offset).abs() <= 0.05,
        "gap {} offset {offset}",
        r.gap_to_d_of_r
    );
}
