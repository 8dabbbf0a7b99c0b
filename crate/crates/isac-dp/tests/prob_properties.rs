//! Randomized invariants of the probability layer.
//!
//! These are the contracts every downstream module leans on without
//! rechecking: channels contract total variation, mutual information behaves
//! like an information measure, and the expectation-gap bound really bounds.

use isac_dp::prob::{
    chain_join, entropy_bits, expectation_gap_bound, total_variation, Alphabet, ChainFactor, Dist,
    Joint, Kernel,
};
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6..1.0f64, len).prop_map(|v| {
        let sum: f64 = v.iter().sum();
        v.into_iter().map(|x| x / sum).collect()
    })
}

fn kernel_rows(n_rows: usize, n_cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(simplex(n_cols), n_rows)
}

fn push_through(p: &Dist, k: &Kernel) -> Dist {
    let mut out = vec![0.0; k.n_cols()];
    for (i, &pi) in p.probs().iter().enumerate() {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot += pi * k.prob(i, j);
        }
    }
    Dist::new(k.to_axes()[0].clone(), out).unwrap()
}

proptest! {
    /// Processing two pmfs through the same channel never increases their
    /// total-variation distance.
    #[test]
    fn tv_contracts_under_any_channel(
        p in simplex(4),
        q in simplex(4),
        rows in kernel_rows(4, 3),
    ) {
        let input = Alphabet::new(4).unwrap();
        let output = Alphabet::new(3).unwrap();
        let p = Dist::new(input.clone(), p).unwrap();
        let q = Dist::new(input.clone(), q).unwrap();
        let channel = Kernel::new(vec![input], vec![output], rows).unwrap();
        let before = total_variation(&p, &q).unwrap();
        let after = total_variation(
            &push_through(&p, &channel),
            &push_through(&q, &channel),
        )
        .unwrap();
        prop_assert!(
            after <= before + 1e-12,
            "TV grew through a channel: {before} -> {after}"
        );
    }

    /// Mutual information read off a random joint is symmetric, nonnegative,
    /// and bounded by both marginal entropies.
    #[test]
    fn mutual_information_is_an_information_measure(flat in simplex(12)) {
        let joint = Joint::from_flat(
            vec![
                ("a".into(), Alphabet::new(3).unwrap()),
                ("b".into(), Alphabet::new(4).unwrap()),
            ],
            flat,
        )
        .unwrap();
        let i_ab = joint.mutual_information(&["a"], &["b"]).unwrap();
        let i_ba = joint.mutual_information(&["b"], &["a"]).unwrap();
        prop_assert!((i_ab - i_ba).abs() <= 1e-9, "asymmetric: {i_ab} vs {i_ba}");
        prop_assert!(i_ab >= -1e-12, "negative mutual information {i_ab}");
        let h_a = entropy_bits(&joint.marginalize(&["a"]).unwrap().to_dist().unwrap());
        let h_b = entropy_bits(&joint.marginalize(&["b"]).unwrap().to_dist().unwrap());
        prop_assert!(
            i_ab <= h_a.min(h_b) + 1e-9,
            "I = {i_ab} exceeds min(H) = {}",
            h_a.min(h_b)
        );
    }
}

/// `|E_P f − E_Q f| ≤ 2·Υ·TV(P,Q)` for every `|f| ≤ Υ`, exercised with
/// random pmfs and random bounded statistics.
#[test]
fn expectation_gap_bound_dominates_real_gaps() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = rng.random_range(2..=6);
        let alphabet = Alphabet::new(n).unwrap();
        let draw = |rng: &mut ChaCha12Rng| -> Dist {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-6).collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            Dist::new(alphabet.clone(), v).unwrap()
        };
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let upsilon = rng.random::<f64>() * 3.0 + 0.1;
        let f: Vec<f64> = (0..n)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * upsilon)
            .collect();
        let gap: f64 = f
            .iter()
            .enumerate()
            .map(|(i, &fv)| fv * (p.prob(i) - q.prob(i)))
            .sum::<f64>()
            .abs();
        let bound = expectation_gap_bound(upsilon, &p, &q).unwrap();
        assert!(gap <= bound + 1e-12, "gap {gap} exceeds bound {bound}");
    }
}

/// A two-factor chain reproduces the pencil-and-paper joint, and the
/// conditional kernel read back from it is the one that was put in.
#[test]
fn chain_join_round_trips_a_source_and_a_channel() {
    let bit = Alphabet::bit();
    let source = Dist::bernoulli(0.3).unwrap();
    let channel = Kernel::new(
        vec![bit.clone()],
        vec![bit.clone()],
        vec![vec![0.9, 0.1], vec![0.2, 0.8]],
    )
    .unwrap();
    let joint = chain_join(&[
        ChainFactor::source("in", &source),
        ChainFactor::new(vec!["in"], vec!["out"], channel.clone()).unwrap(),
    ])
    .unwrap();

    let expected = [0.7 * 0.9, 0.7 * 0.1, 0.3 * 0.2, 0.3 * 0.8];
    for (i, &want) in expected.iter().enumerate() {
        let got = joint.flat_values()[i];
        assert!((got - want).abs() <= 1e-15, "cell {i}: {got} vs {want}");
    }

    let recovered = joint.conditional_kernel(&["in"], &["out"]).unwrap();
    for r in 0..2 {
        for c in 0..2 {
            assert!((recovered.prob(r, c) - channel.prob(r, c)).abs() <= 1e-12);
        }
    }
}
