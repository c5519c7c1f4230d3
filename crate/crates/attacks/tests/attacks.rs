use mems_attacks::ksum::setup;
use mems_attacks::{
    ksum_attempt_vs_mems, ksum_forge, rogue_key_attack, wagner_solve, KSumConfig, KSumInstance,
    Relation, WagnerConfig,
};
use mems_core::group::{Group, ToyGroup};
use mems_core::mems::KeyPair;
use mems_core::oracles::Params;
use mems_ptp::{Coordinator, PtpConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const B: u32 = 16;
const BPL: u32 = 5; // 16 / (1 + log2 4)
const LIST: usize = 32;

fn random_instance(rng: &mut ChaCha20Rng) -> KSumInstance<()> {
    let lists = (0..4)
        .map(|_| (0..LIST).map(|_| rng.gen_range(0..1u64 << B)).collect())
        .collect();
    KSumInstance::<()>::from_values(B, lists).unwrap()
}

/// Nested-loop search for a tuple of the shape the uncapped four-list tree
/// accepts: both pairs cancel on the low bits, the total on all bits.
fn brute_force_tree_shape(inst: &KSumInstance<()>) -> Option<[usize; 4]> {
    let v = |j: usize, i: usize| inst.entry(j, i).value as i64;
    let low = 1i64 << BPL;
    for a in 0..LIST {
        for b in 0..LIST {
            if (v(0, a) + v(1, b)).rem_euclid(low) != 0 {
                continue;
            }
            for c in 0..LIST {
                for d in 0..LIST {
                    if (v(2, c) - v(3, d)).rem_euclid(low) == 0
                        && inst.satisfies(Relation::Modular, &[a, b, c, d])
                    {
                        return Some([a, b, c, d]);
                    }
                }
            }
        }
    }
    None
}

fn brute_force_any(inst: &KSumInstance<()>) -> bool {
    (0..LIST.pow(4)).any(|n| {
        let ix = [
            n % LIST,
            n / LIST % LIST,
            n / LIST.pow(2) % LIST,
            n / LIST.pow(3),
        ];
        inst.satisfies(Relation::Modular, &ix)
    })
}

#[test]
fn wagner_agrees_with_brute_force_on_50_instances() {
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let (mut with, mut without) = (0, 0);
    for _ in 0..50 {
        let inst = random_instance(&mut rng);
        let solver = wagner_solve(&inst, WagnerConfig::default());
        let oracle = brute_force_tree_shape(&inst);
        assert_eq!(solver.is_some(), oracle.is_some());
        if let Some(ix) = solver {
            assert!(inst.satisfies(Relation::Modular, &ix));
            // anything the solver finds is a genuine k-sum solution
            assert!(brute_force_any(&inst));
            with += 1;
        } else {
            without += 1;
        }
    }
    // the sweep must exercise both outcomes
    assert!(with > 0 && without > 0, "with={with} without={without}");
}

#[test]
fn ksum_forgery_seed_sweep() {
    let mut successes = 0;
    for seed in 0..4 {
        let mut rng = ChaCha20Rng::seed_from_u64(1000 + seed);
        let (params, oracle, adv) = setup(ToyGroup::standard(), 16, &mut rng).unwrap();
        let report = ksum_forge(&params, &oracle, &adv, KSumConfig::default(), &mut rng).unwrap();
        if report.succeeded() {
            let f = report.forgery.unwrap();
            assert!(!oracle.signed_messages().contains(&f.message));
            successes += 1;
        }
    }
    assert!(successes >= 3, "{successes}/4");
}

#[test]
fn attack_blocked_against_coordinator() {
    let params = Params::new(ToyGroup::standard());
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let coordinator = Coordinator::new(params.clone(), PtpConfig::default());
    let h = KeyPair::generate(&params, &mut rng);
    let a = KeyPair::generate(&params, &mut rng);
    for _ in 0..10 {
        let r = ksum_attempt_vs_mems(&coordinator, &[h], &a, 8, 20, &mut rng).unwrap();
        assert_eq!(r.blocked_step, Some(2));
        assert_eq!(r.early_observations, 0);
        assert_eq!(r.replacement_rejections, 7);
        assert!(!r.naive_forgery_verifies);
    }
}

#[test]
fn rogue_key_toy_trials() {
    let params = Params::new(ToyGroup::standard());
    let g = &params.group;
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    for trial in 0..100 {
        let honest: Vec<_> = (0..1 + trial % 4)
            .map(|_| *KeyPair::generate(&params, &mut rng).public())
            .collect();
        let d = rogue_key_attack(&params, &honest, b"transfer", &mut rng).unwrap();
        assert!(d.plain_forgery_verifies);
        assert_ne!(d.mems_key, g.exp_g(&d.rogue_secret));
    }
}
