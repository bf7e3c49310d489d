use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mra_core::catalog::best_min_distance;
use mra_core::codes::{InnerCode, SyndromeTable};
use mra_core::feedback::{binomial, rank, unrank, user_find_slot};
use mra_core::op_phase::{omt_prefix, select_identity_omt};
use mra_core::params::{omt_k1, Identity};

fn weighted(n: usize) -> impl Strategy<Value = Vec<bool>> {
    proptest::collection::vec(any::<bool>(), n..=n)
}

proptest! {
    #[test]
    fn rank_unrank_roundtrip(bits in (1usize..80).prop_flat_map(weighted)) {
        let w = bits.iter().filter(|&&b| b).count();
        let r = rank(&bits, w).unwrap();
        prop_assert!(r < binomial(bits.len(), w));
        prop_assert_eq!(unrank(bits.len(), w, &r).unwrap(), bits);
    }

    #[test]
    fn unrank_rejects_out_of_range(n in 1usize..40, w_frac in 0.0f64..1.0) {
        let w = (w_frac * n as f64) as usize;
        prop_assert!(unrank(n, w, &binomial(n, w)).is_err());
        prop_assert!(unrank(n, w, &BigUint::from(0u8)).is_ok());
    }

    #[test]
    fn slots_follow_the_order_of_occupied_positions(bits in (1usize..60).prop_flat_map(weighted), s in 0usize..60) {
        let s = s % bits.len();
        let slot = user_find_slot(&bits, s);
        if bits[s] {
            prop_assert_eq!(slot, Some(bits[..s].iter().filter(|&&b| b).count()));
        } else {
            prop_assert_eq!(slot, None);
        }
    }

    #[test]
    fn inner_encoding_is_linear(seed in any::<u64>(), m in 1usize..20, extra in 0usize..10, a in any::<u64>(), b in any::<u64>()) {
        let n = (m + extra).min(64);
        let code = InnerCode::random(m, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mask = (1u64 << m) - 1;
        let (a, b) = (a & mask, b & mask);
        prop_assert_eq!(code.encode(a ^ b).unwrap(), code.encode(a).unwrap() ^ code.encode(b).unwrap());
        prop_assert_eq!(code.encode(0).unwrap(), 0);
    }

    #[test]
    fn omt_prefix_roundtrip(v in 1usize..500, n_p in 2usize..40, prefix in any::<u64>(), seed in any::<u64>()) {
        let k1 = omt_k1(v, n_p);
        let prefix = prefix & ((1u64 << k1) - 1);
        let id = select_identity_omt(prefix, v, n_p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(id.v < v && id.u < n_p);
        prop_assert_eq!(omt_prefix(id, v, n_p), prefix);
        prop_assert_eq!(Identity::from_s(id.s(v), v), id);
    }

    #[test]
    fn bounded_distance_decoding_recovers_light_patterns(which in 0usize..2, picks in proptest::collection::vec(0usize..64, 0..4)) {
        let (n, k) = [(15, 5), (23, 12)][which];
        let aux = best_min_distance(n, k).unwrap().aux_code().unwrap();
        let table = SyndromeTable::new(&aux).unwrap();
        let mut support: Vec<usize> = picks.iter().map(|p| p % n).collect();
        support.sort_unstable();
        support.dedup();
        support.truncate(aux.t());
        let indicator = support.iter().fold(0u64, |acc, &u| acc | 1 << u);
        let syndrome = aux.syndrome_of(indicator).unwrap();
        prop_assert_eq!(table.bounded_distance_decode(syndrome).unwrap(), support);
    }
}
