use proptest::prelude::*;

use stakecosi_core::cosi::{fault_bound, min_participants};
use stakecosi_core::election::{build_memory_map, leader_schedule, signing_group, CommonSeed, Prng};
use stakecosi_core::ledger::{apply_content, Chain, Stakeholder, StakeholderList, Transaction, TxKind};
use stakecosi_core::testkit::Keyring;
use stakecosi_core::{Bitmask, Hash32};

fn list(stakes: &[u64]) -> (Keyring, StakeholderList) {
    let ring = Keyring::numbered("prop", stakes.len());
    let entries = ring
        .pubs()
        .into_iter()
        .zip(stakes)
        .map(|(pubkey, &stake)| Stakeholder { pubkey, stake })
        .collect();
    (ring, StakeholderList { entries })
}

fn mask_of(len: usize, bits: u64) -> Bitmask {
    let mut m = Bitmask::new(len);
    for i in 0..len {
        m.set(i, bits >> i & 1 == 1);
    }
    m
}

proptest! {
    #[test]
    fn range_draws_stay_in_bounds(seed in any::<u64>(), range in 1u64..=u64::MAX) {
        let mut p = Prng::new(seed);
        for _ in 0..8 {
            let v = p.next_in_range(range);
            prop_assert!((1..=range).contains(&v));
        }
    }

    #[test]
    fn memory_map_gives_each_holder_its_stake(stakes in prop::collection::vec(1u64..40, 1..8), cs in any::<[u8; 32]>()) {
        let (ring, list) = list(&stakes);
        let cs = CommonSeed(Hash32(cs));
        let map = build_memory_map(&list, &cs).unwrap();
        prop_assert_eq!(map.len() as u64, stakes.iter().sum::<u64>());
        for (pk, &s) in ring.pubs().iter().zip(&stakes) {
            prop_assert_eq!(map.count(pk) as u64, s);
        }
        prop_assert_eq!(&map, &build_memory_map(&list, &cs).unwrap());
    }

    #[test]
    fn schedule_draws_only_staked_holders(stakes in prop::collection::vec(0u64..20, 1..6), cs in any::<[u8; 32]>(), horizon in 1usize..40) {
        prop_assume!(stakes.iter().sum::<u64>() > 0);
        let (ring, list) = list(&stakes);
        let cs = CommonSeed(Hash32(cs));
        let map = build_memory_map(&list, &cs).unwrap();
        let sched = leader_schedule(&map, &cs, horizon);
        prop_assert_eq!(sched.len(), horizon);
        for leader in &sched.leaders {
            let i = ring.pubs().iter().position(|p| p == leader).unwrap();
            prop_assert!(stakes[i] > 0);
        }
        prop_assert_eq!(sched, leader_schedule(&map, &cs, horizon));
    }

    #[test]
    fn signing_group_is_the_top_stakes(stakes in prop::collection::vec(1u64..10, 1..12), m in 1usize..12) {
        let (_, list) = list(&stakes);
        let group = signing_group(&list, m);
        prop_assert_eq!(group.len(), m.min(stakes.len()));
        let stake_of = |pk: &stakecosi_core::PublicKey| list.entries.iter().find(|e| e.pubkey == *pk).unwrap().stake;
        let chosen: Vec<u64> = group.iter().map(stake_of).collect();
        prop_assert!(chosen.windows(2).all(|w| w[0] >= w[1]));
        let left_out = list.entries.iter().filter(|e| !group.contains(&e.pubkey)).map(|e| e.stake).max();
        if let (Some(out), Some(&last)) = (left_out, chosen.last()) {
            prop_assert!(out <= last);
        }
    }

    #[test]
    fn any_two_quorums_share_f_plus_one(m in 1usize..=64, a in any::<u64>(), b in any::<u64>()) {
        let min = min_participants(m);
        prop_assert!(2 * min > m + fault_bound(m));
        let (x, y) = (mask_of(m, a), mask_of(m, b));
        if x.count() >= min && y.count() >= min {
            prop_assert!(x.intersection(&y).count() > fault_bound(m));
        }
    }

    #[test]
    fn mask_bytes_round_trip(len in 1usize..=64, bits in any::<u64>()) {
        let m = mask_of(len, bits);
        let back = Bitmask::from_bytes(len, m.as_bytes()).unwrap();
        prop_assert_eq!(back.count(), m.count());
        prop_assert_eq!(back, m);
    }

    /// Valid transfers and stakes preserve supply; anything rejected leaves
    /// the table unchanged.
    #[test]
    fn transactions_conserve_supply(ops in prop::collection::vec((0usize..3, 0usize..3, 0u64..80, 0u64..5, any::<bool>(), any::<bool>()), 1..12)) {
        let ring = Keyring::numbered("cons", 3);
        let chain = Chain::new(ring.genesis(&[(50, 10), (30, 5), (20, 1)], 3, 100)).unwrap();
        let supply = chain.state().total_supply();
        let mut state = chain.state().clone();
        for (from, to, amount, fee, stake, stale) in ops {
            let key = ring.key(from);
            let nonce = state.next_nonce(key.public()) - u64::from(stale && state.next_nonce(key.public()) > 0);
            let kind = if stake { TxKind::Stake } else { TxKind::Normal };
            let tx = Transaction::signed(kind, key, ring.pubs()[to], amount, fee, nonce);
            match apply_content(&state, ring.pubs()[(from + 1) % 3], &[tx]) {
                Ok(next) => {
                    prop_assert_eq!(next.total_supply(), supply);
                    state = next;
                }
                Err(_) => prop_assert_eq!(state.total_supply(), supply),
            }
        }
    }
}
