use super::*;
use crate::frame::DiffRecord;

fn cfg(capacity: usize, f: usize, mode: StorageMode) -> StoreConfig {
    StoreConfig::new(capacity, f, 84, 84, mode).unwrap()
}

fn marked(value: u8, row: usize) -> Frame {
    let mut frame = Frame::zeros(84, 84).unwrap();
    frame.set(row, 0, value);
    frame
}

#[test]
fn config_validation() {
    assert!(matches!(
        StoreConfig::new(9, 4, 84, 84, StorageMode::Full),
        Err(Error::InvalidConfig(_))
    ));
    assert!(StoreConfig::new(8, 0, 84, 84, StorageMode::Full).is_err());
    assert!(StoreConfig::new(8, 4, 300, 84, StorageMode::Full).is_err());
    assert!(StoreConfig::new(0, 4, 84, 84, StorageMode::Full).is_err());
}

#[test]
fn new_full_store_shapes() {
    let store = CompressedStore::new(cfg(8, 4, StorageMode::Full)).unwrap();
    assert_eq!(store.config().blocks(), 2);
    assert_eq!(store.head(), 0);
    assert_eq!(store.valid_range(), None);
    let mem = store.memory_bytes();
    assert_eq!(mem.keyframe_bytes, 2 * 7056);
    assert_eq!(mem.sparse_overhead_bytes, 8 * 2 * 3);
    assert_eq!(mem.index_bytes, 4 * 8 * 4);
    assert_eq!(mem.total_bytes, 14288);
}

#[test]
fn half_store_memory() {
    let store = IndexedStore::new(cfg(12, 3, StorageMode::Half)).unwrap();
    assert_eq!(store.memory_bytes().total_bytes, 84816);
    assert_eq!(store.memory_bytes().sparse_payload_bytes, 0);
}

#[test]
fn keyframes_and_diffs_land_in_their_slots() {
    let mut store = CompressedStore::new(cfg(8, 4, StorageMode::Full)).unwrap();
    let frames: Vec<Frame> = (0..7).map(|i| marked(10 + i as u8, i)).collect();
    for (i, frame) in frames.iter().enumerate() {
        assert_eq!(store.append(frame, i == 0).unwrap(), i as u64);
    }
    assert_eq!(store.get(0).unwrap().frames(), vec![frames[0].clone(); 4].as_slice());
    assert_eq!(store.obs_inds(5).unwrap(), vec![2, 3, 4, 5]);
    // step 5 is diffed against keyframe 4: pixel rows 4 and 5 change
    let diff = store.diff_record(5).unwrap();
    assert_eq!(
        diff,
        &DiffRecord::Sparse {
            inds: vec![(4, 0), (5, 0)],
            vals: vec![-14, 15],
        }
    );
    assert!(store.diff_record(4).is_none());
    assert_eq!(store.get(6).unwrap().frames(), &frames[3..7]);
}

#[test]
fn episode_start_mid_block_diffs_against_previous_keyframe() {
    let mut store = CompressedStore::new(cfg(8, 4, StorageMode::Full)).unwrap();
    let mut frames: Vec<Frame> = (0..6).map(|i| marked(1, i)).collect();
    frames.push(Frame::filled(84, 84, 200).unwrap());
    for (i, frame) in frames.iter().enumerate() {
        store.append(frame, i == 0 || i == 6).unwrap();
    }
    assert_eq!(store.obs_inds(6).unwrap(), vec![6, 6, 6, 6]);
    assert!(store.diff_record(6).unwrap().is_dense());
    assert_eq!(store.get(6).unwrap().frames(), vec![frames[6].clone(); 4].as_slice());
    let stats = store.payload_stats();
    assert_eq!(stats.dense_records, 1);
    assert_eq!(stats.compressed_frames, 5);
}

#[test]
fn ring_eviction_clears_block_and_raises_watermark() {
    let mut store = CompressedStore::new(cfg(8, 4, StorageMode::Full)).unwrap();
    for i in 0..8 {
        store.append(&marked(i as u8 + 1, i), i == 0).unwrap();
    }
    assert_eq!(store.valid_range(), Some((0, 7)));
    let before = store.payload_stats();
    assert_eq!(before.compressed_frames, 6);
    store.append(&marked(99, 8), false).unwrap();
    assert_eq!(store.valid_range(), Some((7, 8)));
    assert!(matches!(store.get(3), Err(Error::Evicted(3))));
    assert!(matches!(store.get(6), Err(Error::Evicted(6))));
    assert!(matches!(store.get(9), Err(Error::NotYetWritten { .. })));
    assert_eq!(store.payload_stats().compressed_frames, 3);
    let state = store.get(8).unwrap();
    assert_eq!(state.frames()[0], marked(6, 5));
    assert_eq!(state.frames()[3], marked(99, 8));
}

#[test]
fn set_behaves_like_append() {
    let registry = StoreRegistry::builtin();
    for mode in StorageMode::ALL {
        let mut via_set = registry.create(cfg(8, 4, mode)).unwrap();
        let mut via_append = registry.create(cfg(8, 4, mode)).unwrap();
        let o = marked(7, 2);
        via_set.set(0, &State::new(vec![o.clone(); 4]).unwrap()).unwrap();
        via_append.append(&o, true).unwrap();
        assert_eq!(via_set.get(0).unwrap(), via_append.get(0).unwrap());
        assert_eq!(via_set.obs_inds(0).unwrap(), via_append.obs_inds(0).unwrap());

        for i in 1..3 {
            via_append.append(&marked(i, 1), false).unwrap();
        }
        for i in 1..3u64 {
            let mut next = via_set.get(i - 1).unwrap().frames()[1..].to_vec();
            next.push(marked(i as u8, 1));
            via_set.set(i, &State::new(next).unwrap()).unwrap();
        }
        assert_eq!(via_set.head(), 3);
        assert_eq!(via_set.get(2).unwrap(), via_append.get(2).unwrap());

        let s = via_set.get(2).unwrap();
        assert!(matches!(
            via_set.set(7, &s),
            Err(Error::OutOfOrderSet { step: 7, head: 3 })
        ));
        let mixed = State::new(vec![marked(1, 1), marked(2, 2), marked(3, 3), marked(4, 4)]).unwrap();
        assert!(matches!(via_set.set(3, &mixed), Err(Error::StateMismatch)));

        let restart = State::new(vec![marked(50, 50); 4]).unwrap();
        via_set.set(3, &restart).unwrap();
        assert_eq!(via_set.obs_inds(3).unwrap(), vec![3, 3, 3, 3]);
        assert_eq!(via_set.head(), 4);
    }
}

#[test]
fn wrong_frame_shape_rejected() {
    for mode in StorageMode::ALL {
        let mut store = open_store(cfg(8, 4, mode)).unwrap();
        let bad = Frame::zeros(84, 83).unwrap();
        assert!(matches!(
            store.append(&bad, true),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(store.head(), 0);
    }
}

#[test]
fn backends_agree_on_every_step() {
    let registry = StoreRegistry::builtin();
    let mut stores: Vec<_> = StorageMode::ALL
        .iter()
        .map(|&m| registry.create(StoreConfig::new(12, 3, 6, 5, m).unwrap()).unwrap())
        .collect();
    for i in 0..40u64 {
        let mut frame = Frame::zeros(6, 5).unwrap();
        frame.set((i % 6) as usize, (i % 5) as usize, (i * 7 % 256) as u8);
        if i % 11 == 0 {
            frame.pixels_mut().fill((i % 256) as u8);
        }
        for store in &mut stores {
            store.append(&frame, i % 9 == 0).unwrap();
        }
        let reference = stores[0].get(i).unwrap();
        for store in &stores[1..] {
            assert_eq!(store.get(i).unwrap(), reference);
            assert_eq!(store.valid_range(), stores[0].valid_range());
        }
    }
}

#[test]
fn registry_lookup() {
    let reg = StoreRegistry::builtin();
    assert_eq!(reg.names().collect::<Vec<_>>(), vec!["full", "half", "none"]);
    assert_eq!(reg.lookup("half"), Some(StorageMode::Half));
    assert_eq!(reg.lookup("zstd"), None);
    let empty = StoreRegistry::empty();
    assert!(empty.create(cfg(8, 4, StorageMode::Full)).is_err());
    assert_eq!("none".parse::<StorageMode>().unwrap(), StorageMode::None);
    assert!("bogus".parse::<StorageMode>().is_err());
}

#[test]
fn frame_stack_of_one() {
    let mut store = CompressedStore::new(cfg(3, 1, StorageMode::Full)).unwrap();
    for i in 0..5 {
        store.append(&marked(i, 0), i == 0).unwrap();
    }
    assert_eq!(store.valid_range(), Some((2, 4)));
    assert_eq!(store.get(4).unwrap().frames(), &[marked(4, 0)]);
    assert_eq!(store.memory_bytes().sparse_overhead_bytes, 0);
}
