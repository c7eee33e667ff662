use std::collections::BTreeMap;
use std::fs;

use pdvn_core::bundle::{load_bundle, save_bundle, Provenance, MANIFEST};
use pdvn_core::nnet::{checkpoint, Head, Mlp};
use pdvn_core::policy::TwoBranchPolicy;
use pdvn_core::values::{ValueMode, ValueNets};
use pdvn_core::world::FINGERPRINT_BITS;

fn policy() -> TwoBranchPolicy {
    let reference = Mlp::new(FINGERPRINT_BITS, 8, 12, Head::Logits, 0.1, 3).unwrap();
    let learnable = Mlp::new(FINGERPRINT_BITS, 8, 12, Head::Logits, 0.1, 4).unwrap();
    TwoBranchPolicy::with_learnable(std::sync::Arc::new(reference), learnable, 7).unwrap()
}

fn provenance() -> Provenance {
    Provenance {
        config_hash: "abc123".into(),
        seed: 42,
    }
}

#[test]
fn round_trip_preserves_every_network() {
    let dir = tempfile::tempdir().unwrap();
    let p = policy();
    for values in [
        Some(ValueNets::dual(8, 0.1, 1).unwrap()),
        Some(ValueNets::single(8, 0.1, 1).unwrap()),
        Some(ValueNets::syn_only(8, 0.1, 1).unwrap()),
        None,
    ] {
        let path = dir.path().join(format!("{:?}", values.as_ref().map(|v| v.mode())));
        let mut extra = BTreeMap::new();
        extra.insert("mode".to_string(), "pdvn".to_string());
        save_bundle(&path, &p, values.as_ref(), &provenance(), &extra).unwrap();
        let b = load_bundle(&path).unwrap();
        assert_eq!(b.provenance, provenance());
        assert_eq!(b.extra, extra);
        assert_eq!(b.policy.k(), 7);
        assert_eq!(checkpoint::encode(b.policy.reference()), checkpoint::encode(p.reference()));
        assert_eq!(checkpoint::encode(b.policy.learnable()), checkpoint::encode(p.learnable()));
        assert_eq!(b.values.as_ref().map(|v| v.mode()), values.as_ref().map(|v| v.mode()));
        if let (Some(a), Some(b)) = (values, b.values) {
            for ((na, ma), (nb, mb)) in a.nets().into_iter().zip(b.nets()) {
                assert_eq!(na, nb);
                assert_eq!(checkpoint::encode(ma), checkpoint::encode(mb));
            }
        }
    }
    assert_eq!(ValueNets::dual(8, 0.1, 1).unwrap().mode(), ValueMode::Dual);
}

#[test]
fn corrupt_or_incomplete_bundles_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(dir.path(), &policy(), None, &provenance(), &BTreeMap::new()).unwrap();
    let file = dir.path().join("learnable.ckpt");
    let mut bytes = fs::read(&file).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&file, &bytes).unwrap();
    assert!(load_bundle(dir.path()).is_err());

    let dir = tempfile::tempdir().unwrap();
    save_bundle(dir.path(), &policy(), None, &provenance(), &BTreeMap::new()).unwrap();
    let manifest = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
    fs::write(dir.path().join(MANIFEST), manifest.replace("format = 1", "format = 9")).unwrap();
    assert!(load_bundle(dir.path()).is_err());
    fs::write(dir.path().join(MANIFEST), "not a manifest").unwrap();
    assert!(load_bundle(dir.path()).is_err());
    assert!(load_bundle(&dir.path().join("missing")).is_err());
}
