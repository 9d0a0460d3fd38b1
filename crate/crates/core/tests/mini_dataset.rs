mod common;

use common::{mini_root, snapshot};
use pointsal::synth::write_mini_dataset;

#[test]
fn bundled_mini_dataset_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    write_mini_dataset(tmp.path()).unwrap();
    let (got, want) = (snapshot(tmp.path()), snapshot(&mini_root()));
    let names = |s: &[(String, Vec<u8>)]| s.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    assert_eq!(names(&got), names(&want));
    for ((name, a), (_, b)) in got.iter().zip(&want) {
        assert!(a == b, "{name} differs from the bundled copy");
    }
}
