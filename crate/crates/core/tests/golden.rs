//! Byte-level regression of the dataset generator. Set `DMCE_BLESS=1` to rewrite.

use std::path::PathBuf;

use dmce::channels::{encode_dataset, generate_dataset, load_dataset, ChannelModelConfig, Split};

fn golden() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_4x2_seed11.dmcd")
}

#[test]
fn dataset_matches_golden_file() {
    let ds = generate_dataset(&ChannelModelConfig::default(), 4, 2, 8, 11, Split::Test).unwrap();
    let bytes = encode_dataset(&ds).unwrap();
    if std::env::var_os("DMCE_BLESS").is_some() {
        std::fs::write(golden(), &bytes).unwrap();
    }
    let stored = std::fs::read(golden()).expect("golden file present");
    assert!(bytes == stored, "generator output changed");
    assert_eq!(load_dataset(golden()).unwrap(), ds);
}
