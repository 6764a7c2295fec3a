use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use hypograph_ffi::*;

const DATA: &str = concat!(
    r#"{"id":"a","nodes":[{"kind":"C"},{"kind":"O"}],"edges":[[0,1,{"kind":"double"}]],"y":3.0}"#,
    "\n",
    r#"{"id":"b","nodes":[{"kind":"C"},{"kind":"O"}],"edges":[[0,1,{"kind":"single"}]],"y":1.0}"#,
    "\n",
    r#"{"id":"c","nodes":[{"kind":"C"},{"kind":"C"},{"kind":"O"}],"edges":[[0,1,{"kind":"single"}],[1,2,{"kind":"double"}]],"y":3.5}"#,
    "\n",
    r#"{"id":"d","nodes":[{"kind":"C"},{"kind":"C"}],"edges":[[0,1,{"kind":"single"}]],"y":0.5}"#,
    "\n"
);

fn last_error() -> String {
    let p = hg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_and_qubits() {
    let v = unsafe { CStr::from_ptr(hg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let mut out = 0.0;
    assert_eq!(unsafe { hg_n_qubits(2, 2, 2, &mut out) }, HgStatus::Ok);
    assert_eq!(out, 3.0);
    assert!(hg_last_error().is_null());
    assert_eq!(unsafe { hg_n_qubits(0, 2, 2, &mut out) }, HgStatus::Data);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { hg_n_qubits(1, 1, 1, ptr::null_mut()) }, HgStatus::NullPointer);
}

#[test]
fn full_round_trip() {
    let text = CString::new(DATA).unwrap();
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(hg_dataset_from_jsonl(text.as_ptr(), &mut ds), HgStatus::Ok, "{}", last_error());
        assert_eq!(hg_dataset_len(ds), 4);
        let mut f = ptr::null_mut();
        assert_eq!(hg_featurize(ds, 1, &mut f), HgStatus::Ok);
        assert!(hg_features_count(f) > 3);
        let cfg = HgTrainConfig { stages: 10, shrinkage: 0.5, max_depth: 1, min_leaf: 1, seed: 0 };
        let mut m = ptr::null_mut();
        assert_eq!(hg_train(ds, f, &cfg, &mut m), HgStatus::Ok, "{}", last_error());

        let mut y = 0.0;
        let g = CString::new(r#"{"id":"q","nodes":[{"kind":"C"},{"kind":"O"}],"edges":[[0,1,{"kind":"double"}]]}"#)
            .unwrap();
        assert_eq!(hg_model_predict(m, g.as_ptr(), &mut y), HgStatus::Ok);
        assert!(y > 2.0, "{y}");

        let mut json = ptr::null_mut();
        assert_eq!(hg_model_to_json(m, &mut json), HgStatus::Ok);
        let model = CStr::from_ptr(json).to_str().unwrap().to_string();
        assert!(hypograph::boost::BoostedEnsemble::from_json(&model).is_ok());
        hg_string_free(json);

        let mut hyps = ptr::null_mut();
        assert_eq!(hg_hypotheses_json(ds, f, m, 5, 0.2, &mut hyps), HgStatus::Ok, "{}", last_error());
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(hyps).to_str().unwrap()).unwrap();
        assert!(v.is_array());
        hg_string_free(hyps);

        hg_model_free(m);
        hg_features_free(f);
        hg_dataset_free(ds);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("{\"id\":\"x\",\"nodes\":[}\n").unwrap();
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(hg_dataset_from_jsonl(bad.as_ptr(), &mut ds), HgStatus::Parse);
        assert!(ds.is_null());
        assert!(last_error().contains("line 1"), "{}", last_error());
        assert_eq!(hg_dataset_from_jsonl(ptr::null(), &mut ds), HgStatus::NullPointer);
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(hg_dataset_from_jsonl(invalid.as_ptr().cast(), &mut ds), HgStatus::InvalidUtf8);
        let mut f = ptr::null_mut();
        assert_eq!(hg_featurize(ptr::null(), 1, &mut f), HgStatus::NullPointer);
        let mol = CString::new("C=O 1.0\nC1CC 2.0\n").unwrap();
        assert_eq!(hg_dataset_from_molecules(mol.as_ptr(), &mut ds), HgStatus::Parse);
        assert_eq!(hg_dataset_len(ptr::null()), 0);
        hg_dataset_free(ptr::null_mut());
        hg_string_free(ptr::null_mut());
    }
}

#[test]
fn defaults_match_library() {
    let d = hg_train_config_default();
    assert_eq!((d.stages, d.max_depth, d.min_leaf), (200, 3, 5));
    assert_eq!(d.shrinkage, 0.1);
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/hypograph.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in
        ["hg_dataset_from_jsonl", "hg_train", "hg_model_predict", "HG_STATUS_OK", "typedef struct HgModel HgModel"]
    {
        assert!(text.contains(name), "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"hypograph.h\"\nint main(void) { HgTrainConfig c = hg_train_config_default(); return c.stages == 0; }\n",
    )
    .unwrap();
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler found; header only checked textually");
        return;
    };
    assert!(status.success());
}
