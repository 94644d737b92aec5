use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use few_ffi::*;

fn last_error() -> String {
    let p = few_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Two noisy clusters split on the first attribute.
fn toy() -> (Vec<f64>, Vec<u32>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..80 {
        let c = (i % 2) as u32;
        x.push(c as f64 * 3.0 + (i as f64 * 0.37).sin());
        x.push((i as f64 * 1.3).cos());
        y.push(c);
    }
    (x, y)
}

#[test]
fn fit_predict_and_json_round_trip() {
    let (x, y) = toy();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(few_dataset_from_arrays(x.as_ptr(), 80, 2, y.as_ptr(), 2, &mut ds), FewStatus::Ok);
        assert_eq!(few_dataset_n_samples(ds), 80);
        assert_eq!(few_dataset_n_features(ds), 2);

        let cfg = CString::new(r#"{"population": {"absolute": 6}, "generations": 5, "seed": 3}"#).unwrap();
        let mut pipe = ptr::null_mut();
        let st = few_fit(ds, cfg.as_ptr(), &mut pipe);
        assert_eq!(st, FewStatus::Ok, "{}", if st == FewStatus::Ok { String::new() } else { last_error() });
        assert_eq!(few_pipeline_n_inputs(pipe), 2);
        let n = few_pipeline_n_features(pipe);
        assert!(n >= 1);
        let mut score = 0.0;
        assert_eq!(few_pipeline_best_score(pipe, &mut score), FewStatus::Ok);
        assert!(score > 0.9);

        let mut text = ptr::null_mut();
        assert_eq!(few_pipeline_feature_text(pipe, 0, &mut text), FewStatus::Ok);
        assert!(few::expr::parse_tree(CStr::from_ptr(text).to_str().unwrap(), 2).is_ok());
        few_string_free(text);
        assert_eq!(few_pipeline_feature_text(pipe, n, &mut text), FewStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        let mut labels = vec![9u32; 80];
        assert_eq!(few_pipeline_predict(pipe, x.as_ptr(), 80, 2, labels.as_mut_ptr()), FewStatus::Ok);
        assert!(labels.iter().all(|&l| l < 2));

        let mut json = ptr::null_mut();
        assert_eq!(few_pipeline_to_json(pipe, &mut json), FewStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(few_pipeline_from_json(json, &mut back), FewStatus::Ok);
        few_string_free(json);
        let mut again = vec![9u32; 80];
        assert_eq!(few_pipeline_predict(back, x.as_ptr(), 80, 2, again.as_mut_ptr()), FewStatus::Ok);
        assert_eq!(labels, again);

        assert_eq!(few_pipeline_predict(pipe, x.as_ptr(), 40, 4, labels.as_mut_ptr()), FewStatus::DataError);
        few_pipeline_free(back);
        few_pipeline_free(pipe);
        few_dataset_free(ds);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut ds = ptr::null_mut();
        let missing = CString::new("/nonexistent/data.csv").unwrap();
        assert_eq!(few_dataset_load_csv(missing.as_ptr(), ptr::null(), &mut ds), FewStatus::DataError);
        assert!(ds.is_null());
        assert_eq!(few_dataset_load_csv(ptr::null(), ptr::null(), &mut ds), FewStatus::NullPointer);

        let (x, y) = toy();
        assert_eq!(few_dataset_from_arrays(x.as_ptr(), 80, 2, y.as_ptr(), 1, &mut ds), FewStatus::InvalidConfig);
        assert_eq!(few_dataset_from_arrays(x.as_ptr(), 80, 2, y.as_ptr(), 2, &mut ds), FewStatus::Ok);
        let mut pipe = ptr::null_mut();
        let bad = CString::new(r#"{"generations": "many"}"#).unwrap();
        assert_eq!(few_fit(ds, bad.as_ptr(), &mut pipe), FewStatus::InvalidConfig);
        let bad = CString::new(r#"{"crossover_rate": 2.0}"#).unwrap();
        assert_eq!(few_fit(ds, bad.as_ptr(), &mut pipe), FewStatus::InvalidConfig);
        assert!(pipe.is_null());
        assert_eq!(few_fit(ptr::null(), ptr::null(), &mut pipe), FewStatus::NullPointer);
        let junk = CString::new("{").unwrap();
        assert_eq!(few_pipeline_from_json(junk.as_ptr(), &mut pipe), FewStatus::InvalidArgument);
        few_dataset_free(ds);
        few_dataset_free(ptr::null_mut());
        few_pipeline_free(ptr::null_mut());
        few_string_free(ptr::null_mut());
    }
}

#[test]
fn loads_csv_with_named_target() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "class,a,b\nx,1,2\ny,3,4\nx,5,6\n").unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let t = CString::new("class").unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(few_dataset_load_csv(p.as_ptr(), t.as_ptr(), &mut ds), FewStatus::Ok);
        assert_eq!(few_dataset_n_samples(ds), 3);
        assert_eq!(few_dataset_n_features(ds), 2);
        few_dataset_free(ds);
    }
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(few_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/few.h");
    let text = std::fs::read_to_string(header).unwrap();
    for sym in ["few_fit", "few_pipeline_predict", "few_last_error", "FEW_STATUS_DATA_ERROR", "typedef struct FewPipeline"] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output() else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
