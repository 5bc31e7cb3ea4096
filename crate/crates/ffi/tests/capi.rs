use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use scmc_design_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(scmc_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn grid(n: usize) -> Vec<f64> {
    (0..n * n)
        .flat_map(|i| {
            [
                (i % n) as f64 / (n - 1) as f64,
                (i / n) as f64 / (n - 1) as f64,
            ]
        })
        .collect()
}

#[test]
fn sample_crescent_and_check_feasibility() {
    unsafe {
        let mut region = ptr::null_mut();
        assert_eq!(scmc_region_crescent(&mut region), ScmcStatus::Ok);
        assert_eq!(scmc_region_dim(region), 2);
        assert_eq!(scmc_region_n_constraints(region), 2);

        let mut opts = scmc_options_default();
        opts.n_particles = 2000;
        opts.seed = 4;
        let mut samples = ptr::null_mut();
        assert_eq!(
            scmc_sample(region, &opts, &mut samples),
            ScmcStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(scmc_samples_len(samples), 2000);
        assert_eq!(scmc_samples_dim(samples), 2);
        let steps = scmc_samples_steps(samples);
        assert!(steps >= 1);
        let taus = std::slice::from_raw_parts(scmc_samples_taus(samples), steps + 1);
        assert_eq!(taus[0], 0.0);
        assert_eq!(taus[steps], opts.tau_target);
        let pts = std::slice::from_raw_parts(scmc_samples_points(samples), 4000);
        for x in pts.chunks(2) {
            let mut ok = false;
            assert_eq!(
                scmc_region_is_feasible(region, x.as_ptr(), 2, 0.0, &mut ok),
                ScmcStatus::Ok
            );
            assert!(ok);
        }
        let mut dev = [1.0; 2];
        assert_eq!(
            scmc_region_deviation(region, pts.as_ptr(), 2, dev.as_mut_ptr()),
            ScmcStatus::Ok
        );
        assert!(dev.iter().all(|&v| v <= 0.0));

        scmc_samples_free(samples);
        scmc_region_free(region);
    }
}

#[test]
fn constraint_region_and_parse_errors() {
    let exprs = [
        CString::new("x1^2 + x2^2 <= 1").unwrap(),
        CString::new("0 <= x2").unwrap(),
    ];
    let ptrs: Vec<_> = exprs.iter().map(|c| c.as_ptr()).collect();
    let (lo, hi) = ([-1.0, -1.0], [1.0, 1.0]);
    unsafe {
        let mut region = ptr::null_mut();
        let st = scmc_region_from_constraints(
            ptrs.as_ptr(),
            2,
            lo.as_ptr(),
            hi.as_ptr(),
            2,
            &mut region,
        );
        assert_eq!(st, ScmcStatus::Ok, "{}", last_error());
        let mut ok = true;
        scmc_region_is_feasible(region, [0.0, -0.5].as_ptr(), 2, 0.0, &mut ok);
        assert!(!ok);
        scmc_region_free(region);

        let bad = [CString::new("x1 +* 2 <= 0").unwrap()];
        let ptrs: Vec<_> = bad.iter().map(|c| c.as_ptr()).collect();
        let mut region = ptr::null_mut();
        let st = scmc_region_from_constraints(
            ptrs.as_ptr(),
            1,
            lo.as_ptr(),
            hi.as_ptr(),
            2,
            &mut region,
        );
        assert_eq!(st, ScmcStatus::Parse);
        assert!(region.is_null());
        assert!(
            last_error().starts_with("constraint 0:"),
            "{}",
            last_error()
        );
    }
}

#[test]
fn null_and_invalid_arguments() {
    unsafe {
        assert_eq!(
            scmc_region_crescent(ptr::null_mut()),
            ScmcStatus::NullPointer
        );
        let mut region = ptr::null_mut();
        assert_eq!(
            scmc_region_ball(-1.0, 2, &mut region),
            ScmcStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());
        let mut samples = ptr::null_mut();
        assert_eq!(
            scmc_sample(ptr::null(), ptr::null(), &mut samples),
            ScmcStatus::NullPointer
        );
        let mut design = ptr::null_mut();
        let st = scmc_design_greedy(
            ptr::null(),
            4,
            2,
            ScmcCriterion::Cmm,
            1,
            ptr::null(),
            2,
            0,
            &mut design,
        );
        assert_eq!(st, ScmcStatus::NullPointer);
        let pts = grid(3);
        let st = scmc_design_greedy(
            pts.as_ptr(),
            9,
            2,
            ScmcCriterion::Cmm,
            1,
            ptr::null(),
            10,
            0,
            &mut design,
        );
        assert_eq!(st, ScmcStatus::DesignFailed);
        let w = [1.0, 2.0];
        let st = scmc_design_greedy(
            pts.as_ptr(),
            9,
            2,
            ScmcCriterion::MaxPro,
            1,
            w.as_ptr(),
            2,
            0,
            &mut design,
        );
        assert_eq!(st, ScmcStatus::InvalidArgument);
        assert_eq!(scmc_design_size(ptr::null()), 0);
        assert!(scmc_design_mindist(ptr::null()).is_nan());
        scmc_region_free(ptr::null_mut());
        scmc_samples_free(ptr::null_mut());
        scmc_design_free(ptr::null_mut());
    }
}

#[test]
fn greedy_designs_report_input_rows() {
    let pts = grid(5);
    for crit in [
        ScmcCriterion::Cmm,
        ScmcCriterion::Ard,
        ScmcCriterion::MaxPro,
    ] {
        unsafe {
            let mut d = ptr::null_mut();
            let st = scmc_design_greedy(pts.as_ptr(), 25, 2, crit, 1, ptr::null(), 4, 0, &mut d);
            assert_eq!(st, ScmcStatus::Ok, "{}", last_error());
            assert_eq!(scmc_design_size(d), 4);
            assert_eq!(scmc_design_dim(d), 2);
            let rows = std::slice::from_raw_parts(scmc_design_rows(d), 4);
            let out = std::slice::from_raw_parts(scmc_design_points(d), 8);
            for (k, &r) in rows.iter().enumerate() {
                assert_eq!(&out[2 * k..2 * k + 2], &pts[2 * r..2 * r + 2]);
            }
            assert!(scmc_design_labels(d).is_null());
            assert!(scmc_design_mindist(d) > 0.0);
            scmc_design_free(d);
        }
    }
}

#[test]
fn fff_labels_cover_duplicate_rows() {
    let mut pts = vec![0.0, 0.0, 0.1, 0.0, 5.0, 5.0, 5.1, 5.0];
    pts.extend_from_slice(&[5.0, 5.0]);
    unsafe {
        let mut d = ptr::null_mut();
        let st = scmc_design_fff(pts.as_ptr(), 5, 2, 2, ScmcFffSummary::Centroid, &mut d);
        assert_eq!(st, ScmcStatus::Ok, "{}", last_error());
        let rows = std::slice::from_raw_parts(scmc_design_rows(d), 2);
        assert!(rows.iter().all(|&r| r == SCMC_NO_ROW));
        let labels = std::slice::from_raw_parts(scmc_design_labels(d), 5);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_eq!(labels[2], labels[4]);
        assert_ne!(labels[0], labels[2]);
        scmc_design_free(d);

        let st = scmc_design_fff(pts.as_ptr(), 5, 2, 2, ScmcFffSummary::MedoidMaxpro, &mut d);
        assert_eq!(st, ScmcStatus::Ok);
        let rows = std::slice::from_raw_parts(scmc_design_rows(d), 2);
        assert!(rows.iter().all(|&r| r < 5));
        scmc_design_free(d);
    }
}

#[test]
fn geodesic_design_and_disconnected_graph() {
    unsafe {
        let mut d = ptr::null_mut();
        let line: Vec<f64> = (0..40).flat_map(|i| [i as f64 * 0.1, 0.0]).collect();
        let st = scmc_design_geodesic(line.as_ptr(), 40, 2, 4, 3, 0, &mut d);
        assert_eq!(st, ScmcStatus::Ok, "{}", last_error());
        assert_eq!(scmc_design_size(d), 3);
        scmc_design_free(d);

        let mut blobs = grid(4);
        blobs.extend(grid(4).iter().map(|v| v + 100.0));
        let st = scmc_design_geodesic(blobs.as_ptr(), 32, 2, 3, 3, 0, &mut d);
        assert_eq!(st, ScmcStatus::DisconnectedGraph);
        assert!(last_error().contains("components"));
    }
}

#[test]
fn geojson_region() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/canada.geojson");
    let c = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut region = ptr::null_mut();
        assert_eq!(
            scmc_region_from_geojson(c.as_ptr(), &mut region),
            ScmcStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(scmc_region_dim(region), 2);
        scmc_region_free(region);
        let missing = CString::new("/nonexistent.geojson").unwrap();
        assert_eq!(
            scmc_region_from_geojson(missing.as_ptr(), &mut region),
            ScmcStatus::Io
        );
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = include.join("scmc_design.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "scmc_sample",
        "scmc_design_fff",
        "SCMC_STATUS_OK",
        "SCMC_NO_ROW",
        "ScmcOptions",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"scmc_design.h\"\nint main(void) { ScmcOptions o = scmc_options_default(); \
         return (int)o.n_particles + (SCMC_NO_ROW == (size_t)-1 ? 0 : 1); }\n",
    )
    .unwrap();
    for (compiler, extra) in [("cc", vec!["-std=c99"]), ("c++", vec!["-x", "c++"])] {
        let status = Command::new(compiler)
            .args(&extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&include)
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(_) => eprintln!("{compiler} not available; skipping"),
        }
    }
}
