//! Compiles the emitted fixture kernels against the C++ runtime and checks
//! their output against the interpreter. Skipped when no C++ compiler is found.

use std::process::Command;

use sdqlite::interp::{compare, parse_value, Tolerance};
use sdqlite_driver::fixtures::{emit_runtime_fixtures, FIXTURE_KERNELS};
use sdqlite_driver::sdg1::read_sdg1;

fn compiler() -> Option<&'static str> {
    ["g++", "clang++"]
        .into_iter()
        .find(|cxx| Command::new(cxx).arg("--version").output().is_ok_and(|o| o.status.success()))
}

#[test]
fn fixtures_are_written_and_readable() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = emit_runtime_fixtures(dir.path()).unwrap();
    assert_eq!(fixtures.len(), FIXTURE_KERNELS.len());
    assert!(dir.path().join("sdqlite_runtime.hpp").exists());
    for f in &fixtures {
        let records = read_sdg1(std::fs::File::open(&f.inputs).unwrap()).unwrap();
        assert!(!records.is_empty(), "{}", f.kernel);
        parse_value(std::fs::read_to_string(&f.expected).unwrap().trim()).unwrap();
    }
}

#[test]
fn compiled_kernels_match_the_interpreter() {
    let Some(cxx) = compiler() else {
        eprintln!("no C++ compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    for f in emit_runtime_fixtures(dir.path()).unwrap() {
        let exe = dir.path().join(f.kernel);
        let out = Command::new(cxx)
            .args(["-std=c++17", "-O1", "-Wall", "-Wextra", "-Werror", "-o"])
            .arg(&exe)
            .arg(&f.source)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}: {}", f.kernel, String::from_utf8_lossy(&out.stderr));
        let run = Command::new(&exe).arg(&f.inputs).output().unwrap();
        assert!(run.status.success(), "{}: {}", f.kernel, String::from_utf8_lossy(&run.stderr));
        let got = parse_value(String::from_utf8(run.stdout).unwrap().trim()).unwrap();
        let want = parse_value(std::fs::read_to_string(&f.expected).unwrap().trim()).unwrap();
        let d = compare(&got, &want, Tolerance { abs: 1e-10, rel: 1e-10 });
        assert!(d.within() && d.coords > 0, "{}: {:?}\n got {}\nwant {}", f.kernel, d, got, want);
    }
}
