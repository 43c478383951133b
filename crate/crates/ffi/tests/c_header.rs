use std::path::{Path, PathBuf};
use std::process::Command;

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header_dir().join("fbound.h")).unwrap();
    for name in [
        "fb_solve_integral",
        "fb_solve_pde",
        "fb_solve_asian",
        "fb_boundary_free",
        "fb_boundary_price",
        "fb_last_error",
        "typedef struct FbBoundary FbBoundary",
        "FB_STATUS_OK = 0",
    ] {
        assert!(h.contains(name), "missing {name}");
    }
}

// Compiles tests/c/smoke.c against the header and the static library when a C compiler is present.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libfbound_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("fbound_smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header_dir())
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.starts_with("101 22.37"), "{text}");
}
