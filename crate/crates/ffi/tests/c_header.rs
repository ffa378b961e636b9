use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "dgi.h"
#include <stdio.h>

int main(void) {
    DgiGraph *graph = NULL;
    double x[4] = {1.0, 0.0, 0.0, 1.0};
    size_t edges[2] = {0, 1};
    if (dgi_graph_from_edges(2, 2, x, 1, edges, &graph) != DGI_STATUS_OK) {
        fprintf(stderr, "%s\n", dgi_last_error());
        return 1;
    }
    DgiTrainOptions opts;
    dgi_train_options_default(&opts);
    opts.hidden_dim = 4;
    opts.max_epochs = 3;
    DgiModel *model = NULL;
    DgiStatus s = dgi_train(graph, &opts, &model);
    double h[8];
    if (s == DGI_STATUS_OK) s = dgi_encode(model, graph, h, 8);
    size_t failed = 0;
    dgi_theory_suite(0, &failed);
    dgi_model_free(model);
    dgi_graph_free(graph);
    return s == DGI_STATUS_OK && failed == 0 ? 0 : 1;
}
"#;

#[test]
fn header_compiles_as_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler `{cc}`");
        return;
    }
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("dgi.h").is_file(), "header not generated");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dgi.h")).unwrap();
    let source = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exported: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 15, "{exported:?}");
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(Path::parent).unwrap().join("libdgi_ffi.a");
    if Command::new(&cc).arg("--version").output().is_err() || !lib.is_file() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new(&cc)
        .args(["-std=c99", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
}
