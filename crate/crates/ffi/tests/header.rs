//! The generated C header must stay committed, complete, and compilable.

use std::path::PathBuf;
use std::process::Command;

fn header_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("screenaudit.h")
}

#[test]
fn header_declares_the_full_surface() {
    let text = std::fs::read_to_string(header_path()).expect("include/screenaudit.h missing");
    for needle in [
        "#ifndef SCREENAUDIT_H",
        "typedef enum SaStatus",
        "SA_STATUS_OK = 0",
        "SA_STATUS_PANIC",
        "typedef struct SaDataset SaDataset;",
        "sa_version(void)",
        "sa_last_error(void)",
        "sa_string_free(char *s)",
        "sa_dataset_load(",
        "sa_dataset_free(",
        "sa_dataset_len(",
        "sa_dataset_n_applicants(",
        "sa_audit_run(",
        "sa_poisson_binomial(",
        "sa_pooled_z_test(",
        "sa_benjamini_hochberg(",
        "sa_fit_exponential(",
    ] {
        assert!(text.contains(needle), "header lacks {needle:?}");
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Ok(cc) = which("cc") else {
        eprintln!("skipping: no C compiler on PATH");
        return;
    };
    let header = header_path();
    let dir = tempfile::tempdir().unwrap();
    let main_c = dir.path().join("use_header.c");
    std::fs::write(
        &main_c,
        "#include \"screenaudit.h\"\nint main(void) { return (int)SA_STATUS_OK; }\n",
    )
    .unwrap();
    for (compiler, std_flag) in [(cc.as_str(), "-std=c99"), ("c++", "-std=c++14")] {
        if compiler != "cc" && which(compiler).is_err() {
            continue;
        }
        let status = Command::new(compiler)
            .arg(std_flag)
            .arg("-fsyntax-only")
            .arg("-Wall")
            .arg("-Werror")
            .arg(format!("-I{}", header.parent().unwrap().display()))
            .arg(if compiler == "c++" { "-xc++" } else { "-xc" })
            .arg(&main_c)
            .status()
            .unwrap();
        assert!(status.success(), "{compiler} rejected the generated header");
    }
}

fn which(name: &str) -> Result<String, ()> {
    let path = std::env::var_os("PATH").ok_or(())?;
    for dir in std::env::split_paths(&path) {
        let candidate = dir.join(name);
        if candidate.is_file() {
            return Ok(name.to_string());
        }
    }
    Err(())
}
