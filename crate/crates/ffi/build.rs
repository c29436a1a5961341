use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR"));
    let out = crate_dir.join("include").join("leaky_iv.h");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("cbindgen.toml");
    match cbindgen::Builder::new().with_crate(&crate_dir).with_config(config).generate() {
        Ok(bindings) => {
            std::fs::create_dir_all(out.parent().unwrap()).expect("include dir");
            bindings.write_to_file(&out);
        }
        // Keep the checked-in header if parsing fails (e.g. offline tooling).
        Err(e) => println!("cargo:warning=cbindgen failed, header not regenerated: {e}"),
    }
}
