fn main() {
    // deep trees are parsed and dropped recursively by serde_json
    let code = std::thread::Builder::new()
        .stack_size(512 << 20)
        .spawn(|| genea::cli::run(std::env::args_os()))
        .expect("spawn main worker")
        .join()
        .unwrap_or(2);
    std::process::exit(code);
}
