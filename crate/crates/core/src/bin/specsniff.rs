fn main() {
    specsniff::harness::cli_main();
}
