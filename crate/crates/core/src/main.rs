fn main() {
    // CLI wired up once the pipeline stages exist.
}
