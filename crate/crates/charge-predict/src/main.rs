fn main() {
    // placeholder until the pipeline lands
}
