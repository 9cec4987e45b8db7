fn main() {
    println!("mvdiff (cli wiring pending)");
}
