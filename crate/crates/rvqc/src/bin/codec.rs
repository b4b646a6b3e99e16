fn main() {
    println!("codec");
}
