//! Prints the default corpus manifest; redirect into `data/corpus.json`.

fn main() {
    let corpus = clockrc::corpus::Corpus::generate(4, 5);
    println!("{}", corpus.to_json().expect("serializable"));
}
