//! Writes a small synthetic corpus as IDX files, reads it back, and shows
//! the encoded network input of one sample.
//!
//! Pass a directory holding real MNIST files to inspect those instead:
//! `cargo run --example idx_dataset -- data/mnist`

use std::path::PathBuf;

use sparse_snn::data::{load_idx, synthetic_corpus, write_idx, Split};
use sparse_snn::train::IDX_TEST;
use sparse_snn::Shape3;

fn main() -> sparse_snn::Result<()> {
    let data = match std::env::args().nth(1).map(PathBuf::from) {
        Some(dir) => load_idx(&dir.join(IDX_TEST.0), &dir.join(IDX_TEST.1), Split::Test)?,
        None => {
            let dir = std::env::temp_dir().join("sparse-snn-idx-example");
            std::fs::create_dir_all(&dir).map_err(|e| sparse_snn::SnnError::Config(e.to_string()))?;
            let corpus = synthetic_corpus(1, 12, Shape3::new(1, 10, 10), 3, Split::Test)?;
            let (img, lbl) = (dir.join(IDX_TEST.0), dir.join(IDX_TEST.1));
            write_idx(&corpus, &img, &lbl)?;
            let back = load_idx(&img, &lbl, Split::Test)?;
            println!("round trip identical: {}", back == corpus);
            back
        }
    };
    println!("{} samples of {}, {} classes", data.len(), data.shape, data.class_count);
    let s = data.sample(0);
    for y in 0..data.shape.height {
        let row: String = (0..data.shape.width)
            .map(|x| match s[y * data.shape.width + x] {
                v if v > 0.6 => '#',
                v if v > 0.3 => '+',
                _ => '.',
            })
            .collect();
        println!("{row}");
    }
    let encoded = data.encode(0, 4)?;
    println!("label {}, encoded input: {} values (4 steps x {})", data.label(0), encoded.len(), data.sample_len());
    Ok(())
}
