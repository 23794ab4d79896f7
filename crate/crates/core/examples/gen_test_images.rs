//! Writes the three standard synthetic scenes as 8-bit PGMs, ready to feed
//! the `pgnoise` CLI:
//!
//! ```text
//! cargo run --example gen_test_images -- test-images
//! pgnoise simulate --input test-images/synthetic-0.pgm --a 20 --b 0.05 --out pair
//! ```

use pgnoise::io::{save_pgm, PgmDepth};
use pgnoise::synthetic::default_suite;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "test-images".to_string());
    std::fs::create_dir_all(&dir)?;
    for (i, img) in default_suite().into_iter().enumerate() {
        let path = format!("{dir}/synthetic-{i}.pgm");
        save_pgm(&img, &path, PgmDepth::Eight)?;
        println!("wrote {path} ({}x{})", img.width(), img.height());
    }
    Ok(())
}
