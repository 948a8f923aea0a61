// Run-length masks, connected components and contour tracing.
//
//     cargo run --example mask_codec

use bladeqc::mask::{connected_components, rle_decode, rle_encode, trace_contour, BitMask};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let art = [
        "..........",
        ".####.....",
        ".#..#...##",
        ".####...##",
        "..........",
        "......#...",
    ];
    let (w, h) = (art[0].len() as u32, art.len() as u32);
    let bits = art.iter().flat_map(|row| row.chars().map(|c| c == '#')).collect();
    let mask = BitMask::from_bits(w, h, bits)?;

    // Column-major counts starting with a background run.
    let rle = rle_encode(&mask);
    println!("rle           {}", serde_json::to_string(&rle)?);
    assert_eq!(rle_decode(&rle)?, mask);

    let lab = connected_components(&mask);
    println!("components    {}", lab.component_count());
    for l in 1..=lab.component_count() {
        let pixels = lab.pixels(l)?;
        let outline = trace_contour(&lab, l)?;
        // The ring's hole is filled: its outline encloses 12 px, not 10.
        println!(
            "  #{l}: {:>2} px, outline {} vertices enclosing {} px",
            pixels.len(),
            outline.vertices().len(),
            outline.area()
        );
    }
    Ok(())
}
