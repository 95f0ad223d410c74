use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use rangemos::render::{Bounds, RgbImage};

pub fn write_png(img: &RgbImage, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&img.data)?;
    writer.finish()?;
    Ok(())
}

/// PNG plus a `.txt` sidecar holding the normalization bounds.
pub fn write_png_with_bounds(
    img: &RgbImage,
    bounds: &Bounds,
    what: &str,
    path: &Path,
) -> Result<()> {
    write_png(img, path)?;
    let sidecar = path.with_extension("txt");
    fs::write(&sidecar, bounds.sidecar(what))
        .with_context(|| format!("writing {}", sidecar.display()))
}

pub fn write_f32s(values: impl IntoIterator<Item = f32>, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(f32::to_le_bytes).collect();
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
