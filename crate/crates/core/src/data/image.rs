//! 8-bit RGB PNG <-> `(1, 3, h, w)` arrays in `[0, 1]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Array4, Real, Shape};

pub fn load_png(path: &Path) -> Result<Array4<f32>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode(BufReader::new(file)).map_err(|reason| Error::data(path, reason))
}

/// Decode PNG bytes held in memory.
pub fn decode_png(bytes: &[u8]) -> std::result::Result<Array4<f32>, String> {
    decode(Cursor::new(bytes))
}

fn decode<R: std::io::BufRead + std::io::Seek>(r: R) -> std::result::Result<Array4<f32>, String> {
    let mut reader = png::Decoder::new(r).read_info().map_err(|e| e.to_string())?;
    let size = reader.output_buffer_size().ok_or("image too large")?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(format!(
            "expected 8-bit RGB, found {:?} at {:?}",
            info.color_type, info.bit_depth
        ));
    }
    let (h, w) = (info.height as usize, info.width as usize);
    let mut out = Array4::zeros(Shape::new(1, 3, h, w));
    for y in 0..h {
        let row = &buf[y * info.line_size..y * info.line_size + 3 * w];
        for x in 0..w {
            for c in 0..3 {
                out.set(0, c, y, x, row[3 * x + c] as f32 / 255.0);
            }
        }
    }
    Ok(out)
}

/// Quantize to 8 bits, rounding half up and clamping to `[0, 255]`.
pub fn quantize<T: Real>(v: T) -> u8 {
    let scaled = (v.to_f64() * 255.0 + 0.5).floor();
    if scaled.is_nan() {
        0
    } else {
        scaled.clamp(0.0, 255.0) as u8
    }
}

pub fn encode_png<T: Real>(img: &Array4<T>) -> Result<Vec<u8>> {
    let s = img.shape();
    if s.n != 1 || s.c != 3 {
        return Err(Error::invalid("encode_png", format!("expected (1,3,h,w), got {s}")));
    }
    let mut bytes = Vec::with_capacity(s.numel());
    for y in 0..s.h {
        for x in 0..s.w {
            for c in 0..3 {
                bytes.push(quantize(img.get(0, c, y, x)));
            }
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, s.w as u32, s.h as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let encode_err = |e: png::EncodingError| Error::invalid("encode_png", e.to_string());
        let mut writer = enc.write_header().map_err(encode_err)?;
        writer.write_image_data(&bytes).map_err(encode_err)?;
        writer.finish().map_err(encode_err)?;
    }
    Ok(out)
}

pub fn save_png<T: Real>(path: &Path, img: &Array4<T>) -> Result<()> {
    let bytes = encode_png(img)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn known_bytes_decode_exactly() {
        // 2x2 image: red, green / blue, (10, 128, 255).
        let mut raw = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut raw, 2, 2);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 128, 255]).unwrap();
        }
        let img = decode_png(&raw).unwrap();
        assert_eq!(img.shape(), Shape::new(1, 3, 2, 2));
        assert_eq!(img.plane(0, 0), &[1.0, 0.0, 0.0, 10.0 / 255.0]);
        assert_eq!(img.plane(0, 1), &[0.0, 1.0, 0.0, 128.0 / 255.0]);
        assert_eq!(img.plane(0, 2), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn round_trip_within_half_step() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let mut rng = stream(1, "png", 0);
        let img = Array4::from_fn(Shape::new(1, 3, 5, 7), |_, _, _, _| rng.gen_range(0.0f32..1.0));
        save_png(&path, &img).unwrap();
        let back = load_png(&path).unwrap();
        assert!(back.max_abs_diff(&img) <= 1.0 / 510.0 + 1e-7);

        let black = Array4::<f32>::zeros(Shape::new(1, 3, 3, 2));
        save_png(&path, &black).unwrap();
        assert_eq!(load_png(&path).unwrap(), black);
    }

    #[test]
    fn quantization_rounds_half_up_and_clamps() {
        assert_eq!(quantize(0.5f64 / 255.0), 1);
        assert_eq!(quantize(1.49f64 / 255.0), 1);
        assert_eq!(quantize(-0.3f64), 0);
        assert_eq!(quantize(1.7f64), 255);
    }

    #[test]
    fn rejects_non_rgb_and_reports_path() {
        let mut raw = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut raw, 1, 1);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[7]).unwrap();
        }
        assert!(decode_png(&raw).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.png");
        std::fs::write(&path, &raw).unwrap();
        let err = load_png(&path).unwrap_err().to_string();
        assert!(err.contains("gray.png"), "{err}");
        assert!(load_png(&dir.path().join("missing.png")).is_err());
    }
}
