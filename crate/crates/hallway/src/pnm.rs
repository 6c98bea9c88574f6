//! Binary netpbm: P6 for color frames, 16-bit P5 for depth in millimeters.

use hallway_core::image::{DepthImage, RgbImage};

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

/// Samples are big-endian, as the format requires for maxval > 255.
pub fn encode_pgm16(img: &DepthImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    out.extend(img.mm.iter().flat_map(|v| v.to_be_bytes()));
    out
}

struct Header {
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header, String> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(format!("not a {} file", String::from_utf8_lossy(magic)));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("header value out of range")?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("truncated header".into());
    }
    let [width, height, maxval] = fields;
    Ok(Header { width, height, maxval, data_start: pos + 1 })
}

fn raster<'a>(bytes: &'a [u8], h: &Header, bytes_per_px: usize) -> Result<&'a [u8], String> {
    let want = h
        .width
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(bytes_per_px))
        .ok_or("image dimensions overflow")?;
    let data = &bytes[h.data_start..];
    if data.len() != want {
        return Err(format!("expected {want} raster bytes, found {}", data.len()));
    }
    Ok(data)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, String> {
    let h = parse_header(bytes, b"P6")?;
    if h.maxval != 255 {
        return Err(format!("unsupported maxval {}", h.maxval));
    }
    let data = raster(bytes, &h, 3)?;
    Ok(RgbImage { width: h.width, height: h.height, data: data.to_vec() })
}

pub fn decode_pgm16(bytes: &[u8]) -> Result<DepthImage, String> {
    let h = parse_header(bytes, b"P5")?;
    if h.maxval != 65535 {
        return Err(format!("expected a 16-bit depth map, maxval is {}", h.maxval));
    }
    let data = raster(bytes, &h, 2)?;
    let mm = data.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect();
    Ok(DepthImage { width: h.width, height: h.height, mm })
}
