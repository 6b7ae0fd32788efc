use jpeg_encoder::{ColorType, Encoder, SamplingFactor};
use serde::{Deserialize, Serialize};

use super::RgbImage;
use crate::error::{ensure, Error, Result};

pub const JPEG_QUALITIES: [u8; 3] = [75, 85, 95];

/// Chroma subsampling mode of the re-encoded JPEG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chroma {
    #[serde(rename = "4:2:0")]
    Yuv420,
    #[serde(rename = "4:4:4")]
    Yuv444,
}

impl Chroma {
    /// Short form used in class names (`420`, `444`).
    pub fn code(self) -> &'static str {
        match self {
            Chroma::Yuv420 => "420",
            Chroma::Yuv444 => "444",
        }
    }
}

/// Re-encodes `image` as a baseline sequential JPEG.
///
/// Huffman optimisation is off and no restart markers are written, so the
/// output is a pure function of the pixels, quality and chroma mode.
pub fn apply_jpeg(image: &RgbImage, quality: u8, chroma: Chroma) -> Result<Vec<u8>> {
    ensure!(
        JPEG_QUALITIES.contains(&quality),
        "JPEG quality {quality} is not one of {JPEG_QUALITIES:?}"
    );
    let (w, h) = image.dimensions();
    ensure!(w > 0 && h > 0, "cannot encode an empty image");
    let (w, h) = match (u16::try_from(w), u16::try_from(h)) {
        (Ok(w), Ok(h)) => (w, h),
        _ => return Err(Error::Image(format!("{w}×{h} exceeds the JPEG size limit"))),
    };
    let mut out = Vec::new();
    let mut encoder = Encoder::new(&mut out, quality);
    encoder.set_sampling_factor(match chroma {
        Chroma::Yuv420 => SamplingFactor::F_2_2,
        Chroma::Yuv444 => SamplingFactor::F_1_1,
    });
    encoder.set_progressive(false);
    encoder.set_optimized_huffman_tables(false);
    encoder.set_restart_interval(0);
    encoder
        .encode(image.as_raw(), w, h, ColorType::Rgb)
        .map_err(|e| Error::Image(format!("jpeg encoding failed: {e}")))?;
    Ok(out)
}

/// Sampling factors of one frame component as declared in the SOF marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentSampling {
    pub id: u8,
    pub horizontal: u8,
    pub vertical: u8,
}

/// Reads the component table of the first SOF marker without decoding any
/// entropy-coded data.
pub fn sof_components(jpeg: &[u8]) -> Result<Vec<ComponentSampling>> {
    let bad = |msg: &str| Error::Image(format!("not a valid JPEG stream: {msg}"));
    if jpeg.len() < 4 || jpeg[0] != 0xFF || jpeg[1] != 0xD8 {
        return Err(bad("missing SOI"));
    }
    let mut pos = 2;
    while pos + 4 <= jpeg.len() {
        if jpeg[pos] != 0xFF {
            return Err(bad("expected a marker"));
        }
        let marker = jpeg[pos + 1];
        if marker == 0xFF {
            pos += 1;
            continue;
        }
        let len = usize::from(u16::from_be_bytes([jpeg[pos + 2], jpeg[pos + 3]]));
        let seg_end = pos + 2 + len;
        if len < 2 || seg_end > jpeg.len() {
            return Err(bad("segment overruns stream"));
        }
        // SOF0..SOF15 except DHT (C4), JPG (C8) and DAC (CC)
        if (0xC0..=0xCF).contains(&marker) && ![0xC4, 0xC8, 0xCC].contains(&marker) {
            let seg = &jpeg[pos + 4..seg_end];
            if seg.len() < 6 {
                return Err(bad("short SOF"));
            }
            let count = usize::from(seg[5]);
            if seg.len() < 6 + 3 * count {
                return Err(bad("short SOF component table"));
            }
            return Ok((0..count)
                .map(|c| {
                    let entry = &seg[6 + 3 * c..9 + 3 * c];
                    ComponentSampling {
                        id: entry[0],
                        horizontal: entry[1] >> 4,
                        vertical: entry[1] & 0x0F,
                    }
                })
                .collect());
        }
        if marker == 0xDA {
            break;
        }
        pos = seg_end;
    }
    Err(bad("no SOF marker before scan data"))
}

/// Chroma mode of a 3-component stream, when it is 4:2:0 or 4:4:4.
pub fn detect_chroma(jpeg: &[u8]) -> Result<Option<Chroma>> {
    let comps = sof_components(jpeg)?;
    if comps.len() != 3 {
        return Ok(None);
    }
    let chroma_flat = comps[1..]
        .iter()
        .all(|c| c.horizontal == 1 && c.vertical == 1);
    Ok(match (comps[0].horizontal, comps[0].vertical, chroma_flat) {
        (1, 1, true) => Some(Chroma::Yuv444),
        (2, 2, true) => Some(Chroma::Yuv420),
        _ => None,
    })
}
