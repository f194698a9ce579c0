//! Binary PGM (P5) encode/decode for 8-bit frames, the file format
//! the external reference-model protocol exchanges.

use crate::uvc::Frame;

use super::CheckError;

/// Serializes an 8-bit-or-narrower frame as binary PGM.
pub fn write_pgm(frame: &Frame) -> Result<Vec<u8>, CheckError> {
    if frame.bpp() > 8 {
        return Err(CheckError::Pgm(format!(
            "only frames up to 8 bpp can be written, got {}",
            frame.bpp()
        )));
    }
    let maxval = Frame::max_value(frame.bpp());
    let mut out = format!("P5\n{} {}\n{}\n", frame.width(), frame.height(), maxval).into_bytes();
    out.extend(frame.pixels().iter().map(|p| *p as u8));
    Ok(out)
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_filler(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a str, CheckError> {
        self.skip_filler();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(CheckError::Pgm("truncated header".to_string()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| CheckError::Pgm("non-ascii header".to_string()))
    }

    fn number(&mut self, what: &str) -> Result<u32, CheckError> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| CheckError::Pgm(format!("bad {what} `{tok}`")))
    }
}

/// Parses binary PGM bytes back into a frame. The bit depth is the
/// smallest that holds the declared maxval.
pub fn read_pgm(bytes: &[u8]) -> Result<Frame, CheckError> {
    let mut t = Tokens { bytes, pos: 0 };
    let magic = t.token()?;
    if magic != "P5" {
        return Err(CheckError::Pgm(format!("expected P5, found `{magic}`")));
    }
    let width = t.number("width")?;
    let height = t.number("height")?;
    let maxval = t.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(CheckError::Pgm(format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    t.pos += 1;
    let need = width as usize * height as usize;
    let raster = bytes
        .get(t.pos..t.pos + need)
        .ok_or_else(|| CheckError::Pgm("truncated raster".to_string()))?;
    let bpp = 32 - maxval.leading_zeros();
    Frame::new(
        width,
        height,
        bpp,
        raster.iter().map(|b| *b as u16).collect(),
    )
    .map_err(CheckError::Pgm)
}
