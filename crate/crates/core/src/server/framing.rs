//! `Content-Length` framed messages over byte streams.

use std::io::{self, BufRead, Write};

use thiserror::Error;

/// Upper bound on a single frame body.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;
const MAX_HEADER_LINE: usize = 8 * 1024;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("missing Content-Length header")]
    MissingLength,
    #[error("invalid header line: {0:?}")]
    BadHeader(String),
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("stream ended inside a frame")]
    UnexpectedEof,
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FrameError {
    /// Whether the reader can continue with the next frame.
    pub fn recoverable(&self) -> bool {
        matches!(
            self,
            FrameError::MissingLength | FrameError::BadHeader(_) | FrameError::TooLarge(_)
        )
    }
}

fn read_header_line<R: BufRead>(r: &mut R, buf: &mut Vec<u8>) -> io::Result<usize> {
    buf.clear();
    let n = io::Read::take(&mut *r, MAX_HEADER_LINE as u64).read_until(b'\n', buf)?;
    Ok(n)
}

/// Read one frame body. `Ok(None)` on a clean end of stream.
///
/// On a recoverable error the header block has been consumed (and, for an
/// oversized frame, the body skipped), so reading can resume.
pub fn read_frame<R: BufRead>(r: &mut R) -> Result<Option<Vec<u8>>, FrameError> {
    let mut line = Vec::new();
    let mut length: Option<usize> = None;
    let mut bad: Option<FrameError> = None;
    let mut started = false;
    loop {
        let n = read_header_line(r, &mut line)?;
        if n == 0 {
            return if started {
                Err(FrameError::UnexpectedEof)
            } else {
                Ok(None)
            };
        }
        let text = String::from_utf8_lossy(&line);
        let text = text.trim_end_matches(['\r', '\n']);
        if text.is_empty() {
            if !started {
                // stray blank lines between frames
                continue;
            }
            break;
        }
        started = true;
        if !line.ends_with(b"\n") {
            bad.get_or_insert(FrameError::BadHeader(text.to_owned()));
            continue;
        }
        match text.split_once(':') {
            Some((name, value)) if name.trim().eq_ignore_ascii_case("content-length") => {
                match value.trim().parse::<usize>() {
                    Ok(n) => length = Some(n),
                    Err(_) => {
                        bad.get_or_insert(FrameError::BadHeader(text.to_owned()));
                    }
                }
            }
            Some((name, _)) if !name.trim().is_empty() && !name.contains(char::is_whitespace) => {}
            _ => {
                bad.get_or_insert(FrameError::BadHeader(text.to_owned()));
            }
        }
    }
    if let Some(e) = bad {
        return Err(e);
    }
    let length = length.ok_or(FrameError::MissingLength)?;
    if length > MAX_FRAME {
        let skipped = io::copy(&mut io::Read::take(&mut *r, length as u64), &mut io::sink())?;
        if skipped < length as u64 {
            return Err(FrameError::UnexpectedEof);
        }
        return Err(FrameError::TooLarge(length));
    }
    let mut body = vec![0; length];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FrameError::UnexpectedEof,
        _ => FrameError::Io(e),
    })?;
    Ok(Some(body))
}

pub fn write_frame<W: Write>(w: &mut W, body: &[u8]) -> io::Result<()> {
    write!(w, "Content-Length: {}\r\n\r\n", body.len())?;
    w.write_all(body)?;
    w.flush()
}
